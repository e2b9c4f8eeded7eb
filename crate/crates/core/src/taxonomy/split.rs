use std::collections::HashMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::taxonomy::GoldLabel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub tuning: Vec<GoldLabel>,
    pub evaluation: Vec<GoldLabel>,
    pub warnings: Vec<String>,
}

/// Seeded split of gold records into a tuning part (about `fraction` of the
/// records) and an evaluation part, stratified by label.
///
/// Each record is stratified by its rarest gold label (records with an empty
/// gold set form their own stratum). Per-stratum shares are allocated by
/// largest remainder so the tuning total is `round(n * fraction)`, then every
/// stratum of two or more records keeps at least one record on each side.
/// A stratum of one record goes to tuning with a warning. Both outputs keep
/// the input order.
pub fn split_labeled_corpus(gold: &[GoldLabel], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Usage(format!(
            "split fraction {fraction} must be in (0, 1)"
        )));
    }

    let mut frequency: HashMap<&str, usize> = HashMap::new();
    for g in gold {
        for label in &g.labels {
            *frequency.entry(label.as_str()).or_default() += 1;
        }
    }

    // strata in order of first appearance
    let mut keys: Vec<Option<&str>> = Vec::new();
    let mut members: HashMap<Option<&str>, Vec<usize>> = HashMap::new();
    for (i, g) in gold.iter().enumerate() {
        let key = g
            .labels
            .iter()
            .map(String::as_str)
            .min_by_key(|l| frequency[l]);
        members
            .entry(key)
            .or_insert_with(|| {
                keys.push(key);
                Vec::new()
            })
            .push(i);
    }

    let sizes: Vec<usize> = keys.iter().map(|k| members[k].len()).collect();
    let quotas = allocate(&sizes, fraction);

    let mut warnings = Vec::new();
    for (label, count) in frequency.iter() {
        if *count < 2 {
            warnings.push(format!(
                "label {label:?} has {count} instance; placed in tuning set only"
            ));
        }
    }
    warnings.sort();
    for w in &warnings {
        warn!("{w}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_tuning = vec![false; gold.len()];
    for (key, quota) in keys.iter().zip(quotas) {
        let mut idx = members[key].clone();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(quota) {
            in_tuning[i] = true;
        }
    }

    let (tuning, evaluation): (Vec<_>, Vec<_>) = gold.iter().zip(&in_tuning).partition(|(_, &t)| t);
    Ok(Split {
        tuning: tuning.into_iter().map(|(g, _)| g.clone()).collect(),
        evaluation: evaluation.into_iter().map(|(g, _)| g.clone()).collect(),
        warnings,
    })
}

/// Largest-remainder apportionment of `round(total * fraction)` over strata,
/// clamped so a stratum of size n >= 2 gets a quota in [1, n - 1] and a
/// singleton gets 1.
fn allocate(sizes: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let target = (total as f64 * fraction).round() as usize;
    let exact: Vec<f64> = sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // larger remainder first, earlier stratum on ties
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(target.saturating_sub(assigned)) {
        quotas[i] += 1;
    }

    for (q, &n) in quotas.iter_mut().zip(sizes) {
        *q = match n {
            0 => 0,
            1 => 1,
            _ => (*q).clamp(1, n - 1),
        };
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::GoldStatus;

    fn gold(pmid: usize, labels: &[&str]) -> GoldLabel {
        GoldLabel {
            pmid: pmid.to_string(),
            group: "G".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            status: GoldStatus::Resolved,
            tied: vec![],
        }
    }

    fn has(set: &[GoldLabel], label: &str) -> bool {
        set.iter().any(|g| g.labels.iter().any(|l| l == label))
    }

    #[test]
    fn balanced_two_labels_split_evenly() {
        let records: Vec<_> = (0..10)
            .map(|i| gold(i, &[if i % 2 == 0 { "A" } else { "B" }]))
            .collect();
        let split = split_labeled_corpus(&records, 0.5, 7).unwrap();
        assert_eq!(split.tuning.len(), 5);
        assert_eq!(split.evaluation.len(), 5);
        for label in ["A", "B"] {
            assert!(has(&split.tuning, label));
            assert!(has(&split.evaluation, label));
        }
        assert!(split.warnings.is_empty());
    }

    #[test]
    fn same_seed_same_split() {
        let records: Vec<_> = (0..40)
            .map(|i| gold(i, &[["A", "B", "C"][i % 3]]))
            .collect();
        let a = split_labeled_corpus(&records, 0.3, 99).unwrap();
        let b = split_labeled_corpus(&records, 0.3, 99).unwrap();
        assert_eq!(a, b);
        let c = split_labeled_corpus(&records, 0.3, 100).unwrap();
        assert_ne!(a.tuning, c.tuning);
    }

    #[test]
    fn singleton_label_goes_to_tuning_with_warning() {
        let mut records: Vec<_> = (0..6).map(|i| gold(i, &["A"])).collect();
        records.push(gold(6, &["Rare"]));
        let split = split_labeled_corpus(&records, 0.5, 1).unwrap();
        assert!(has(&split.tuning, "Rare"));
        assert!(!has(&split.evaluation, "Rare"));
        assert_eq!(split.warnings.len(), 1);
        assert!(split.warnings[0].contains("Rare"));
    }

    #[test]
    fn multilabel_strata_cover_both_sides() {
        let records = vec![
            gold(0, &["A", "B"]),
            gold(1, &["A"]),
            gold(2, &["A", "B"]),
            gold(3, &["A"]),
            gold(4, &[]),
            gold(5, &[]),
        ];
        let split = split_labeled_corpus(&records, 0.5, 3).unwrap();
        for label in ["A", "B"] {
            assert!(has(&split.tuning, label));
            assert!(has(&split.evaluation, label));
        }
        assert_eq!(split.tuning.len() + split.evaluation.len(), 6);
    }

    #[test]
    fn fraction_bounds() {
        assert!(split_labeled_corpus(&[], 0.0, 1).is_err());
        assert!(split_labeled_corpus(&[], 1.0, 1).is_err());
        assert!(split_labeled_corpus(&[], f64::NAN, 1).is_err());
    }

    #[test]
    fn apportionment() {
        assert_eq!(allocate(&[5, 5], 0.5), [3, 2]);
        assert_eq!(allocate(&[1, 9], 0.5), [1, 4]);
        assert_eq!(allocate(&[2, 2], 0.9), [1, 1]);
    }
}
