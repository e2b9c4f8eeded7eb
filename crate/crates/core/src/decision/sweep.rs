use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::decision::ThresholdConfig;
use crate::error::{Error, Result};
use crate::scorer::LabelScores;

/// Per-label quantity maximized by [`sweep_thresholds`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    F1,
    Precision,
    Recall,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Objective::F1),
            "precision" => Ok(Objective::Precision),
            "recall" => Ok(Objective::Recall),
            other => Err(Error::Usage(format!(
                "unknown objective {other:?} (f1, precision, recall)"
            ))),
        }
    }
}

impl Objective {
    fn evaluate(self, tp: usize, fp: usize, fn_: usize) -> f64 {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        match self {
            Objective::F1 => ratio(2 * tp, 2 * tp + fp + fn_),
            Objective::Precision => ratio(tp, tp + fp),
            Objective::Recall => ratio(tp, tp + fn_),
        }
    }
}

/// 0.05, 0.10, ..., 0.95.
pub fn default_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub thresholds: ThresholdConfig,
    /// Best objective value per label, aligned with the label list.
    pub best: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Chooses, for every label independently, the grid value that maximizes the
/// objective of `score > threshold` against the gold sets. Ties go to the
/// smallest threshold. A label with no gold positives gets the grid median.
///
/// `gold[r]` holds label indices for record `r`; `scores[r]` is aligned with `labels`.
pub fn sweep_thresholds(
    scores: &[LabelScores],
    gold: &[Vec<usize>],
    labels: &[&str],
    grid: &[f64],
    objective: Objective,
) -> Result<Sweep> {
    if grid.is_empty() {
        return Err(Error::Usage("threshold grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::Usage(format!("grid value {bad} outside (0, 1)")));
    }
    if scores.is_empty() {
        return Err(Error::Usage("tuning set is empty".into()));
    }
    if scores.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} score vectors for {} gold sets",
            scores.len(),
            gold.len()
        )));
    }
    if let Some((r, s)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| s.len() != labels.len())
    {
        return Err(Error::Data(format!(
            "record {r} has {} scores for {} labels",
            s.len(),
            labels.len()
        )));
    }

    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let median = sorted[(sorted.len() - 1) / 2];

    let mut thresholds = ThresholdConfig::uniform(median);
    let mut best_values = Vec::with_capacity(labels.len());
    let mut warnings = Vec::new();

    for (li, &label) in labels.iter().enumerate() {
        let positives: Vec<bool> = gold.iter().map(|g| g.contains(&li)).collect();
        if !positives.iter().any(|&p| p) {
            let msg = format!(
                "label {label:?} has no positives in the tuning set; using grid median {median}"
            );
            warn!("{msg}");
            warnings.push(msg);
            thresholds.per_label.insert(label.to_string(), median);
            best_values.push(0.0);
            continue;
        }

        let mut best: Option<(f64, f64)> = None;
        for &t in &sorted {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (s, &pos) in scores.iter().zip(&positives) {
                match (s[li] > t, pos) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            let value = objective.evaluate(tp, fp, fn_);
            if best.is_none_or(|(_, v)| value > v) {
                best = Some((t, value));
            }
        }
        let (t, v) = best.expect("grid is non-empty");
        thresholds.per_label.insert(label.to_string(), t);
        best_values.push(v);
    }

    Ok(Sweep {
        thresholds,
        best: best_values,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_values() {
        let g = default_grid();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[9], 0.5);
        assert_eq!(g[18], 0.95);
    }

    #[test]
    fn constant_high_scores_pick_smallest_threshold() {
        let scores = vec![LabelScores(vec![0.9, 0.9]); 5];
        let gold = vec![vec![0, 1]; 5];
        let sweep =
            sweep_thresholds(&scores, &gold, &["a", "b"], &default_grid(), Objective::F1).unwrap();
        assert_eq!(sweep.thresholds.for_label("a"), 0.05);
        assert_eq!(sweep.thresholds.for_label("b"), 0.05);
        assert_eq!(sweep.best, [1.0, 1.0]);
    }

    #[test]
    fn separable_label_gets_a_separating_threshold() {
        let scores: Vec<_> = [0.2, 0.3, 0.7, 0.8]
            .iter()
            .map(|&p| LabelScores(vec![p, 0.5]))
            .collect();
        let gold = vec![vec![1], vec![], vec![0], vec![0, 1]];
        let sweep = sweep_thresholds(
            &scores,
            &gold,
            &["a", "b"],
            &[0.1, 0.25, 0.5, 0.75],
            Objective::F1,
        )
        .unwrap();
        assert_eq!(sweep.thresholds.for_label("a"), 0.5);
        assert_eq!(sweep.best[0], 1.0);
    }

    #[test]
    fn absent_label_gets_median_with_warning() {
        let scores = vec![LabelScores(vec![0.9, 0.1]); 3];
        let gold = vec![vec![0]; 3];
        let sweep =
            sweep_thresholds(&scores, &gold, &["a", "b"], &default_grid(), Objective::F1).unwrap();
        assert_eq!(sweep.thresholds.for_label("b"), 0.5);
        assert_eq!(sweep.warnings.len(), 1);
        assert!(sweep.warnings[0].contains("\"b\""));
    }

    #[test]
    fn bad_inputs() {
        let scores = vec![LabelScores(vec![0.9, 0.1])];
        let gold = vec![vec![0]];
        assert!(sweep_thresholds(&scores, &gold, &["a", "b"], &[], Objective::F1).is_err());
        assert!(sweep_thresholds(&scores, &gold, &["a", "b"], &[0.0, 0.5], Objective::F1).is_err());
        assert!(sweep_thresholds(&[], &[], &["a", "b"], &[0.5], Objective::F1).is_err());
        assert!(sweep_thresholds(&scores, &gold, &["a"], &[0.5], Objective::F1).is_err());
    }
}
