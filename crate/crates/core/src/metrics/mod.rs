//! Classification metrics: confusion matrix, precision/recall/F1 (weighted,
//! macro and micro), and rank-based AUC.
//!
//! Every ratio with a zero denominator is defined as 0 and logged.

mod report;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::LabelScores;
use crate::taxonomy::Mode;

pub use report::{evaluate_decisions, write_report_csv, EvalReport, LabelRow, REPORT_CSV_HEADER};

/// Square count matrix, `counts[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, label: usize) -> u64 {
        self.counts[label].iter().sum()
    }

    pub fn predicted(&self, label: usize) -> u64 {
        self.counts.iter().map(|row| row[label]).sum()
    }
}

pub fn confusion_matrix(
    predicted: &[usize],
    gold: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix> {
    if predicted.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (i, (&p, &g)) in predicted.iter().zip(gold).enumerate() {
        if p >= classes || g >= classes {
            return Err(Error::Data(format!(
                "record {i}: label out of range (gold {g}, predicted {p}, classes {classes})"
            )));
        }
        cm.counts[g][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Per-label values weighted by support.
    #[default]
    Weighted,
    /// Unweighted mean over all labels.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_label: Vec<Prf>,
}

fn ratio(num: u64, den: u64, what: &str) -> f64 {
    if den == 0 {
        if num == 0 {
            warn!("{what}: 0/0 defined as 0");
        }
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Accuracy plus one-vs-rest precision/recall/F1 per label and their average.
pub fn multiclass_metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MulticlassMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("no records to evaluate".into()));
    }
    let per_label: Vec<Prf> = (0..cm.classes())
        .map(|i| {
            let tp = cm.counts[i][i];
            let precision = ratio(tp, cm.predicted(i), "precision");
            let recall = ratio(tp, cm.support(i), "recall");
            Prf {
                precision,
                recall,
                f1: f1_of(precision, recall),
                support: cm.support(i),
            }
        })
        .collect();

    let average = |value: fn(&Prf) -> f64| -> f64 {
        match averaging {
            Averaging::Weighted => {
                per_label
                    .iter()
                    .map(|m| value(m) * m.support as f64)
                    .sum::<f64>()
                    / total as f64
            }
            Averaging::Macro => per_label.iter().map(value).sum::<f64>() / per_label.len() as f64,
        }
    };

    Ok(MulticlassMetrics {
        accuracy: cm.trace() as f64 / total as f64,
        precision: average(|m| m.precision),
        recall: average(|m| m.recall),
        f1: average(|m| m.f1),
        per_label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// Pools true/false positives and false negatives over every (record, label).
pub fn multilabel_micro_metrics(
    predicted: &[Vec<usize>],
    gold: &[Vec<usize>],
    classes: usize,
) -> Result<MicroMetrics> {
    if predicted.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} gold sets",
            predicted.len(),
            gold.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (r, (p, g)) in predicted.iter().zip(gold).enumerate() {
        let mask = |set: &[usize]| -> Result<Vec<bool>> {
            let mut m = vec![false; classes];
            for &i in set {
                if i >= classes {
                    return Err(Error::Data(format!(
                        "record {r}: label {i} out of range ({classes} classes)"
                    )));
                }
                m[i] = true;
            }
            Ok(m)
        };
        let (p_mask, g_mask) = (mask(p)?, mask(g)?);
        for l in 0..classes {
            match (p_mask[l], g_mask[l]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let precision = ratio(tp, tp + fp, "micro precision");
    let recall = ratio(tp, tp + fn_, "micro recall");
    Ok(MicroMetrics {
        precision,
        recall,
        f1: ratio(2 * tp, 2 * tp + fp + fn_, "micro F1"),
        tp,
        fp,
        fn_,
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks (Mann-Whitney U).
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Data(format!(
            "{} scores for {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Data(format!("score {bad} is not a number")));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data(
            "AUC undefined: gold labels contain a single class".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // twice the rank sum of positives, kept integral
    let mut doubled_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1..=end share the mean rank (start + 1 + end) / 2
        let doubled_mean_rank = (start + 1 + end) as u64;
        let positives_here = order[start..end].iter().filter(|&&i| positive[i]).count() as u64;
        doubled_rank_sum += doubled_mean_rank * positives_here;
        start = end;
    }
    let n_pos = n_pos as u64;
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg as u64) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub value: f64,
    /// Per-label one-vs-rest AUC (multiclass) or `None` where undefined.
    pub per_label: Vec<Option<f64>>,
    /// Label indices skipped because their gold column had a single class.
    pub skipped: Vec<usize>,
}

/// Multiclass: macro mean of one-vs-rest AUC over labels whose gold column
/// has both classes. Multilabel: one AUC over all pooled (record, label) pairs.
pub fn auc_aggregate(
    scores: &[LabelScores],
    gold: &[Vec<usize>],
    mode: Mode,
) -> Result<AucSummary> {
    if scores.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} score vectors for {} gold sets",
            scores.len(),
            gold.len()
        )));
    }
    let Some(classes) = scores.first().map(LabelScores::len) else {
        return Err(Error::Data("AUC over an empty set".into()));
    };
    if let Some(r) = scores.iter().position(|s| s.len() != classes) {
        return Err(Error::Data(format!(
            "record {r} has {} scores, expected {classes}",
            scores[r].len()
        )));
    }

    let column = |l: usize| -> (Vec<f64>, Vec<bool>) {
        (
            scores.iter().map(|s| s[l]).collect(),
            gold.iter().map(|g| g.contains(&l)).collect(),
        )
    };

    let mut per_label = Vec::with_capacity(classes);
    let mut skipped = Vec::new();
    for l in 0..classes {
        let (s, g) = column(l);
        match auc_binary(&s, &g) {
            Ok(v) => per_label.push(Some(v)),
            Err(_) => {
                warn!("AUC: label {l} has a single gold class; skipped");
                skipped.push(l);
                per_label.push(None);
            }
        }
    }

    let value = match mode {
        Mode::Multiclass => {
            let defined: Vec<f64> = per_label.iter().flatten().copied().collect();
            if defined.is_empty() {
                return Err(Error::Data(
                    "AUC undefined: no label has both gold classes".into(),
                ));
            }
            defined.iter().sum::<f64>() / defined.len() as f64
        }
        Mode::Multilabel => {
            let mut pooled_scores = Vec::with_capacity(scores.len() * classes);
            let mut pooled_gold = Vec::with_capacity(scores.len() * classes);
            for l in 0..classes {
                let (s, g) = column(l);
                pooled_scores.extend(s);
                pooled_gold.extend(g);
            }
            auc_binary(&pooled_scores, &pooled_gold)
                .map_err(|_| Error::Data("AUC undefined: pooled gold has a single class".into()))?
        }
    };

    Ok(AucSummary {
        value,
        per_label,
        skipped,
    })
}
