//! From label scores to final label assignments.

mod input;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::LabelScores;
use crate::taxonomy::Mode;

pub use input::{build_input, InputMode, ModelInput};
pub use sweep::{default_grid, sweep_thresholds, Objective, Sweep};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Multilabel decision thresholds: one default plus optional per-label overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(default = "default_threshold")]
    pub default: f64,
    #[serde(default)]
    pub per_label: BTreeMap<String, f64>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig::uniform(DEFAULT_THRESHOLD)
    }
}

impl ThresholdConfig {
    pub fn uniform(threshold: f64) -> Self {
        ThresholdConfig {
            default: threshold,
            per_label: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, t: f64| {
            if t > 0.0 && t < 1.0 {
                Ok(())
            } else {
                Err(Error::Data(format!(
                    "threshold {name} = {t} must be in (0, 1)"
                )))
            }
        };
        check("default", self.default)?;
        for (label, &t) in &self.per_label {
            check(label, t)?;
        }
        Ok(())
    }

    pub fn for_label(&self, label: &str) -> f64 {
        self.per_label.get(label).copied().unwrap_or(self.default)
    }

    /// Thresholds aligned with `labels`.
    pub fn resolve(&self, labels: &[&str]) -> Vec<f64> {
        labels.iter().map(|l| self.for_label(l)).collect()
    }
}

/// Argmax of the scores. Exact ties resolve to the lowest index and are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgmaxChoice {
    pub index: usize,
    pub tied: bool,
}

pub fn decide_multiclass(scores: &LabelScores) -> ArgmaxChoice {
    let s = scores.as_slice();
    let mut best = 0;
    for i in 1..s.len() {
        if s[i] > s[best] {
            best = i;
        }
    }
    let tied = s
        .iter()
        .enumerate()
        .any(|(i, &v)| i != best && v == s[best]);
    ArgmaxChoice { index: best, tied }
}

/// Indices whose score strictly exceeds their threshold.
pub fn decide_multilabel(scores: &LabelScores, thresholds: &[f64]) -> Vec<usize> {
    debug_assert_eq!(scores.len(), thresholds.len());
    scores
        .as_slice()
        .iter()
        .zip(thresholds)
        .enumerate()
        .filter(|(_, (p, t))| p > t)
        .map(|(i, _)| i)
        .collect()
}

/// Element-wise mean of two score vectors over the same labels.
pub fn fuse_scores(a: &LabelScores, b: &LabelScores) -> Result<LabelScores> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "cannot fuse score vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(LabelScores(
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x + y) / 2.0)
            .collect(),
    ))
}

/// One-vs-rest decision: label `i` is chosen iff the positive-class probability
/// of its binary scores (element 0) exceeds its threshold.
///
/// `binary` is aligned with `labels`; a missing entry is an error naming the label.
pub fn hierarchical_decide(
    binary: &[Option<LabelScores>],
    labels: &[&str],
    thresholds: &[f64],
) -> Result<Vec<usize>> {
    if binary.len() != labels.len() || thresholds.len() != labels.len() {
        return Err(Error::Data(format!(
            "hierarchical decision over {} labels got {} score pairs and {} thresholds",
            labels.len(),
            binary.len(),
            thresholds.len()
        )));
    }
    let mut chosen = Vec::new();
    for (i, scores) in binary.iter().enumerate() {
        let scores = scores
            .as_ref()
            .filter(|s| s.len() >= 2)
            .ok_or_else(|| Error::Data(format!("no binary scores for label {:?}", labels[i])))?;
        if scores[0] > thresholds[i] {
            chosen.push(i);
        }
    }
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Multiclass argmax tie broken to the lowest index.
    Tied,
    /// Multilabel decision with no label above threshold.
    Empty,
    /// Record had no abstract; scored on the title instead.
    TitleFallback,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Tied => "tied",
            Flag::Empty => "empty",
            Flag::TitleFallback => "title_fallback",
        })
    }
}

/// Final assignment for one record in one group under one input mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub pmid: String,
    pub group: String,
    pub mode: Mode,
    pub input: InputMode,
    /// Chosen label names in group order (exactly one for multiclass).
    pub labels: Vec<String>,
    /// Per-label scores that produced the decision, in group order.
    pub scores: LabelScores,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
}

impl Decision {
    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> LabelScores {
        LabelScores(v.to_vec())
    }

    #[test]
    fn argmax() {
        assert_eq!(
            decide_multiclass(&s(&[0.1, 0.7, 0.2])),
            ArgmaxChoice {
                index: 1,
                tied: false
            }
        );
        assert_eq!(
            decide_multiclass(&s(&[0.5, 0.5])),
            ArgmaxChoice {
                index: 0,
                tied: true
            }
        );
        assert_eq!(
            decide_multiclass(&s(&[0.2, 0.4, 0.4])),
            ArgmaxChoice {
                index: 1,
                tied: true
            }
        );
        assert_eq!(
            decide_multiclass(&s(&[0.4, 0.2, 0.4])),
            ArgmaxChoice {
                index: 0,
                tied: true
            }
        );
    }

    #[test]
    fn threshold_filter() {
        assert_eq!(decide_multilabel(&s(&[0.6, 0.4, 0.55]), &[0.5; 3]), [0, 2]);
        assert!(decide_multilabel(&s(&[0.2, 0.3]), &[0.5; 2]).is_empty());
        assert!(decide_multilabel(&s(&[0.5, 0.5]), &[0.5; 2]).is_empty());
    }

    #[test]
    fn fusion() {
        let a = s(&[0.2, 0.8]);
        let b = s(&[0.4, 0.6]);
        let f = fuse_scores(&a, &b).unwrap();
        assert!((f[0] - 0.3).abs() < 1e-12 && (f[1] - 0.7).abs() < 1e-12);
        assert_eq!(fuse_scores(&a, &a).unwrap(), a);
        assert_eq!(fuse_scores(&a, &b).unwrap(), fuse_scores(&b, &a).unwrap());
        assert!(fuse_scores(&a, &s(&[1.0])).is_err());
    }

    #[test]
    fn hierarchical() {
        let pairs = |pos: &[f64]| {
            pos.iter()
                .map(|&p| Some(s(&[p, 1.0 - p])))
                .collect::<Vec<_>>()
        };
        let labels = ["a", "b", "c"];
        assert_eq!(
            hierarchical_decide(&pairs(&[0.8, 0.4, 0.6]), &labels, &[0.5, 0.5, 0.7]).unwrap(),
            [0]
        );
        assert!(
            hierarchical_decide(&pairs(&[0.1, 0.4, 0.6]), &labels, &[0.5, 0.5, 0.7])
                .unwrap()
                .is_empty()
        );
        let mut missing = pairs(&[0.8, 0.4, 0.6]);
        missing[1] = None;
        let err = hierarchical_decide(&missing, &labels, &[0.5; 3]).unwrap_err();
        assert!(err.to_string().contains("\"b\""), "{err}");
    }

    #[test]
    fn hierarchical_matches_flat_under_uniform_threshold() {
        let flat = s(&[0.9, 0.2, 0.51, 0.5]);
        let binary: Vec<_> = flat
            .as_slice()
            .iter()
            .map(|&p| Some(s(&[p, 1.0 - p])))
            .collect();
        let t = [0.5; 4];
        assert_eq!(
            hierarchical_decide(&binary, &["a", "b", "c", "d"], &t).unwrap(),
            decide_multilabel(&flat, &t)
        );
    }

    #[test]
    fn threshold_config() {
        let mut t = ThresholdConfig::uniform(0.4);
        t.per_label.insert("b".into(), 0.7);
        assert_eq!(t.resolve(&["a", "b"]), [0.4, 0.7]);
        assert!(t.validate().is_ok());
        t.per_label.insert("c".into(), 0.0);
        assert!(t.validate().is_err());
        let parsed: ThresholdConfig = toml::from_str("per_label = { x = 0.3 }").unwrap();
        assert_eq!(parsed.default, DEFAULT_THRESHOLD);
    }

    #[test]
    fn decision_serialization() {
        let d = Decision {
            pmid: "1".into(),
            group: "G".into(),
            mode: Mode::Multilabel,
            input: InputMode::Appended,
            labels: vec![],
            scores: s(&[0.25, 0.5]),
            flags: vec![Flag::Empty],
        };
        let line = serde_json::to_string(&d).unwrap();
        assert_eq!(
            line,
            r#"{"pmid":"1","group":"G","mode":"multilabel","input":"appended","labels":[],"scores":[0.25,0.5],"flags":["empty"]}"#
        );
        assert_eq!(serde_json::from_str::<Decision>(&line).unwrap(), d);
    }
}
