use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::decision::{Decision, InputMode};
use crate::error::{Error, Result};
use crate::metrics::{
    auc_aggregate, confusion_matrix, multiclass_metrics, multilabel_micro_metrics, Averaging,
    ConfusionMatrix,
};
use crate::scorer::LabelScores;
use crate::taxonomy::{CategoryGroup, GoldLabel, Mode};

/// Column order of the metrics CSV.
pub const REPORT_CSV_HEADER: [&str; 7] = ["label", "Ac", "F1", "AUC", "Pv", "Re", "support"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub auc: Option<f64>,
}

/// Evaluation of one group under one input mode.
///
/// For multilabel groups the aggregate precision/recall/F1 are micro-averaged
/// and `accuracy` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub group: String,
    pub mode: Mode,
    pub input: InputMode,
    pub averaging: Averaging,
    pub records: usize,
    pub excluded_no_gold: usize,
    pub excluded_tie: usize,
    pub accuracy: Option<f64>,
    pub f1: f64,
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub per_label: Vec<LabelRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

/// Scores `decisions` (one group, one input mode) against resolved gold labels
/// keyed by pmid. Records without gold or with tied gold are excluded and counted.
pub fn evaluate_decisions(
    group: &CategoryGroup,
    decisions: &[Decision],
    gold: &BTreeMap<String, GoldLabel>,
    averaging: Averaging,
) -> Result<EvalReport> {
    let Some(first) = decisions.first() else {
        return Err(Error::Data(format!(
            "no decisions to evaluate for group {:?}",
            group.name
        )));
    };
    let input = first.input;
    if let Some(d) = decisions
        .iter()
        .find(|d| d.group != group.name || d.input != input)
    {
        return Err(Error::Data(format!(
            "decision for {} ({:?}, {}) mixed into evaluation of {:?} ({input})",
            d.pmid, d.group, d.input, group.name
        )));
    }

    let index = |name: &str| {
        group
            .label_index(name)
            .ok_or_else(|| Error::Data(format!("label {name:?} not in group {:?}", group.name)))
    };

    let mut excluded_no_gold = 0;
    let mut excluded_tie = 0;
    let mut scores: Vec<LabelScores> = Vec::new();
    let mut predicted: Vec<Vec<usize>> = Vec::new();
    let mut actual: Vec<Vec<usize>> = Vec::new();
    for d in decisions {
        match gold.get(&d.pmid) {
            None => excluded_no_gold += 1,
            Some(g) if !g.is_resolved() => excluded_tie += 1,
            Some(g) => {
                if d.scores.len() != group.len() {
                    return Err(Error::Data(format!(
                        "decision for {} carries {} scores, group has {} labels",
                        d.pmid,
                        d.scores.len(),
                        group.len()
                    )));
                }
                predicted.push(d.labels.iter().map(|l| index(l)).collect::<Result<_>>()?);
                actual.push(g.labels.iter().map(|l| index(l)).collect::<Result<_>>()?);
                scores.push(d.scores.clone());
            }
        }
    }
    if excluded_no_gold > 0 || excluded_tie > 0 {
        warn!(
            "group {:?} ({input}): excluded {excluded_no_gold} records without gold, {excluded_tie} with tied gold",
            group.name
        );
    }
    if scores.is_empty() {
        return Err(Error::Data(format!(
            "group {:?} ({input}): no decisions have resolved gold labels",
            group.name
        )));
    }

    let auc = match auc_aggregate(&scores, &actual, group.mode) {
        Ok(a) => Some(a),
        Err(e) => {
            warn!("group {:?} ({input}): {e}", group.name);
            None
        }
    };
    let label_auc = |l: usize| auc.as_ref().and_then(|a| a.per_label[l]);

    let report = match group.mode {
        Mode::Multiclass => {
            let one = |sets: &[Vec<usize>], what: &str| -> Result<Vec<usize>> {
                sets.iter()
                    .map(|s| match s.as_slice() {
                        [i] => Ok(*i),
                        other => Err(Error::Data(format!(
                            "multiclass {what} with {} labels in group {:?}",
                            other.len(),
                            group.name
                        ))),
                    })
                    .collect()
            };
            let cm = confusion_matrix(
                &one(&predicted, "decision")?,
                &one(&actual, "gold label")?,
                group.len(),
            )?;
            let m = multiclass_metrics(&cm, averaging)?;
            EvalReport {
                group: group.name.clone(),
                mode: group.mode,
                input,
                averaging,
                records: scores.len(),
                excluded_no_gold,
                excluded_tie,
                accuracy: Some(m.accuracy),
                f1: m.f1,
                auc: auc.as_ref().map(|a| a.value),
                precision: m.precision,
                recall: m.recall,
                per_label: m
                    .per_label
                    .iter()
                    .enumerate()
                    .map(|(l, prf)| LabelRow {
                        label: group.labels[l].name.clone(),
                        precision: prf.precision,
                        recall: prf.recall,
                        f1: prf.f1,
                        support: prf.support,
                        auc: label_auc(l),
                    })
                    .collect(),
                confusion: Some(cm),
            }
        }
        Mode::Multilabel => {
            let micro = multilabel_micro_metrics(&predicted, &actual, group.len())?;
            let per_label = (0..group.len())
                .map(|l| {
                    let column = |sets: &[Vec<usize>]| {
                        sets.iter()
                            .map(|s| vec![0; usize::from(s.contains(&l))])
                            .collect::<Vec<_>>()
                    };
                    let m = multilabel_micro_metrics(&column(&predicted), &column(&actual), 1)?;
                    Ok(LabelRow {
                        label: group.labels[l].name.clone(),
                        precision: m.precision,
                        recall: m.recall,
                        f1: m.f1,
                        support: m.tp + m.fn_,
                        auc: label_auc(l),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            EvalReport {
                group: group.name.clone(),
                mode: group.mode,
                input,
                averaging,
                records: scores.len(),
                excluded_no_gold,
                excluded_tie,
                accuracy: None,
                f1: micro.f1,
                auc: auc.as_ref().map(|a| a.value),
                precision: micro.precision,
                recall: micro.recall,
                per_label,
                confusion: None,
            }
        }
    };
    Ok(report)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per label plus an `ALL` aggregate row, columns as [`REPORT_CSV_HEADER`].
pub fn write_report_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Data(format!("writing metrics CSV: {e}"));
    w.write_record(REPORT_CSV_HEADER).map_err(io)?;
    for row in &report.per_label {
        w.write_record([
            row.label.clone(),
            String::new(),
            row.f1.to_string(),
            cell(row.auc),
            row.precision.to_string(),
            row.recall.to_string(),
            row.support.to_string(),
        ])
        .map_err(io)?;
    }
    w.write_record([
        "ALL".to_string(),
        cell(report.accuracy),
        report.f1.to_string(),
        cell(report.auc),
        report.precision.to_string(),
        report.recall.to_string(),
        report.records.to_string(),
    ])
    .map_err(io)?;
    w.flush()
        .map_err(|e| Error::Data(format!("writing metrics CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::GoldStatus;

    fn decision(pmid: &str, labels: &[&str], scores: &[f64], mode: Mode) -> Decision {
        Decision {
            pmid: pmid.into(),
            group: "G".into(),
            mode,
            input: InputMode::Abstract,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            scores: LabelScores(scores.to_vec()),
            flags: vec![],
        }
    }

    fn gold(pmid: &str, labels: &[&str], status: GoldStatus) -> (String, GoldLabel) {
        (
            pmid.to_string(),
            GoldLabel {
                pmid: pmid.into(),
                group: "G".into(),
                labels: labels.iter().map(|s| s.to_string()).collect(),
                status,
                tied: vec![],
            },
        )
    }

    #[test]
    fn perfect_predictions_score_one() {
        let g = CategoryGroup::simple("G", Mode::Multiclass, &["A", "B"]);
        let decisions = vec![
            decision("1", &["A"], &[0.9, 0.1], Mode::Multiclass),
            decision("2", &["B"], &[0.2, 0.8], Mode::Multiclass),
        ];
        let gold: BTreeMap<_, _> = [
            gold("1", &["A"], GoldStatus::Resolved),
            gold("2", &["B"], GoldStatus::Resolved),
        ]
        .into_iter()
        .collect();
        let r = evaluate_decisions(&g, &decisions, &gold, Averaging::Weighted).unwrap();
        assert_eq!(
            (r.accuracy, r.f1, r.auc, r.precision, r.recall),
            (Some(1.0), 1.0, Some(1.0), 1.0, 1.0)
        );
    }

    #[test]
    fn missing_and_tied_gold_are_excluded() {
        let g = CategoryGroup::simple("G", Mode::Multiclass, &["A", "B"]);
        let decisions = vec![
            decision("1", &["A"], &[0.9, 0.1], Mode::Multiclass),
            decision("2", &["B"], &[0.2, 0.8], Mode::Multiclass),
            decision("3", &["B"], &[0.2, 0.8], Mode::Multiclass),
            decision("4", &["A"], &[0.6, 0.4], Mode::Multiclass),
        ];
        let gold: BTreeMap<_, _> = [
            gold("1", &["A"], GoldStatus::Resolved),
            gold("2", &["A"], GoldStatus::Resolved),
            gold("3", &[], GoldStatus::Tie),
        ]
        .into_iter()
        .collect();
        let r = evaluate_decisions(&g, &decisions, &gold, Averaging::Weighted).unwrap();
        assert_eq!((r.records, r.excluded_no_gold, r.excluded_tie), (2, 1, 1));
        assert_eq!(r.accuracy, Some(0.5));
        // label B has no gold positives among evaluated records
        assert_eq!(r.per_label[1].auc, None);
    }

    #[test]
    fn multilabel_uses_micro_aggregates() {
        let g = CategoryGroup::simple("G", Mode::Multilabel, &["X", "Y"]);
        let decisions = vec![
            decision("1", &["X"], &[0.9, 0.4], Mode::Multilabel),
            decision("2", &["Y"], &[0.1, 0.7], Mode::Multilabel),
        ];
        let gold: BTreeMap<_, _> = [
            gold("1", &["X", "Y"], GoldStatus::Resolved),
            gold("2", &["Y"], GoldStatus::Resolved),
        ]
        .into_iter()
        .collect();
        let r = evaluate_decisions(&g, &decisions, &gold, Averaging::Weighted).unwrap();
        assert_eq!(r.accuracy, None);
        assert!((r.precision - 1.0).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1 - 0.8).abs() < 1e-12);
        assert_eq!(r.per_label[1].support, 2);
        assert!((r.per_label[1].recall - 0.5).abs() < 1e-12);

        let mut buf = Vec::new();
        write_report_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "label,Ac,F1,AUC,Pv,Re,support");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("ALL,,0.8"));
    }

    #[test]
    fn mixed_input_modes_rejected() {
        let g = CategoryGroup::simple("G", Mode::Multiclass, &["A", "B"]);
        let mut d2 = decision("2", &["B"], &[0.2, 0.8], Mode::Multiclass);
        d2.input = InputMode::Title;
        let decisions = vec![decision("1", &["A"], &[0.9, 0.1], Mode::Multiclass), d2];
        assert!(evaluate_decisions(&g, &decisions, &BTreeMap::new(), Averaging::Weighted).is_err());
    }
}
