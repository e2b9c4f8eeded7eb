use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::InputMode;
use crate::error::{Error, Result};
use crate::ingest::ArticleRecord;
use crate::metrics::{evaluate_decisions, Averaging};
use crate::pipeline::{classify_group, ClassifyOptions};
use crate::scorer::Scorer;
use crate::taxonomy::{CategoryGroup, GoldLabel};
use crate::trends::MonotonicClock;

/// One replacement phrase per label, in group label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhrasingVariant {
    pub name: String,
    pub phrases: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantsDocument {
    group: String,
    #[serde(rename = "variant", default)]
    variants: Vec<PhrasingVariant>,
}

/// Parses `group = "..."` followed by `[[variant]]` tables with `name` and `phrases`.
pub fn parse_variants(text: &str) -> Result<(String, Vec<PhrasingVariant>)> {
    let doc: VariantsDocument =
        toml::from_str(text).map_err(|e| Error::Usage(format!("variants: {e}")))?;
    Ok((doc.group, doc.variants))
}

pub fn load_variants(path: &Path) -> Result<(String, Vec<PhrasingVariant>)> {
    parse_variants(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Accuracy,
    F1,
    Auc,
    Precision,
    Recall,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::F1,
        Metric::Auc,
        Metric::Precision,
        Metric::Recall,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            Metric::Accuracy => "Ac",
            Metric::F1 => "F1",
            Metric::Auc => "AUC",
            Metric::Precision => "Pv",
            Metric::Recall => "Re",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub input: InputMode,
    pub records: usize,
    pub accuracy: Option<f64>,
    pub f1: f64,
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
}

impl AblationRow {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::F1 => Some(self.f1),
            Metric::Auc => self.auc,
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
        }
    }
}

/// Rows in variant-major order; `best[metric]` lists every row reaching the maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub group: String,
    pub rows: Vec<AblationRow>,
    pub best: BTreeMap<Metric, Vec<usize>>,
}

impl AblationTable {
    fn new(group: String, rows: Vec<AblationRow>) -> Self {
        let mut best = BTreeMap::new();
        for metric in Metric::ALL {
            let top = rows
                .iter()
                .filter_map(|r| r.value(metric))
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.max(v)))
                });
            if let Some(top) = top {
                let winners = (0..rows.len())
                    .filter(|&i| rows[i].value(metric) == Some(top))
                    .collect();
                best.insert(metric, winners);
            }
        }
        AblationTable { group, rows, best }
    }

    pub fn is_best(&self, row: usize, metric: Metric) -> bool {
        self.best
            .get(&metric)
            .is_some_and(|rows| rows.contains(&row))
    }

    /// Markdown table with best values in bold.
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "## Phrasing comparison: {}\n", self.group);
        let _ = writeln!(
            md,
            "| Variant | Input | Records | Ac | F1 | AUC | Pv | Re |"
        );
        let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
        for (i, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = Metric::ALL
                .iter()
                .map(|&m| match row.value(m) {
                    None => "-".to_string(),
                    Some(v) if self.is_best(i, m) => format!("**{v:.3}**"),
                    Some(v) => format!("{v:.3}"),
                })
                .collect();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                row.variant,
                row.input.heading(),
                row.records,
                cells.join(" | ")
            );
        }
        md
    }

    /// `variant,input,records,Ac,F1,AUC,Pv,Re,best`; `best` lists the metric
    /// headings this row wins, separated by `;`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Data(format!("ablation CSV: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "variant", "input", "records", "Ac", "F1", "AUC", "Pv", "Re", "best",
        ])
        .map_err(err)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut record = vec![
                row.variant.clone(),
                row.input.to_string(),
                row.records.to_string(),
            ];
            record.extend(
                Metric::ALL
                    .iter()
                    .map(|&m| row.value(m).map(|v| v.to_string()).unwrap_or_default()),
            );
            let wins: Vec<&str> = Metric::ALL
                .iter()
                .filter(|&&m| self.is_best(i, m))
                .map(|m| m.heading())
                .collect();
            record.push(wins.join(";"));
            w.write_record(&record).map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::Data(format!("ablation CSV: {e}")))
    }
}

/// Classifies and evaluates `records` once per (variant, input mode) with the
/// group's phrases replaced by the variant's.
#[allow(clippy::too_many_arguments)]
pub fn ablate(
    group: &CategoryGroup,
    variants: &[PhrasingVariant],
    modes: &[InputMode],
    records: &[ArticleRecord],
    gold: &BTreeMap<String, GoldLabel>,
    scorer: &dyn Scorer,
    options: ClassifyOptions,
    averaging: Averaging,
) -> Result<AblationTable> {
    if variants.len() < 2 {
        return Err(Error::Usage(format!(
            "phrase comparison needs at least 2 variants, got {}",
            variants.len()
        )));
    }
    let mut names = HashSet::new();
    if let Some(v) = variants.iter().find(|v| !names.insert(v.name.as_str())) {
        return Err(Error::Usage(format!("variant {:?} defined twice", v.name)));
    }
    if modes.is_empty() {
        return Err(Error::Usage("no input modes to compare".into()));
    }
    let groups: Vec<CategoryGroup> = variants
        .iter()
        .map(|v| {
            group
                .with_phrases(&v.phrases)
                .map_err(|e| Error::Usage(format!("variant {:?}: {e}", v.name)))
        })
        .collect::<Result<_>>()?;

    let clock = MonotonicClock::new();
    let mut rows = Vec::new();
    for (variant, g) in variants.iter().zip(&groups) {
        for &input in modes {
            let c = classify_group(records, g, input, scorer, options, &clock)?;
            let r = evaluate_decisions(g, &c.decisions, gold, averaging)?;
            rows.push(AblationRow {
                variant: variant.name.clone(),
                input,
                records: r.records,
                accuracy: r.accuracy,
                f1: r.f1,
                auc: r.auc,
                precision: r.precision,
                recall: r.recall,
            });
        }
    }
    Ok(AblationTable::new(group.name.clone(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::MockScorer;
    use crate::taxonomy::{GoldStatus, Mode};

    fn row(variant: &str, ac: f64) -> AblationRow {
        AblationRow {
            variant: variant.into(),
            input: InputMode::Abstract,
            records: 4,
            accuracy: Some(ac),
            f1: ac,
            auc: None,
            precision: ac,
            recall: ac,
        }
    }

    #[test]
    fn best_marks_every_maximum() {
        let t = AblationTable::new(
            "G".into(),
            vec![row("a", 0.5), row("b", 0.75), row("c", 0.75)],
        );
        assert_eq!(t.best[&Metric::Accuracy], [1, 2]);
        assert!(!t.best.contains_key(&Metric::Auc));
        let md = t.to_markdown();
        assert!(md.contains("| a | Abstract | 4 | 0.500 |"));
        assert!(md.contains("| b | Abstract | 4 | **0.750** |"));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert!(csv.lines().nth(2).unwrap().ends_with(",Ac;F1;Pv;Re"));
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn parse() {
        let (group, vs) = parse_variants(
            "group = \"Type\"\n[[variant]]\nname = \"short\"\nphrases = [\"a\", \"b\"]\n[[variant]]\nname = \"long\"\nphrases = [\"a a\", \"b b\"]\n",
        )
        .unwrap();
        assert_eq!(group, "Type");
        assert_eq!(vs.len(), 2);
        assert_eq!(vs[1].phrases, ["a a", "b b"]);
    }

    #[test]
    fn cartesian_rows_and_validation() {
        let group = CategoryGroup::simple("G", Mode::Multiclass, &["x", "y"]);
        let records = vec![
            ArticleRecord::new("1", "t", "alpha beta", 2020),
            ArticleRecord::new("2", "u", "gamma delta", 2020),
        ];
        let gold: BTreeMap<String, GoldLabel> = [("1", "x"), ("2", "y")]
            .iter()
            .map(|(p, l)| {
                (
                    p.to_string(),
                    GoldLabel {
                        pmid: p.to_string(),
                        group: "G".into(),
                        labels: vec![l.to_string()],
                        status: GoldStatus::Resolved,
                        tied: vec![],
                    },
                )
            })
            .collect();
        let v = |name: &str, a: &str, b: &str| PhrasingVariant {
            name: name.into(),
            phrases: vec![a.into(), b.into()],
        };
        let opts = ClassifyOptions {
            parallelism: 1,
            max_chars: 4000,
        };
        let modes = [InputMode::Abstract, InputMode::Title];
        let variants = [v("good", "alpha", "gamma"), v("same", "alpha", "gamma")];
        let t = ablate(
            &group,
            &variants,
            &modes,
            &records,
            &gold,
            &MockScorer,
            opts,
            Averaging::Weighted,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[0].accuracy, Some(1.0));
        let strip = |r: &AblationRow| AblationRow {
            variant: String::new(),
            ..r.clone()
        };
        assert_eq!(strip(&t.rows[0]), strip(&t.rows[2]));

        assert!(matches!(
            ablate(
                &group,
                &variants[..1],
                &modes,
                &records,
                &gold,
                &MockScorer,
                opts,
                Averaging::Weighted
            ),
            Err(Error::Usage(_))
        ));
        let dup = [v("a", "p", "q"), v("a", "r", "s")];
        assert!(ablate(
            &group,
            &dup,
            &modes,
            &records,
            &gold,
            &MockScorer,
            opts,
            Averaging::Weighted
        )
        .is_err());
    }
}
