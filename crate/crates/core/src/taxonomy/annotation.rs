use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{CategoryGroup, Mode};

/// One annotator's assignment for one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub annotator: String,
    pub labels: Vec<String>,
}

/// All votes cast for one record within one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    pub pmid: String,
    pub group: String,
    pub votes: Vec<Vote>,
}

impl AnnotationSet {
    pub fn validate(&self, group: &CategoryGroup) -> Result<()> {
        let fail = |why: String| {
            Err(Error::Data(format!(
                "annotations for {} in {:?}: {why}",
                self.pmid, self.group
            )))
        };
        if self.votes.is_empty() {
            return fail("no annotators".into());
        }
        let mut annotators = HashSet::new();
        for vote in &self.votes {
            if !annotators.insert(vote.annotator.as_str()) {
                return fail(format!("annotator {:?} voted twice", vote.annotator));
            }
            if group.mode == Mode::Multiclass && vote.labels.len() != 1 {
                return fail(format!(
                    "annotator {:?} assigned {} labels in a multiclass group",
                    vote.annotator,
                    vote.labels.len()
                ));
            }
            for label in &vote.labels {
                if group.label_index(label).is_none() {
                    return fail(format!("unknown label {label:?}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldStatus {
    Resolved,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub pmid: String,
    pub group: String,
    /// One label (multiclass) or the majority set (multilabel), in group order.
    pub labels: Vec<String>,
    pub status: GoldStatus,
    /// Labels that caused the tie.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tied: Vec<String>,
}

impl GoldLabel {
    pub fn is_resolved(&self) -> bool {
        self.status == GoldStatus::Resolved
    }
}

/// Resolves votes into a gold label.
///
/// Multiclass: the label with a strict plurality wins; a shared maximum is a
/// tie and no label is chosen. Multilabel: a label is gold iff more than half
/// of the annotators chose it; exactly half marks the record tied on that
/// label and leaves the label out.
pub fn majority_vote(annotations: &AnnotationSet, group: &CategoryGroup) -> GoldLabel {
    let mut counts = vec![0usize; group.len()];
    for vote in &annotations.votes {
        let chosen: HashSet<&str> = vote.labels.iter().map(String::as_str).collect();
        for label in chosen {
            if let Some(i) = group.label_index(label) {
                counts[i] += 1;
            }
        }
    }
    let name = |i: usize| group.labels[i].name.clone();

    let (labels, tied) = match group.mode {
        Mode::Multiclass => {
            let top = counts.iter().copied().max().unwrap_or(0);
            let leaders: Vec<usize> = (0..counts.len())
                .filter(|&i| counts[i] == top && top > 0)
                .collect();
            match leaders.as_slice() {
                [winner] => (vec![name(*winner)], vec![]),
                _ => (vec![], leaders.into_iter().map(name).collect()),
            }
        }
        Mode::Multilabel => {
            let n = annotations.votes.len();
            let labels = (0..counts.len())
                .filter(|&i| 2 * counts[i] > n)
                .map(name)
                .collect();
            let tied = (0..counts.len())
                .filter(|&i| 2 * counts[i] == n)
                .map(name)
                .collect();
            (labels, tied)
        }
    };

    let status = match group.mode {
        Mode::Multiclass if labels.is_empty() => GoldStatus::Tie,
        _ if !tied.is_empty() => GoldStatus::Tie,
        _ => GoldStatus::Resolved,
    };
    GoldLabel {
        pmid: annotations.pmid.clone(),
        group: annotations.group.clone(),
        labels,
        status,
        tied,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationLine {
    pmid: String,
    group: String,
    annotator: String,
    labels: Vec<String>,
}

/// Reads line-delimited annotations (`pmid`, `group`, `annotator`, `labels`)
/// and groups them per (pmid, group) in order of first appearance.
///
/// Sets for groups not in `groups` are rejected; each set is validated.
pub fn read_annotations<R: BufRead>(
    input: R,
    origin: &Path,
    groups: &[CategoryGroup],
) -> Result<Vec<AnnotationSet>> {
    let by_name: HashMap<&str, &CategoryGroup> =
        groups.iter().map(|g| (g.name.as_str(), g)).collect();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut sets: Vec<AnnotationSet> = Vec::new();

    for (i, line) in input.lines().enumerate() {
        let at = |message: String| Error::Line {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| at(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: AnnotationLine = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        if !by_name.contains_key(parsed.group.as_str()) {
            return Err(at(format!("unknown group {:?}", parsed.group)));
        }
        let key = (parsed.pmid.clone(), parsed.group.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            sets.push(AnnotationSet {
                pmid: parsed.pmid.clone(),
                group: parsed.group.clone(),
                votes: Vec::new(),
            });
            sets.len() - 1
        });
        sets[slot].votes.push(Vote {
            annotator: parsed.annotator,
            labels: parsed.labels,
        });
    }

    for set in &sets {
        set.validate(by_name[set.group.as_str()])?;
    }
    Ok(sets)
}

pub fn load_annotations(path: &Path, groups: &[CategoryGroup]) -> Result<Vec<AnnotationSet>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotations(BufReader::new(file), path, groups)
}

/// Majority-votes every set, keyed by group name then pmid.
pub fn resolve_gold(
    sets: &[AnnotationSet],
    groups: &[CategoryGroup],
) -> BTreeMap<String, BTreeMap<String, GoldLabel>> {
    let mut out: BTreeMap<String, BTreeMap<String, GoldLabel>> = BTreeMap::new();
    for set in sets {
        if let Some(group) = groups.iter().find(|g| g.name == set.group) {
            out.entry(set.group.clone())
                .or_default()
                .insert(set.pmid.clone(), majority_vote(set, group));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(votes: &[&[&str]]) -> AnnotationSet {
        AnnotationSet {
            pmid: "1".into(),
            group: "G".into(),
            votes: votes
                .iter()
                .enumerate()
                .map(|(i, labels)| Vote {
                    annotator: format!("a{i}"),
                    labels: labels.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn multiclass_strict_majority() {
        let g = CategoryGroup::simple("G", Mode::Multiclass, &["A", "B", "C"]);
        let gold = majority_vote(&set(&[&["A"], &["A"], &["B"]]), &g);
        assert_eq!(gold.labels, ["A"]);
        assert_eq!(gold.status, GoldStatus::Resolved);
    }

    #[test]
    fn multiclass_three_way_tie() {
        let g = CategoryGroup::simple("G", Mode::Multiclass, &["A", "B", "C"]);
        let gold = majority_vote(&set(&[&["A"], &["B"], &["C"]]), &g);
        assert_eq!(gold.status, GoldStatus::Tie);
        assert!(gold.labels.is_empty());
        assert_eq!(gold.tied, ["A", "B", "C"]);
    }

    #[test]
    fn multilabel_more_than_half() {
        let g = CategoryGroup::simple("G", Mode::Multilabel, &["X", "Y", "Z"]);
        let gold = majority_vote(&set(&[&["X", "Y"], &["X"], &[]]), &g);
        assert_eq!(gold.labels, ["X"]);
        assert_eq!(gold.status, GoldStatus::Resolved);
    }

    #[test]
    fn multilabel_exact_half_is_a_tie() {
        let g = CategoryGroup::simple("G", Mode::Multilabel, &["X", "Y"]);
        let gold = majority_vote(&set(&[&["X", "Y"], &["X"]]), &g);
        assert_eq!(gold.labels, ["X"]);
        assert_eq!(gold.tied, ["Y"]);
        assert_eq!(gold.status, GoldStatus::Tie);
    }

    #[test]
    fn reads_and_validates_annotation_lines() {
        let groups = vec![CategoryGroup::simple("G", Mode::Multiclass, &["A", "B"])];
        let text = r#"{"pmid":"1","group":"G","annotator":"x","labels":["A"]}
{"pmid":"2","group":"G","annotator":"x","labels":["B"]}
{"pmid":"1","group":"G","annotator":"y","labels":["A"]}
"#;
        let sets = read_annotations(text.as_bytes(), Path::new("a"), &groups).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].votes.len(), 2);

        let bad_label = r#"{"pmid":"1","group":"G","annotator":"x","labels":["Q"]}"#;
        assert!(read_annotations(bad_label.as_bytes(), Path::new("a"), &groups).is_err());
        let two_labels = r#"{"pmid":"1","group":"G","annotator":"x","labels":["A","B"]}"#;
        assert!(read_annotations(two_labels.as_bytes(), Path::new("a"), &groups).is_err());
        let repeat =
            "{\"pmid\":\"1\",\"group\":\"G\",\"annotator\":\"x\",\"labels\":[\"A\"]}\n".repeat(2);
        assert!(read_annotations(repeat.as_bytes(), Path::new("a"), &groups).is_err());
        let unknown_group = r#"{"pmid":"1","group":"H","annotator":"x","labels":["A"]}"#;
        assert!(matches!(
            read_annotations(unknown_group.as_bytes(), Path::new("a"), &groups),
            Err(Error::Line { line: 1, .. })
        ));
    }
}
