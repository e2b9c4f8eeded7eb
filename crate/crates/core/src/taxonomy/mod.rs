//! Category groups, taxonomy loading and gold-label aggregation.

mod annotation;
mod split;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::ThresholdConfig;
use crate::error::{Error, Result};

pub use annotation::{
    load_annotations, majority_vote, read_annotations, resolve_gold, AnnotationSet, GoldLabel,
    GoldStatus, Vote,
};
pub use split::{split_labeled_corpus, Split};

/// The hypothesis template used when a group does not set its own.
pub const DEFAULT_TEMPLATE: &str = "This example is about {}.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Multiclass,
    Multilabel,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Multiclass => "multiclass",
            Mode::Multilabel => "multilabel",
        })
    }
}

/// How a multilabel group is scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One request over all labels, independent per-label probabilities.
    #[default]
    Flat,
    /// One binary label-vs-not-label request per label.
    Hierarchical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    /// Descriptive phrases sent to the scorer. The canonical `name` is what reports show.
    pub phrasings: Vec<String>,
    /// Negative-class phrase for hierarchical scoring; defaults to "not " + first phrasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative: Option<String>,
}

impl Label {
    pub fn negative_phrase(&self) -> String {
        match &self.negative {
            Some(n) => n.clone(),
            None => format!("not {}", self.phrasings[0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryGroup {
    pub name: String,
    pub mode: Mode,
    #[serde(rename = "label")]
    pub labels: Vec<Label>,
    #[serde(default = "default_template")]
    pub template: String,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
}

fn default_template() -> String {
    DEFAULT_TEMPLATE.to_string()
}

impl CategoryGroup {
    /// A group with one phrasing per label equal to its name.
    pub fn simple(name: &str, mode: Mode, labels: &[&str]) -> Self {
        CategoryGroup {
            name: name.to_string(),
            mode,
            labels: labels
                .iter()
                .map(|l| Label {
                    name: l.to_string(),
                    phrasings: vec![l.to_string()],
                    negative: None,
                })
                .collect(),
            template: default_template(),
            strategy: Strategy::Flat,
            thresholds: ThresholdConfig::default(),
        }
    }

    pub fn label_names(&self) -> Vec<&str> {
        self.labels.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Same group with each label scored by exactly one replacement phrase.
    pub fn with_phrases(&self, phrases: &[String]) -> Result<Self> {
        if phrases.len() != self.labels.len() {
            return Err(Error::Data(format!(
                "group {:?}: {} phrases given for {} labels",
                self.name,
                phrases.len(),
                self.labels.len()
            )));
        }
        let mut group = self.clone();
        for (label, phrase) in group.labels.iter_mut().zip(phrases) {
            label.phrasings = vec![phrase.clone()];
        }
        group.validate()?;
        Ok(group)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |why: String| Err(Error::Data(format!("group {:?}: {why}", self.name)));
        if self.name.trim().is_empty() {
            return Err(Error::Data("group with an empty name".into()));
        }
        if self.labels.len() < 2 {
            return fail(format!(
                "needs at least 2 labels, has {}",
                self.labels.len()
            ));
        }
        let mut seen = HashSet::new();
        for label in &self.labels {
            if label.name.trim().is_empty() {
                return fail("empty label name".into());
            }
            if !seen.insert(label.name.as_str()) {
                return fail(format!("duplicate label {:?}", label.name));
            }
            if label.phrasings.is_empty() || label.phrasings.iter().any(|p| p.trim().is_empty()) {
                return fail(format!("label {:?} has no usable phrasing", label.name));
            }
        }
        if self.template.matches("{}").count() != 1 {
            return fail(format!(
                "template {:?} must contain exactly one {{}}",
                self.template
            ));
        }
        if self.strategy == Strategy::Hierarchical && self.mode != Mode::Multilabel {
            return fail("hierarchical strategy applies to multilabel groups only".into());
        }
        self.thresholds
            .validate()
            .map_err(|e| Error::Data(format!("group {:?}: {e}", self.name)))?;
        for name in self.thresholds.per_label.keys() {
            if self.label_index(name).is_none() {
                return fail(format!("threshold for unknown label {name:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyDocument {
    #[serde(default = "one")]
    version: u32,
    #[serde(rename = "group", default)]
    groups: Vec<CategoryGroup>,
}

fn one() -> u32 {
    1
}

/// Parses a TOML taxonomy and validates every group.
pub fn parse_taxonomy(text: &str) -> Result<Vec<CategoryGroup>> {
    let doc: TaxonomyDocument =
        toml::from_str(text).map_err(|e| Error::Data(format!("taxonomy: {e}")))?;
    if doc.version != 1 {
        return Err(Error::Data(format!(
            "taxonomy: unsupported version {}",
            doc.version
        )));
    }
    if doc.groups.is_empty() {
        return Err(Error::Data("taxonomy defines no groups".into()));
    }
    let mut names = HashSet::new();
    for group in &doc.groups {
        group.validate()?;
        if !names.insert(group.name.as_str()) {
            return Err(Error::Data(format!("group {:?} defined twice", group.name)));
        }
    }
    Ok(doc.groups)
}

pub fn load_taxonomy(path: &Path) -> Result<Vec<CategoryGroup>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_taxonomy(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARTICLE_GROUPS: &str = r#"
version = 1

[[group]]
name = "Article Type"
mode = "multiclass"

[[group.label]]
name = "Clinical"
phrasings = ["Clinical Finding based on humans"]

[[group.label]]
name = "Experimental"
phrasings = ["Experimental Study based on animals"]

[[group.label]]
name = "Automated Model"
phrasings = ["Technical study based on Automated Model"]

[[group]]
name = "Clinical Studies Sub-Class"
mode = "multilabel"
strategy = "hierarchical"
thresholds = { default = 0.5, per_label = { Screening = 0.4 } }

[[group.label]]
name = "Screening"
phrasings = ["Screening"]
negative = "no screening"

[[group.label]]
name = "Diagnosis"
phrasings = ["Diagnosis"]

[[group.label]]
name = "Prognosis"
phrasings = ["Prognosis"]

[[group.label]]
name = "Etiology"
phrasings = ["Etiology"]

[[group.label]]
name = "Management"
phrasings = ["Management"]
"#;

    #[test]
    fn loads_article_type_and_clinical_subclass() {
        let groups = parse_taxonomy(ARTICLE_GROUPS).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].mode, Mode::Multiclass);
        assert_eq!(
            groups[0].label_names(),
            ["Clinical", "Experimental", "Automated Model"]
        );
        assert_eq!(groups[0].template, DEFAULT_TEMPLATE);
        assert_eq!(groups[1].mode, Mode::Multilabel);
        assert_eq!(groups[1].len(), 5);
        assert_eq!(groups[1].strategy, Strategy::Hierarchical);
        assert_eq!(groups[1].labels[0].negative_phrase(), "no screening");
        assert_eq!(groups[1].labels[1].negative_phrase(), "not Diagnosis");
        assert_eq!(
            groups[1].thresholds.resolve(&groups[1].label_names()),
            [0.4, 0.5, 0.5, 0.5, 0.5]
        );
    }

    fn expect_rejected(text: &str, needle: &str) {
        let err = parse_taxonomy(text).unwrap_err().to_string();
        assert!(err.contains(needle), "{err}");
    }

    #[test]
    fn single_label_group_rejected() {
        expect_rejected(
            r#"[[group]]
name = "Solo"
mode = "multiclass"
[[group.label]]
name = "A"
phrasings = ["a"]
"#,
            "Solo",
        );
    }

    #[test]
    fn duplicate_labels_and_empty_phrasings_rejected() {
        expect_rejected(
            r#"[[group]]
name = "Dup"
mode = "multiclass"
[[group.label]]
name = "A"
phrasings = ["a"]
[[group.label]]
name = "A"
phrasings = ["b"]
"#,
            "duplicate label",
        );
        expect_rejected(
            r#"[[group]]
name = "Bare"
mode = "multilabel"
[[group.label]]
name = "A"
phrasings = []
[[group.label]]
name = "B"
phrasings = ["b"]
"#,
            "Bare",
        );
    }

    #[test]
    fn template_and_threshold_checks() {
        let mut g = CategoryGroup::simple("G", Mode::Multilabel, &["A", "B"]);
        g.template = "no placeholder".into();
        assert!(g.validate().is_err());
        g.template = "{} and {}".into();
        assert!(g.validate().is_err());
        g.template = DEFAULT_TEMPLATE.into();
        g.thresholds.default = 1.0;
        assert!(g.validate().is_err());
        g.thresholds.default = 0.5;
        g.thresholds.per_label.insert("C".into(), 0.3);
        assert!(g.validate().is_err());
    }

    #[test]
    fn hierarchical_multiclass_rejected() {
        let mut g = CategoryGroup::simple("G", Mode::Multiclass, &["A", "B"]);
        g.strategy = Strategy::Hierarchical;
        assert!(g.validate().is_err());
    }

    #[test]
    fn phrase_replacement() {
        let g = CategoryGroup::simple("G", Mode::Multiclass, &["A", "B"]);
        let h = g.with_phrases(&["alpha".into(), "beta".into()]).unwrap();
        assert_eq!(h.labels[1].phrasings, ["beta"]);
        assert_eq!(h.labels[1].name, "B");
        assert!(g.with_phrases(&["x".into()]).is_err());
    }
}
