use std::collections::BTreeSet;

use crate::error::Result;
use crate::scorer::{LabelScores, ScoreRequest, Scorer};

/// Words ignored by the mock's overlap count.
pub const STOP_WORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "into", "is",
    "it", "its", "of", "on", "or", "that", "the", "these", "this", "those", "to", "was", "we",
    "were", "with",
];

/// Distinct case-folded word tokens of `text`, stop words removed.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .collect()
}

/// Deterministic token-overlap backend.
///
/// For each phrase, `raw = |tokens(text) ∩ tokens(phrase)| + 0.01`.
/// Multiclass scores are `raw / Σ raw`; multilabel scores are `raw / (raw + 1)`.
/// The hypothesis template does not enter the score.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockScorer;

impl MockScorer {
    pub fn raw(text: &str, phrases: &[String]) -> Vec<f64> {
        let text_tokens = tokens(text);
        phrases
            .iter()
            .map(|p| tokens(p).intersection(&text_tokens).count() as f64 + 0.01)
            .collect()
    }
}

impl Scorer for MockScorer {
    fn score_raw(&self, request: &ScoreRequest) -> Result<LabelScores> {
        let raw = Self::raw(&request.text, &request.label_phrases);
        let scores = if request.multi_label {
            raw.iter().map(|r| r / (r + 1.0)).collect()
        } else {
            let total: f64 = raw.iter().sum();
            raw.iter().map(|r| r / total).collect()
        };
        Ok(LabelScores(scores))
    }

    fn describe(&self) -> String {
        "mock (token overlap)".into()
    }
}
