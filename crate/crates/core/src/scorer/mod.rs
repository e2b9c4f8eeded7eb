//! Uniform access to zero-shot scoring backends.
//!
//! A backend turns a text and a list of label phrases into one probability per
//! phrase. [`score`] and [`score_batch`] check both sides of that contract so
//! downstream code can rely on [`LabelScores`] invariants.

mod mock;
mod remote;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mock::{tokens, MockScorer, STOP_WORDS};
pub use remote::{HealthStatus, RemoteScorer, ScoreWireRequest, ScoreWireResponse};

/// Tolerance on the unit sum of multiclass scores.
pub const UNIT_SUM_TOLERANCE: f64 = 1e-6;
/// Default character budget for scorer input text.
pub const DEFAULT_MAX_CHARS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub text: String,
    pub label_phrases: Vec<String>,
    pub multi_label: bool,
    pub template: String,
}

impl ScoreRequest {
    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Data("score request with empty text".into()));
        }
        if self.label_phrases.len() < 2 {
            return Err(Error::Data(format!(
                "score request needs at least 2 label phrases, got {}",
                self.label_phrases.len()
            )));
        }
        if self.template.matches("{}").count() != 1 {
            return Err(Error::Data(format!(
                "template {:?} must contain exactly one {{}}",
                self.template
            )));
        }
        Ok(())
    }
}

/// Per-label probabilities aligned with the request's label phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelScores(pub Vec<f64>);

impl LabelScores {
    pub fn new(scores: Vec<f64>) -> Self {
        LabelScores(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Checks range, and unit sum when `multi_label` is false.
    pub fn validate(&self, multi_label: bool) -> Result<()> {
        if let Some(bad) = self.0.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Protocol(format!("score {bad} outside [0, 1]")));
        }
        if !multi_label && (self.sum() - 1.0).abs() > UNIT_SUM_TOLERANCE {
            return Err(Error::Protocol(format!(
                "multiclass scores sum to {}, expected 1",
                self.sum()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for LabelScores {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub trait Scorer: Send + Sync {
    /// Backend-specific scoring; callers go through [`score`].
    fn score_raw(&self, request: &ScoreRequest) -> Result<LabelScores>;

    /// Identifies the backend in reports.
    fn describe(&self) -> String;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score_raw(&self, request: &ScoreRequest) -> Result<LabelScores> {
        (**self).score_raw(request)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score_raw(&self, request: &ScoreRequest) -> Result<LabelScores> {
        (**self).score_raw(request)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Scores one request, validating the request and the backend's answer.
pub fn score(scorer: &dyn Scorer, request: &ScoreRequest) -> Result<LabelScores> {
    request.validate()?;
    let scores = scorer.score_raw(request)?;
    if scores.len() != request.label_phrases.len() {
        return Err(Error::Protocol(format!(
            "backend returned {} scores for {} labels",
            scores.len(),
            request.label_phrases.len()
        )));
    }
    scores.validate(request.multi_label)?;
    Ok(scores)
}

/// Scores `requests` with at most `parallelism` in flight.
///
/// Results are in input order. All requests are validated before any is sent;
/// the first failure (lowest index) aborts the batch and is reported with its
/// index.
pub fn score_batch(
    scorer: &dyn Scorer,
    requests: &[ScoreRequest],
    parallelism: usize,
) -> Result<Vec<LabelScores>> {
    if parallelism == 0 {
        return Err(Error::Usage("parallelism must be at least 1".into()));
    }
    for (index, request) in requests.iter().enumerate() {
        request.validate().map_err(|e| Error::Batch {
            index,
            source: Box::new(e),
        })?;
    }
    if parallelism == 1 {
        return requests
            .iter()
            .enumerate()
            .map(|(index, r)| {
                score(scorer, r).map_err(|e| Error::Batch {
                    index,
                    source: Box::new(e),
                })
            })
            .collect();
    }

    let slots: Vec<Mutex<Option<Result<LabelScores>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    thread::scope(|s| {
        for _ in 0..parallelism.min(requests.len()) {
            s.spawn(|| {
                while !failed.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(request) = requests.get(i) else {
                        break;
                    };
                    let outcome = score(scorer, request);
                    if outcome.is_err() {
                        failed.store(true, Ordering::SeqCst);
                    }
                    *slots[i].lock().unwrap() = Some(outcome);
                }
            });
        }
    });

    let mut out = Vec::with_capacity(requests.len());
    let mut first_missing = None;
    for (index, slot) in slots.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(scores)) => out.push(scores),
            Some(Err(e)) => {
                return Err(Error::Batch {
                    index,
                    source: Box::new(e),
                })
            }
            None => {
                first_missing.get_or_insert(index);
            }
        }
    }
    match first_missing {
        // only reachable if a later element failed after this one was skipped
        Some(index) => Err(Error::Batch {
            index,
            source: Box::new(Error::Data("not scored".into())),
        }),
        None => Ok(out),
    }
}

/// Cuts `text` to at most `max_chars` characters, backing off to the last
/// word boundary when the cut lands inside a word.
pub fn truncate_at_word(text: &str, max_chars: usize) -> &str {
    if text.chars().count() <= max_chars {
        return text;
    }
    let cut = text
        .char_indices()
        .nth(max_chars)
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let head = &text[..cut];
    let next_is_space = text[cut..].chars().next().is_none_or(char::is_whitespace);
    let head = if next_is_space {
        head
    } else {
        match head.rfind(char::is_whitespace) {
            Some(i) => &head[..i],
            None => head,
        }
    };
    head.trim_end()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(text: &str) -> ScoreRequest {
        ScoreRequest {
            text: text.into(),
            label_phrases: vec!["alpha".into(), "beta".into()],
            multi_label: false,
            template: "This example is about {}.".into(),
        }
    }

    struct Fixed(Vec<f64>);
    impl Scorer for Fixed {
        fn score_raw(&self, _: &ScoreRequest) -> Result<LabelScores> {
            Ok(LabelScores(self.0.clone()))
        }
        fn describe(&self) -> String {
            "fixed".into()
        }
    }

    #[test]
    fn request_validation() {
        assert!(request("t").validate().is_ok());
        assert!(request(" ").validate().is_err());
        let mut r = request("t");
        r.label_phrases.pop();
        assert!(r.validate().is_err());
        let mut r = request("t");
        r.template = "{} {}".into();
        assert!(r.validate().is_err());
        r.template = "none".into();
        assert!(r.validate().is_err());
    }

    #[test]
    fn wrong_length_is_a_protocol_error() {
        let err = score(&Fixed(vec![1.0]), &request("t")).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }

    #[test]
    fn out_of_range_or_unnormalized_rejected() {
        assert!(score(&Fixed(vec![0.7, 0.7]), &request("t")).is_err());
        assert!(score(&Fixed(vec![1.2, -0.2]), &request("t")).is_err());
        let mut r = request("t");
        r.multi_label = true;
        assert!(score(&Fixed(vec![0.7, 0.7]), &r).is_ok());
    }

    #[test]
    fn batch_reports_malformed_index() {
        let mut requests: Vec<_> = (0..5).map(|i| request(&format!("text {i}"))).collect();
        requests[3].text.clear();
        match score_batch(&MockScorer, &requests, 2) {
            Err(Error::Batch { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn batch_reports_backend_failure_index() {
        struct FailOn(&'static str);
        impl Scorer for FailOn {
            fn score_raw(&self, r: &ScoreRequest) -> Result<LabelScores> {
                if r.text == self.0 {
                    Err(Error::Protocol("boom".into()))
                } else {
                    Ok(LabelScores(vec![0.5, 0.5]))
                }
            }
            fn describe(&self) -> String {
                "fail".into()
            }
        }
        let requests: Vec<_> = (0..20).map(|i| request(&format!("t{i}"))).collect();
        for parallelism in [1, 4] {
            match score_batch(&FailOn("t7"), &requests, parallelism) {
                Err(Error::Batch { index, source }) => {
                    assert_eq!(index, 7);
                    assert!(matches!(*source, Error::Protocol(_)));
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn zero_parallelism_rejected() {
        assert!(matches!(
            score_batch(&MockScorer, &[], 0),
            Err(Error::Usage(_))
        ));
        assert!(score_batch(&MockScorer, &[], 3).unwrap().is_empty());
    }

    #[test]
    fn truncation_respects_words() {
        assert_eq!(truncate_at_word("short text", 100), "short text");
        assert_eq!(truncate_at_word("hello world again", 13), "hello world");
        assert_eq!(truncate_at_word("hello world again", 11), "hello world");
        assert_eq!(truncate_at_word("hello world again", 12), "hello world");
        assert_eq!(truncate_at_word("abcdefgh", 4), "abcd");
        assert_eq!(truncate_at_word("ééé ééé", 5), "ééé");
    }
}
