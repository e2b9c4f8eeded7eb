//! HTTP client for an NLI scoring sidecar.
//!
//! `POST <endpoint>/score` with a [`ScoreWireRequest`] returns a
//! [`ScoreWireResponse`]; `GET <endpoint>/health` reports readiness.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{excerpt, RetryPolicy};
use crate::scorer::{LabelScores, ScoreRequest, Scorer};

/// Unit-sum tolerance the sidecar guarantees for multiclass responses.
pub const WIRE_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreWireRequest {
    pub text: String,
    pub labels: Vec<String>,
    pub template: String,
    pub multi_label: bool,
}

impl From<&ScoreRequest> for ScoreWireRequest {
    fn from(r: &ScoreRequest) -> Self {
        ScoreWireRequest {
            text: r.text.clone(),
            labels: r.label_phrases.clone(),
            template: r.template.clone(),
            multi_label: r.multi_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreWireResponse {
    pub scores: Vec<f64>,
    pub model_id: String,
    pub latency_ms: f64,
    /// Set by the sidecar when it had to truncate the input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    pub model_id: String,
}

pub struct RemoteScorer {
    client: reqwest::blocking::Client,
    endpoint: String,
    retry: RetryPolicy,
}

impl RemoteScorer {
    /// `endpoint` is the base address, e.g. `http://127.0.0.1:8000`.
    pub fn new(endpoint: &str) -> Result<Self> {
        let url = reqwest::Url::parse(endpoint)
            .map_err(|e| Error::Usage(format!("scorer endpoint {endpoint:?}: {e}")))?;
        if !matches!(url.scheme(), "http" | "https") || url.host().is_none() {
            return Err(Error::Usage(format!(
                "scorer endpoint {endpoint:?} is not an http(s) address"
            )));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| Error::Network(e.to_string()))?;
        Ok(RemoteScorer {
            client,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn health(&self) -> Result<HealthStatus> {
        let url = format!("{}/health", self.endpoint);
        let response = self
            .client
            .get(&url)
            .send()
            .map_err(|e| Error::Network(format!("{url}: {e}")))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| Error::Network(format!("{url}: {e}")))?;
        let health: HealthStatus = serde_json::from_str(&body)
            .map_err(|e| Error::Protocol(format!("{url}: {e}: {}", excerpt(&body))))?;
        if status.is_success() {
            Ok(health)
        } else {
            Err(Error::Network(format!(
                "{url}: HTTP {status} ({})",
                health.status
            )))
        }
    }

    fn post_once(&self, wire: &ScoreWireRequest) -> Result<ScoreWireResponse> {
        let url = format!("{}/score", self.endpoint);
        let response = self
            .client
            .post(&url)
            .json(wire)
            .send()
            .map_err(|e| Error::Network(format!("{url}: {e}")))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| Error::Network(format!("{url}: {e}")))?;
        match status.as_u16() {
            200..=299 => serde_json::from_str(&body)
                .map_err(|e| Error::Protocol(format!("{url}: {e}: {}", excerpt(&body)))),
            429 | 500..=599 => Err(Error::Network(format!("{url}: HTTP {status}"))),
            _ => Err(Error::Protocol(format!(
                "{url}: HTTP {status}: {}",
                excerpt(&body)
            ))),
        }
    }
}

impl Scorer for RemoteScorer {
    fn score_raw(&self, request: &ScoreRequest) -> Result<LabelScores> {
        let wire = ScoreWireRequest::from(request);
        let response = self.retry.run("score", || self.post_once(&wire))?;
        if response.scores.len() != request.label_phrases.len() {
            return Err(Error::Protocol(format!(
                "sidecar returned {} scores for {} labels",
                response.scores.len(),
                request.label_phrases.len()
            )));
        }
        let mut scores = response.scores;
        if !request.multi_label {
            let sum: f64 = scores.iter().sum();
            if (sum - 1.0).abs() > WIRE_SUM_TOLERANCE {
                return Err(Error::Protocol(format!(
                    "sidecar multiclass scores sum to {sum}"
                )));
            }
            // bring float32 rounding within the gateway tolerance
            scores.iter_mut().for_each(|s| *s /= sum);
        }
        Ok(LabelScores(scores))
    }

    fn describe(&self) -> String {
        format!("remote ({})", self.endpoint)
    }
}
