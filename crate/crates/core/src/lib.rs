//! Batch literature triage: retrieve PubMed article metadata, classify each
//! article into user-defined category groups with a pluggable zero-shot
//! scorer, evaluate against annotated gold labels, and report category and
//! publication-year trends.

pub mod decision;
pub mod error;
pub mod ingest;
pub mod metrics;
mod net;
pub mod pipeline;
pub mod scorer;
pub mod taxonomy;
pub mod trends;

pub use error::{Error, Result};
pub use net::RetryPolicy;
