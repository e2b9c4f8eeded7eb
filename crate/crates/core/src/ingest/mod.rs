//! Article retrieval, inclusion filtering and corpus persistence.

pub mod eutils;
pub mod ratelimit;
mod record;
mod store;
pub mod xml;

pub use eutils::{EutilsClient, FixtureTransport, HttpTransport, RecordingTransport, Transport};
pub use record::{apply_inclusion, current_year, ArticleRecord, InclusionCriteria, YearRange};
pub use store::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use xml::parse_pubmed_xml;
