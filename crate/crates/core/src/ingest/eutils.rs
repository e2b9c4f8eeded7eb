//! NCBI E-utilities client (`esearch` for ids, `efetch` for records).
//!
//! Requests go through a [`Transport`]: live HTTP with rate limiting and
//! retries, replay from a fixture directory, or live HTTP that records every
//! response into a fixture directory.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ingest::ratelimit::{RateLimiter, EUTILS_RATE_ANONYMOUS, EUTILS_RATE_WITH_KEY};
use crate::ingest::xml::parse_pubmed_xml;
use crate::ingest::{ArticleRecord, YearRange};
use crate::net::{excerpt, RetryPolicy};

pub const EUTILS_BASE_URL: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
/// Environment variable holding the optional NCBI API key.
pub const API_KEY_ENV: &str = "NCBI_API_KEY";
/// esearch refuses `retmax` above this.
const ESEARCH_MAX_RETMAX: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    ESearch,
    EFetch,
}

impl Endpoint {
    fn script(self) -> &'static str {
        match self {
            Endpoint::ESearch => "esearch.fcgi",
            Endpoint::EFetch => "efetch.fcgi",
        }
    }
}

pub type Params = Vec<(&'static str, String)>;

pub trait Transport: Send + Sync {
    fn get(&self, endpoint: Endpoint, params: &Params) -> Result<String>;
}

/// Live HTTPS transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl HttpTransport {
    pub fn new(api_key: Option<String>) -> Result<Self> {
        Self::with_base_url(EUTILS_BASE_URL, api_key)
    }

    pub fn with_base_url(base_url: &str, api_key: Option<String>) -> Result<Self> {
        let rate = if api_key.is_some() {
            EUTILS_RATE_WITH_KEY
        } else {
            EUTILS_RATE_ANONYMOUS
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent(concat!("litscan/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Network(e.to_string()))?;
        Ok(HttpTransport {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            limiter: RateLimiter::per_second(rate),
            retry: RetryPolicy::default(),
        })
    }

    /// Reads the API key from [`API_KEY_ENV`] when set.
    pub fn from_env() -> Result<Self> {
        Self::new(std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }

    pub fn with_rate_limit(mut self, requests_per_second: f64) -> Self {
        self.limiter = RateLimiter::per_second(requests_per_second);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn get_once(&self, url: &str, params: &Params) -> Result<String> {
        self.limiter.acquire();
        let mut query = params.clone();
        if let Some(key) = &self.api_key {
            query.push(("api_key", key.clone()));
        }
        let response = self
            .client
            .get(url)
            .query(&query)
            .send()
            .map_err(|e| Error::Network(format!("{url}: {e}")))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| Error::Network(format!("{url}: reading body: {e}")))?;
        if status.is_success() {
            Ok(body)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(Error::Network(format!("{url}: HTTP {status}")))
        } else {
            Err(Error::Protocol(format!(
                "{url}: HTTP {status}: {}",
                excerpt(&body)
            )))
        }
    }
}

impl Transport for HttpTransport {
    fn get(&self, endpoint: Endpoint, params: &Params) -> Result<String> {
        let url = format!("{}/{}", self.base_url, endpoint.script());
        self.retry
            .run(endpoint.script(), || self.get_once(&url, params))
    }
}

/// Fixture file name for a request: `esearch.json`, or
/// `efetch-<first pmid>-<count>.xml` for a fetch batch.
pub fn fixture_name(endpoint: Endpoint, params: &Params) -> String {
    match endpoint {
        Endpoint::ESearch => "esearch.json".to_string(),
        Endpoint::EFetch => {
            let ids = params
                .iter()
                .find(|(k, _)| *k == "id")
                .map(|(_, v)| v.as_str())
                .unwrap_or("");
            let first = ids.split(',').next().unwrap_or("");
            let count = ids.split(',').filter(|s| !s.is_empty()).count();
            format!("efetch-{first}-{count}.xml")
        }
    }
}

/// Offline replay of recorded responses.
///
/// A fetch batch without its own fixture falls back to `efetch.xml`; records
/// not requested are dropped by the client.
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(Error::Usage(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        Ok(FixtureTransport { dir })
    }
}

impl Transport for FixtureTransport {
    fn get(&self, endpoint: Endpoint, params: &Params) -> Result<String> {
        let mut candidates = vec![self.dir.join(fixture_name(endpoint, params))];
        if endpoint == Endpoint::EFetch {
            candidates.push(self.dir.join("efetch.xml"));
        }
        for path in &candidates {
            if path.is_file() {
                debug!("replaying {}", path.display());
                return fs::read_to_string(path).map_err(|e| Error::io(path, e));
            }
        }
        Err(Error::Data(format!(
            "no fixture for {} in {} (looked for {})",
            endpoint.script(),
            self.dir.display(),
            candidates
                .iter()
                .map(|p| p
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned())
                .collect::<Vec<_>>()
                .join(", ")
        )))
    }
}

/// Forwards to another transport and saves each response as a fixture.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(RecordingTransport { inner, dir })
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, endpoint: Endpoint, params: &Params) -> Result<String> {
        let body = self.inner.get(endpoint, params)?;
        let path = self.dir.join(fixture_name(endpoint, params));
        fs::write(&path, &body).map_err(|e| Error::io(&path, e))?;
        Ok(body)
    }
}

pub struct EutilsClient {
    transport: Box<dyn Transport>,
    batch_size: usize,
    max_in_flight: usize,
}

impl EutilsClient {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        EutilsClient {
            transport,
            batch_size: 200,
            max_in_flight: 3,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_max_in_flight(mut self, max_in_flight: usize) -> Self {
        self.max_in_flight = max_in_flight.max(1);
        self
    }

    /// Pmids matching `query`, in relevance order, deduplicated, at most `max_results`.
    pub fn search_articles(
        &self,
        query: &str,
        max_results: usize,
        year_range: Option<YearRange>,
    ) -> Result<Vec<String>> {
        if query.trim().is_empty() {
            return Err(Error::Usage("search query is empty".into()));
        }
        if max_results == 0 {
            return Err(Error::Usage("max_results must be at least 1".into()));
        }
        let mut params: Params = vec![
            ("db", "pubmed".into()),
            ("term", query.to_string()),
            ("retmax", max_results.min(ESEARCH_MAX_RETMAX).to_string()),
            ("retmode", "json".into()),
        ];
        if let Some(range) = year_range {
            params.push(("datetype", "pdat".into()));
            params.push(("mindate", range.min.to_string()));
            params.push(("maxdate", range.max.to_string()));
        }
        let body = self.transport.get(Endpoint::ESearch, &params)?;
        let mut ids = parse_esearch_json(&body)?;
        let mut seen = HashSet::new();
        ids.retain(|id| seen.insert(id.clone()));
        ids.truncate(max_results);
        Ok(ids)
    }

    /// Records for `pmids`, in input order. Unknown pmids are omitted with a warning.
    pub fn fetch_records(&self, pmids: &[String]) -> Result<Vec<ArticleRecord>> {
        if pmids.is_empty() {
            return Err(Error::Usage("no pmids to fetch".into()));
        }
        let batches: Vec<&[String]> = pmids.chunks(self.batch_size).collect();
        let results: Vec<Mutex<Option<Result<Vec<ArticleRecord>>>>> =
            batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.max_in_flight.min(batches.len());

        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(i) else { break };
                    let outcome = self.fetch_batch(batch);
                    let failed = outcome.is_err();
                    *results[i].lock().unwrap() = Some(outcome);
                    if failed {
                        next.store(batches.len(), Ordering::SeqCst);
                    }
                });
            }
        });

        let mut by_pmid: HashMap<String, ArticleRecord> = HashMap::new();
        for slot in results {
            match slot.into_inner().unwrap() {
                Some(Ok(records)) => {
                    for r in records {
                        by_pmid.entry(r.pmid.clone()).or_insert(r);
                    }
                }
                Some(Err(e)) => return Err(e),
                None => {}
            }
        }

        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(by_pmid.len());
        for pmid in pmids {
            if !seen.insert(pmid) {
                continue;
            }
            match by_pmid.remove(pmid) {
                Some(r) => out.push(r),
                None => warn!("pmid {pmid}: not returned by efetch, omitted"),
            }
        }
        Ok(out)
    }

    fn fetch_batch(&self, batch: &[String]) -> Result<Vec<ArticleRecord>> {
        let params: Params = vec![
            ("db", "pubmed".into()),
            ("id", batch.join(",")),
            ("retmode", "xml".into()),
        ];
        let name = fixture_name(Endpoint::EFetch, &params);
        let body = self.transport.get(Endpoint::EFetch, &params)?;
        let requested: HashSet<&str> = batch.iter().map(String::as_str).collect();
        let mut records = parse_pubmed_xml(&body, &name)?;
        records.retain(|r| requested.contains(r.pmid.as_str()));
        Ok(records)
    }
}

pub fn parse_esearch_json(body: &str) -> Result<Vec<String>> {
    let malformed = |why: &str| Error::Protocol(format!("esearch: {why}: {}", excerpt(body)));
    let value: Value = serde_json::from_str(body).map_err(|e| malformed(&e.to_string()))?;
    let result = value
        .get("esearchresult")
        .ok_or_else(|| malformed("missing esearchresult"))?;
    if let Some(err) = result.get("ERROR") {
        return Err(malformed(&format!("service error {err}")));
    }
    let list = result
        .get("idlist")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing idlist"))?;
    list.iter()
        .map(|v| {
            v.as_str()
                .filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
                .map(str::to_string)
                .ok_or_else(|| malformed(&format!("bad id {v}")))
        })
        .collect()
}

/// Whether `dir` looks like a fixture directory (has a recorded search).
pub fn is_fixture_dir(dir: &Path) -> bool {
    dir.join("esearch.json").is_file()
}
