use std::collections::HashSet;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARLIEST_YEAR: i32 = 1800;

/// One retrieved article.
///
/// Field order is also the key order of the persisted corpus format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub pmid: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i32,
    pub link: String,
}

impl ArticleRecord {
    pub fn new(
        pmid: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
        year: i32,
    ) -> Self {
        let pmid = pmid.into();
        let link = Self::link_for(&pmid);
        ArticleRecord {
            pmid,
            title: title.into(),
            abstract_text: abstract_text.into(),
            year,
            link,
        }
    }

    pub fn link_for(pmid: &str) -> String {
        format!("https://pubmed.ncbi.nlm.nih.gov/{pmid}/")
    }

    pub fn has_abstract(&self) -> bool {
        !self.abstract_text.trim().is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pmid.trim().is_empty() {
            return Err(Error::Data("record with empty pmid".into()));
        }
        if self.title.trim().is_empty() {
            return Err(Error::Data(format!(
                "record {} has an empty title",
                self.pmid
            )));
        }
        if !year_is_plausible(self.year) {
            return Err(Error::Data(format!(
                "record {} has year {} outside [{EARLIEST_YEAR}, {}]",
                self.pmid,
                self.year,
                current_year()
            )));
        }
        if self.link != Self::link_for(&self.pmid) {
            return Err(Error::Data(format!(
                "record {} has link {:?}, expected {:?}",
                self.pmid,
                self.link,
                Self::link_for(&self.pmid)
            )));
        }
        Ok(())
    }
}

pub fn current_year() -> i32 {
    chrono::Utc::now().year()
}

pub fn year_is_plausible(year: i32) -> bool {
    (EARLIEST_YEAR..=current_year()).contains(&year)
}

/// Inclusive year window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub min: i32,
    pub max: i32,
}

impl YearRange {
    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min > max {
            return Err(Error::Usage(format!("year range {min}..{max} is inverted")));
        }
        Ok(YearRange { min, max })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.min..=self.max).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.min..=self.max
    }
}

/// User-defined filters applied between retrieval and classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionCriteria {
    pub query: String,
    #[serde(default)]
    pub year_range: Option<YearRange>,
    #[serde(default)]
    pub require_abstract: bool,
    pub max_articles: usize,
}

impl InclusionCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.max_articles == 0 {
            return Err(Error::Usage("max_articles must be at least 1".into()));
        }
        if let Some(range) = self.year_range {
            YearRange::new(range.min, range.max)?;
        }
        Ok(())
    }

    pub fn admits(&self, record: &ArticleRecord) -> bool {
        if self.require_abstract && !record.has_abstract() {
            return false;
        }
        match self.year_range {
            Some(range) => range.contains(record.year),
            None => true,
        }
    }
}

/// Deduplicates by pmid (first occurrence wins), drops records the criteria
/// reject, then truncates to `max_articles`. Survivors keep their order.
pub fn apply_inclusion(
    records: &[ArticleRecord],
    criteria: &InclusionCriteria,
) -> Vec<ArticleRecord> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.pmid.as_str()))
        .filter(|r| criteria.admits(r))
        .take(criteria.max_articles)
        .cloned()
        .collect()
}
