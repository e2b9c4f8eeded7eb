//! Category-wise and year-wise counts over classified records, stage timing,
//! and the final report bundle.

mod csv_io;
mod report;
mod svg;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::decision::Decision;
use crate::error::{Error, Result};
use crate::ingest::{ArticleRecord, YearRange};
use crate::taxonomy::{CategoryGroup, Mode};

pub use csv_io::{
    read_category_csv, read_time_csv, read_timings_csv, write_category_csv, write_time_csv,
    write_timings_csv, TimingRow,
};
pub use report::{render_report, slug, ReportBundle, ReportInput, TIMESTAMP_PREFIX};
pub use svg::{category_chart, time_chart};

/// Bin for multilabel records that received no label.
pub const UNASSIGNED: &str = "unassigned";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendAxis {
    Category,
    Year,
}

impl fmt::Display for TrendAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrendAxis::Category => "category",
            TrendAxis::Year => "year",
        })
    }
}

/// Count matrix `counts[bin][category]`.
///
/// A category-axis series has a single bin; a year-axis series has one bin per
/// consecutive year.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub group: String,
    pub axis: TrendAxis,
    pub bins: Vec<String>,
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl TrendSeries {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, bin: usize) -> u64 {
        self.counts[bin].iter().sum()
    }

    pub fn category_total(&self, category: usize) -> u64 {
        self.counts.iter().map(|row| row[category]).sum()
    }

    pub fn count(&self, bin: &str, category: &str) -> Option<u64> {
        let b = self.bins.iter().position(|x| x == bin)?;
        let c = self.categories.iter().position(|x| x == category)?;
        Some(self.counts[b][c])
    }
}

/// Output categories of a group: its labels, plus [`UNASSIGNED`] for multilabel groups.
pub fn trend_categories(group: &CategoryGroup) -> Vec<String> {
    let mut cats: Vec<String> = group.labels.iter().map(|l| l.name.clone()).collect();
    if group.mode == Mode::Multilabel {
        cats.push(UNASSIGNED.to_string());
    }
    cats
}

fn tally(decision: &Decision, group: &CategoryGroup, row: &mut [u64]) -> Result<()> {
    if decision.group != group.name {
        return Err(Error::Data(format!(
            "decision for {} belongs to {:?}, not {:?}",
            decision.pmid, decision.group, group.name
        )));
    }
    if decision.labels.is_empty() {
        match group.mode {
            Mode::Multilabel => row[group.len()] += 1,
            Mode::Multiclass => {
                return Err(Error::Data(format!(
                    "multiclass decision for {} has no label",
                    decision.pmid
                )))
            }
        }
    }
    for label in &decision.labels {
        let i = group
            .label_index(label)
            .ok_or_else(|| Error::Data(format!("label {label:?} not in group {:?}", group.name)))?;
        row[i] += 1;
    }
    Ok(())
}

/// Records per category. Multilabel records count once per assigned label and
/// records with no label count under [`UNASSIGNED`].
pub fn category_counts(decisions: &[Decision], group: &CategoryGroup) -> Result<TrendSeries> {
    let categories = trend_categories(group);
    let mut row = vec![0u64; categories.len()];
    for d in decisions {
        tally(d, group, &mut row)?;
    }
    Ok(TrendSeries {
        group: group.name.clone(),
        axis: TrendAxis::Category,
        bins: vec!["all".to_string()],
        categories,
        counts: vec![row],
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTrend {
    pub series: TrendSeries,
    /// Decisions whose record year fell outside the range.
    pub excluded: u64,
}

/// Year-by-category counts over every year in `range`, zero-filled.
pub fn time_series(
    decisions: &[Decision],
    records: &[ArticleRecord],
    group: &CategoryGroup,
    range: YearRange,
) -> Result<TimeTrend> {
    let years: HashMap<&str, i32> = records.iter().map(|r| (r.pmid.as_str(), r.year)).collect();
    let categories = trend_categories(group);
    let bins: Vec<i32> = range.years().collect();
    let mut counts = vec![vec![0u64; categories.len()]; bins.len()];
    let mut excluded = 0;
    for d in decisions {
        let year = *years
            .get(d.pmid.as_str())
            .ok_or_else(|| Error::Data(format!("decision for {} has no source record", d.pmid)))?;
        if !range.contains(year) {
            excluded += 1;
            continue;
        }
        tally(d, group, &mut counts[(year - range.min) as usize])?;
    }
    Ok(TimeTrend {
        series: TrendSeries {
            group: group.name.clone(),
            axis: TrendAxis::Year,
            bins: bins.iter().map(i32::to_string).collect(),
            categories,
            counts,
        },
        excluded,
    })
}

/// Wall-clock measurement of one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    #[serde(with = "seconds")]
    pub duration: Duration,
    pub records: u64,
}

mod seconds {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

impl StageTiming {
    pub fn minutes(&self) -> f64 {
        self.duration.as_secs_f64() / 60.0
    }

    /// Records per minute; `None` when nothing was processed or no time elapsed.
    pub fn records_per_minute(&self) -> Option<f64> {
        if self.records == 0 || self.duration.is_zero() {
            None
        } else {
            Some(self.records as f64 / self.minutes())
        }
    }
}

pub fn record_timing(stage: impl Into<String>, duration: Duration, records: u64) -> StageTiming {
    StageTiming {
        stage: stage.into(),
        duration,
        records,
    }
}

/// Stage name for classifying one group under one input mode.
pub fn classify_stage(group: &str, input: crate::decision::InputMode) -> String {
    format!("classify:{group}:{input}")
}

/// Monotonic time source for stage timing.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
}

pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Advances by a fixed step on every reading. Makes timings reproducible.
pub struct SteppingClock {
    step_nanos: u64,
    ticks: AtomicU64,
}

impl SteppingClock {
    pub fn new(step: Duration) -> Self {
        SteppingClock {
            step_nanos: step.as_nanos() as u64,
            ticks: AtomicU64::new(0),
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> Duration {
        Duration::from_nanos(self.ticks.fetch_add(1, Ordering::SeqCst) * self.step_nanos)
    }
}
