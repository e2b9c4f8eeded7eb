//! Stage functions behind the command-line tool. Each stage reads and writes
//! stable artifact names under the configured output directory, so stages can
//! be run one at a time or chained.

mod ablate;
mod classify;
mod config;

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::decision::{sweep_thresholds, Decision, InputMode, ThresholdConfig};
use crate::error::{Error, Result};
use crate::ingest::{
    apply_inclusion, save_corpus, ArticleRecord, EutilsClient, InclusionCriteria, Transport,
    YearRange,
};
use crate::metrics::{evaluate_decisions, write_report_csv, EvalReport};
use crate::scorer::{LabelScores, Scorer};
use crate::taxonomy::{
    load_annotations, resolve_gold, split_labeled_corpus, CategoryGroup, GoldLabel, Mode,
};
use crate::trends::{
    category_chart, category_counts, record_timing, render_report, slug, time_chart, time_series,
    write_category_csv, write_time_csv, Clock, ReportBundle, ReportInput, StageTiming, TimeTrend,
    TrendSeries,
};

pub use ablate::{
    ablate, load_variants, parse_variants, AblationRow, AblationTable, Metric, PhrasingVariant,
};
pub use classify::{classify_group, decide, redecide, Classification, ClassifyOptions};
pub use config::{
    Backend, InclusionSection, RunConfig, ScorerSection, TrendsSection, TuningSection,
    CONFIG_VERSION,
};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const TIMINGS_FILE: &str = "timings.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const TRENDS_DIR: &str = "trends";
pub const REPORT_DIR: &str = "report";
pub const EVAL_DIR: &str = "eval";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// One decision per line, in the order given.
pub fn save_decisions(decisions: &[Decision], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for d in decisions {
        serde_json::to_writer(&mut out, d).map_err(|e| Error::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_decisions(path: &Path) -> Result<Vec<Decision>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let at = |message: String| Error::Line {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| at(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| at(e.to_string()))?);
    }
    Ok(out)
}

/// Merges `new` into the timings file: an entry for an existing stage replaces it.
pub fn update_timings(path: &Path, new: &[StageTiming]) -> Result<Vec<StageTiming>> {
    let mut all: Vec<StageTiming> = if path.is_file() {
        load_json(path)?
    } else {
        Vec::new()
    };
    for t in new {
        match all.iter_mut().find(|x| x.stage == t.stage) {
            Some(slot) => *slot = t.clone(),
            None => all.push(t.clone()),
        }
    }
    save_json(&all, path)?;
    Ok(all)
}

/// Current UTC time for the report's timestamp line.
pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn output_path(config: &RunConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchSummary {
    pub retrieved: usize,
    pub records: Vec<ArticleRecord>,
    pub timing: StageTiming,
}

/// Searches, fetches, applies the inclusion criteria and writes the corpus.
pub fn fetch(
    config: &RunConfig,
    transport: Box<dyn Transport>,
    clock: &dyn Clock,
) -> Result<FetchSummary> {
    if config.query.trim().is_empty() {
        return Err(Error::Usage("no query given".into()));
    }
    let criteria = config.criteria()?;
    let started = clock.now();
    let client = EutilsClient::new(transport);
    let pmids =
        client.search_articles(&criteria.query, criteria.max_articles, criteria.year_range)?;
    let fetched = if pmids.is_empty() {
        Vec::new()
    } else {
        client.fetch_records(&pmids)?
    };
    let records = apply_inclusion(&fetched, &criteria);
    info!(
        "retrieved {} records, {} after inclusion filtering",
        fetched.len(),
        records.len()
    );
    let timing = record_timing(
        "fetch",
        clock.now().saturating_sub(started),
        records.len() as u64,
    );
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    save_corpus(&records, &output_path(config, CORPUS_FILE))?;
    update_timings(
        &output_path(config, TIMINGS_FILE),
        std::slice::from_ref(&timing),
    )?;
    Ok(FetchSummary {
        retrieved: fetched.len(),
        records,
        timing,
    })
}

/// Classifies the corpus for every group and configured input mode, in
/// group order, then mode order, then corpus order.
pub fn classify_all(
    config: &RunConfig,
    groups: &[CategoryGroup],
    records: &[ArticleRecord],
    scorer: &dyn Scorer,
    clock: &dyn Clock,
) -> Result<(Vec<Decision>, Vec<StageTiming>)> {
    if records.is_empty() {
        return Err(Error::Data("corpus is empty".into()));
    }
    let options = ClassifyOptions {
        parallelism: config.scorer.parallelism,
        max_chars: config.scorer.max_chars,
    };
    let mut decisions = Vec::new();
    let mut timings = Vec::new();
    for group in groups {
        for &input in &config.input_modes {
            let c = classify_group(records, group, input, scorer, options, clock)?;
            decisions.extend(c.decisions);
            timings.push(c.timing);
        }
    }
    save_decisions(&decisions, &output_path(config, DECISIONS_FILE))?;
    update_timings(&output_path(config, TIMINGS_FILE), &timings)?;
    Ok((decisions, timings))
}

/// Thresholds chosen on the tuning split for one group and input mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedThresholds {
    pub group: String,
    pub input: InputMode,
    pub thresholds: ThresholdConfig,
    pub tuning_records: usize,
    pub best: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reports: Vec<EvalReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tuned: Vec<TunedThresholds>,
}

fn gold_indices(group: &CategoryGroup, gold: &GoldLabel) -> Vec<usize> {
    gold.labels
        .iter()
        .filter_map(|l| group.label_index(l))
        .collect()
}

/// Sweeps thresholds on a seeded tuning split, then returns the re-decided
/// decisions for records outside it.
fn tune(
    config: &RunConfig,
    group: &CategoryGroup,
    decisions: &[Decision],
    gold: &BTreeMap<String, GoldLabel>,
) -> Result<(Vec<Decision>, TunedThresholds)> {
    let decided: HashSet<&str> = decisions.iter().map(|d| d.pmid.as_str()).collect();
    let labeled: Vec<GoldLabel> = gold
        .values()
        .filter(|g| g.is_resolved() && decided.contains(g.pmid.as_str()))
        .cloned()
        .collect();
    let split = split_labeled_corpus(&labeled, config.tuning.fraction, config.seed)?;
    for w in &split.warnings {
        warn!("{}: {w}", group.name);
    }
    let tuning: HashSet<&str> = split.tuning.iter().map(|g| g.pmid.as_str()).collect();
    let (scores, truth): (Vec<LabelScores>, Vec<Vec<usize>>) = decisions
        .iter()
        .filter(|d| tuning.contains(d.pmid.as_str()))
        .map(|d| (d.scores.clone(), gold_indices(group, &gold[&d.pmid])))
        .unzip();
    let names = group.label_names();
    let sweep = sweep_thresholds(
        &scores,
        &truth,
        &names,
        &config.tuning.grid(),
        config.tuning.objective,
    )?;
    for w in &sweep.warnings {
        warn!("{}: {w}", group.name);
    }
    let held_out: Vec<Decision> = decisions
        .iter()
        .filter(|d| !tuning.contains(d.pmid.as_str()))
        .cloned()
        .collect();
    let redecided = redecide(group, &held_out, &sweep.thresholds.resolve(&names))?;
    Ok((
        redecided,
        TunedThresholds {
            group: group.name.clone(),
            input: decisions[0].input,
            thresholds: sweep.thresholds,
            tuning_records: scores.len(),
            best: sweep.best,
        },
    ))
}

/// Scores decisions against majority-voted annotations. With tuning enabled,
/// multilabel groups are evaluated on the held-out part of the split only.
/// Writes `evaluation.json` and one metrics CSV per group and input mode.
pub fn evaluate(
    config: &RunConfig,
    groups: &[CategoryGroup],
    decisions: &[Decision],
) -> Result<Evaluation> {
    let path = config
        .annotations
        .as_ref()
        .ok_or_else(|| Error::Usage("no annotations file configured".into()))?;
    let sets = load_annotations(path, groups)?;
    let gold = resolve_gold(&sets, groups);

    let mut out = Evaluation::default();
    for group in groups {
        let Some(group_gold) = gold.get(&group.name) else {
            warn!("no annotations for group {:?}", group.name);
            continue;
        };
        for &input in &config.input_modes {
            let ds: Vec<Decision> = decisions
                .iter()
                .filter(|d| d.group == group.name && d.input == input)
                .cloned()
                .collect();
            if ds.is_empty() {
                continue;
            }
            let ds = if config.tuning.enabled && group.mode == Mode::Multilabel {
                let (held_out, tuned) = tune(config, group, &ds, group_gold)?;
                out.tuned.push(tuned);
                held_out
            } else {
                ds
            };
            let report = evaluate_decisions(group, &ds, group_gold, config.averaging)?;
            let csv_path = config
                .output_dir
                .join(EVAL_DIR)
                .join(format!("metrics_{}_{input}.csv", slug(&group.name)));
            write_report_csv(&report, create(&csv_path)?)?;
            out.reports.push(report);
        }
    }
    if out.reports.is_empty() {
        return Err(Error::Data(
            "no group has both decisions and annotations".into(),
        ));
    }
    save_json(&out, &output_path(config, EVALUATION_FILE))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trends {
    pub categories: Vec<TrendSeries>,
    pub time: Vec<TimeTrend>,
}

/// Category and year counts over the decisions of the trend input mode.
///
/// Without a configured year range, the range spans the decided records.
pub fn compute_trends(
    config: &RunConfig,
    groups: &[CategoryGroup],
    decisions: &[Decision],
    records: &[ArticleRecord],
) -> Result<Trends> {
    let input = config.trend_input();
    let mut categories = Vec::new();
    let mut time = Vec::new();
    for group in groups {
        let ds: Vec<Decision> = decisions
            .iter()
            .filter(|d| d.group == group.name && d.input == input)
            .cloned()
            .collect();
        if ds.is_empty() {
            warn!("no {input} decisions for group {:?}", group.name);
            continue;
        }
        categories.push(category_counts(&ds, group)?);
        let range = match config.trend_years()? {
            Some(r) => r,
            None => {
                let decided: HashSet<&str> = ds.iter().map(|d| d.pmid.as_str()).collect();
                let years = records
                    .iter()
                    .filter(|r| decided.contains(r.pmid.as_str()))
                    .map(|r| r.year);
                match (years.clone().min(), years.max()) {
                    (Some(min), Some(max)) => YearRange::new(min, max)?,
                    _ => {
                        return Err(Error::Data(format!(
                            "no source records for group {:?}",
                            group.name
                        )))
                    }
                }
            }
        };
        time.push(time_series(&ds, records, group, range)?);
    }
    if categories.is_empty() {
        return Err(Error::Data(format!("no {input} decisions to aggregate")));
    }
    Ok(Trends { categories, time })
}

/// Writes trend CSVs and charts under `<output>/trends`.
pub fn write_trends(config: &RunConfig, trends: &Trends) -> Result<Vec<PathBuf>> {
    let dir = config.output_dir.join(TRENDS_DIR);
    let mut written = Vec::new();
    let path = dir.join("trends_category.csv");
    write_category_csv(&trends.categories, create(&path)?)?;
    written.push(path);
    let series: Vec<TrendSeries> = trends.time.iter().map(|t| t.series.clone()).collect();
    let path = dir.join("trends_time.csv");
    write_time_csv(&series, create(&path)?)?;
    written.push(path);
    for s in &trends.categories {
        let path = dir.join(format!("{}_category.svg", slug(&s.group)));
        fs::write(&path, category_chart(s)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    for s in &series {
        let path = dir.join(format!("{}_year.svg", slug(&s.group)));
        fs::write(&path, time_chart(s)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Inputs to the final report, as produced by the earlier stages.
pub struct ReportArtifacts<'a> {
    pub criteria: &'a InclusionCriteria,
    pub scorer: &'a str,
    pub groups: &'a [CategoryGroup],
    pub decisions: &'a [Decision],
    pub evaluation: Option<&'a Evaluation>,
    pub trends: Option<&'a Trends>,
    pub timings: &'a [StageTiming],
}

pub fn report(
    config: &RunConfig,
    artifacts: &ReportArtifacts,
    generated_at: &str,
) -> Result<ReportBundle> {
    let decisions: Vec<Decision> = artifacts
        .decisions
        .iter()
        .filter(|d| d.input == config.trend_input())
        .cloned()
        .collect();
    let input = ReportInput {
        criteria: artifacts.criteria,
        scorer: artifacts.scorer,
        groups: artifacts.groups,
        decisions: &decisions,
        evaluations: artifacts
            .evaluation
            .map(|e| e.reports.as_slice())
            .unwrap_or(&[]),
        categories: artifacts
            .trends
            .map(|t| t.categories.as_slice())
            .unwrap_or(&[]),
        time: artifacts.trends.map(|t| t.time.as_slice()).unwrap_or(&[]),
        timings: artifacts.timings,
    };
    render_report(&input, &config.output_dir.join(REPORT_DIR), generated_at)
}
