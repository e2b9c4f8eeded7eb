use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::decision::{Decision, Flag, InputMode};
use crate::error::{Error, Result};
use crate::ingest::InclusionCriteria;
use crate::metrics::EvalReport;
use crate::taxonomy::{CategoryGroup, Mode};
use crate::trends::{
    category_chart, time_chart, write_category_csv, write_time_csv, write_timings_csv, StageTiming,
    TimeTrend, TrendSeries,
};

/// The only line of the report that differs between regenerations.
pub const TIMESTAMP_PREFIX: &str = "Generated: ";

pub struct ReportInput<'a> {
    pub criteria: &'a InclusionCriteria,
    pub scorer: &'a str,
    pub groups: &'a [CategoryGroup],
    pub decisions: &'a [Decision],
    pub evaluations: &'a [EvalReport],
    pub categories: &'a [TrendSeries],
    pub time: &'a [TimeTrend],
    pub timings: &'a [StageTiming],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub report: PathBuf,
    pub charts: Vec<PathBuf>,
    pub csv: Vec<PathBuf>,
}

/// File-name form of a group name: lowercase ASCII alphanumerics joined by `_`.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let trimmed = out.trim_matches('_');
    if trimmed.is_empty() {
        "group".to_string()
    } else {
        trimmed.to_string()
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `report.md`, one SVG per trend series (`<group>_<axis>.svg`) and CSV
/// files for every number in the report, all under `out_dir`.
pub fn render_report(
    input: &ReportInput,
    out_dir: &Path,
    generated_at: &str,
) -> Result<ReportBundle> {
    if input.categories.is_empty() && input.time.is_empty() && input.evaluations.is_empty() {
        return Err(Error::Usage(
            "nothing to report: no trend series and no evaluations".into(),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut charts = Vec::new();
    let mut csv_files = Vec::new();
    let mut md = String::new();

    let _ = writeln!(md, "# Literature triage report\n");
    let _ = writeln!(md, "{TIMESTAMP_PREFIX}{generated_at}\n");

    let c = input.criteria;
    let _ = writeln!(md, "## Query and inclusion criteria\n");
    let _ = writeln!(md, "| Setting | Value |\n|---|---|");
    let _ = writeln!(md, "| Query | `{}` |", c.query.replace('|', "\\|"));
    let years = c
        .year_range
        .map(|r| format!("{}-{}", r.min, r.max))
        .unwrap_or_else(|| "any".into());
    let _ = writeln!(md, "| Publication years | {years} |");
    let _ = writeln!(
        md,
        "| Abstract required | {} |",
        if c.require_abstract { "yes" } else { "no" }
    );
    let _ = writeln!(md, "| Maximum articles | {} |", c.max_articles);
    let _ = writeln!(md, "| Scorer | {} |\n", input.scorer);

    for group in input.groups {
        let decisions: Vec<&Decision> = input
            .decisions
            .iter()
            .filter(|d| d.group == group.name)
            .collect();
        let categories = input.categories.iter().find(|s| s.group == group.name);
        let time = input.time.iter().find(|t| t.series.group == group.name);
        let evals: Vec<&EvalReport> = input
            .evaluations
            .iter()
            .filter(|e| e.group == group.name)
            .collect();
        if decisions.is_empty() && categories.is_none() && time.is_none() && evals.is_empty() {
            continue;
        }

        let _ = writeln!(md, "## {}\n", group.name);
        let _ = writeln!(
            md,
            "Mode: {}. Labels: {}.\n",
            group.mode,
            group.label_names().join(", ")
        );

        if !decisions.is_empty() {
            let mut by_input: BTreeMap<InputMode, Vec<&Decision>> = BTreeMap::new();
            for d in &decisions {
                by_input.entry(d.input).or_default().push(d);
            }
            let _ = writeln!(md, "### Decisions\n");
            let _ = writeln!(
                md,
                "| Input | Records | Tied | Empty | Title fallback |\n|---|---|---|---|---|"
            );
            for (mode, ds) in &by_input {
                let flagged = |f: Flag| ds.iter().filter(|d| d.has_flag(f)).count();
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} |",
                    mode.heading(),
                    ds.len(),
                    flagged(Flag::Tied),
                    flagged(Flag::Empty),
                    flagged(Flag::TitleFallback)
                );
            }
            md.push('\n');
        }

        if let Some(series) = categories {
            let _ = writeln!(md, "### Category counts\n");
            let _ = writeln!(md, "| Category | Articles |\n|---|---|");
            for (i, name) in series.categories.iter().enumerate() {
                let _ = writeln!(md, "| {name} | {} |", series.category_total(i));
            }
            let file = format!("{}_category.svg", slug(&group.name));
            let path = out_dir.join(&file);
            write_file(&path, &category_chart(series))?;
            charts.push(path);
            let _ = writeln!(md, "\n![{}: articles per category]({file})\n", group.name);
        }

        if let Some(trend) = time {
            let s = &trend.series;
            let _ = writeln!(md, "### Publication years\n");
            let _ = writeln!(md, "| Year | {} | Total |", s.categories.join(" | "));
            let _ = writeln!(md, "|---|{}---|", "---|".repeat(s.categories.len()));
            for (b, year) in s.bins.iter().enumerate() {
                let cells: Vec<String> = s.counts[b].iter().map(u64::to_string).collect();
                let _ = writeln!(
                    md,
                    "| {year} | {} | {} |",
                    cells.join(" | "),
                    s.row_total(b)
                );
            }
            if trend.excluded > 0 {
                let _ = writeln!(md, "\nRecords outside the year range: {}", trend.excluded);
            }
            let file = format!("{}_year.svg", slug(&group.name));
            let path = out_dir.join(&file);
            write_file(&path, &time_chart(s))?;
            charts.push(path);
            let _ = writeln!(md, "\n![{}: articles per year]({file})\n", group.name);
        }

        if !evals.is_empty() {
            let _ = writeln!(md, "### Evaluation\n");
            match group.mode {
                Mode::Multiclass => {
                    let _ = writeln!(md, "| Input | Records | Ac | F1 | AUC | Pv | Re |\n|---|---|---|---|---|---|---|");
                    for e in &evals {
                        let _ = writeln!(
                            md,
                            "| {} | {} | {} | {} | {} | {} | {} |",
                            e.input.heading(),
                            e.records,
                            num(e.accuracy),
                            num(Some(e.f1)),
                            num(e.auc),
                            num(Some(e.precision)),
                            num(Some(e.recall))
                        );
                    }
                }
                Mode::Multilabel => {
                    let _ = writeln!(
                        md,
                        "| Input | Records | F1 micro | AUC | Pv micro | Re micro |\n|---|---|---|---|---|---|"
                    );
                    for e in &evals {
                        let _ = writeln!(
                            md,
                            "| {} | {} | {} | {} | {} | {} |",
                            e.input.heading(),
                            e.records,
                            num(Some(e.f1)),
                            num(e.auc),
                            num(Some(e.precision)),
                            num(Some(e.recall))
                        );
                    }
                }
            }
            for e in &evals {
                if e.excluded_no_gold > 0 || e.excluded_tie > 0 {
                    let _ = writeln!(
                        md,
                        "\n{}: excluded {} records without gold labels and {} with tied gold labels.",
                        e.input.heading(),
                        e.excluded_no_gold,
                        e.excluded_tie
                    );
                }
            }
            md.push('\n');
        }
    }

    if !input.timings.is_empty() {
        let _ = writeln!(md, "## Processing time\n");
        write_timing_tables(&mut md, input.timings);
    }

    if !input.categories.is_empty() {
        let path = out_dir.join("trends_category.csv");
        write_category_csv(input.categories, create(&path)?)?;
        csv_files.push(path);
    }
    if !input.time.is_empty() {
        let path = out_dir.join("trends_time.csv");
        let series: Vec<TrendSeries> = input.time.iter().map(|t| t.series.clone()).collect();
        write_time_csv(&series, create(&path)?)?;
        csv_files.push(path);
    }
    if !input.timings.is_empty() {
        let path = out_dir.join("timings.csv");
        write_timings_csv(input.timings, create(&path)?)?;
        csv_files.push(path);
    }
    if !input.evaluations.is_empty() {
        let path = out_dir.join("metrics.csv");
        write_metrics_summary(input.evaluations, &path)?;
        csv_files.push(path);
    }

    let _ = writeln!(md, "## Data files\n");
    for path in csv_files.iter().chain(&charts) {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        let _ = writeln!(md, "- [{name}]({name})");
    }

    let report = out_dir.join("report.md");
    write_file(&report, &md)?;
    Ok(ReportBundle {
        report,
        charts,
        csv: csv_files,
    })
}

/// Classification stages pivoted by input mode, then every stage in full.
fn write_timing_tables(md: &mut String, timings: &[StageTiming]) {
    let mut pivot: BTreeMap<&str, BTreeMap<InputMode, &StageTiming>> = BTreeMap::new();
    for t in timings {
        if let Some((group, mode)) = t
            .stage
            .strip_prefix("classify:")
            .and_then(|s| s.rsplit_once(':'))
        {
            if let Ok(mode) = mode.parse::<InputMode>() {
                pivot.entry(group).or_default().insert(mode, t);
            }
        }
    }
    if !pivot.is_empty() {
        let modes: Vec<InputMode> = InputMode::ALL
            .into_iter()
            .filter(|m| pivot.values().any(|row| row.contains_key(m)))
            .collect();
        let _ = writeln!(
            md,
            "| Group | Records | {} |",
            modes
                .iter()
                .map(|m| format!("{} (min)", m.heading()))
                .collect::<Vec<_>>()
                .join(" | ")
        );
        let _ = writeln!(md, "|---|---|{}", "---|".repeat(modes.len()));
        for (group, row) in &pivot {
            let records = row.values().map(|t| t.records).max().unwrap_or(0);
            let cells: Vec<String> = modes
                .iter()
                .map(|m| {
                    row.get(m)
                        .map(|t| format!("{:.2}", t.minutes()))
                        .unwrap_or_else(|| "-".into())
                })
                .collect();
            let _ = writeln!(md, "| {group} | {records} | {} |", cells.join(" | "));
        }
        md.push('\n');
    }
    let _ = writeln!(
        md,
        "| Stage | Records | Minutes | Records/min |\n|---|---|---|---|"
    );
    for t in timings {
        let rate = t
            .records_per_minute()
            .map(|r| format!("{r:.2}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            md,
            "| {} | {} | {:.2} | {rate} |",
            t.stage,
            t.records,
            t.minutes()
        );
    }
    md.push('\n');
}

fn write_metrics_summary(evals: &[EvalReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record([
        "group", "input", "mode", "Ac", "F1", "AUC", "Pv", "Re", "records",
    ])
    .map_err(err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in evals {
        w.write_record([
            e.group.clone(),
            e.input.to_string(),
            e.mode.to_string(),
            opt(e.accuracy),
            e.f1.to_string(),
            opt(e.auc),
            e.precision.to_string(),
            e.recall.to_string(),
            e.records.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
