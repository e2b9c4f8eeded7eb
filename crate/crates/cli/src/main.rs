//! `litscan`: fetch PubMed records, classify them into taxonomy groups,
//! evaluate against annotations, and report trends.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use litscan::decision::{InputMode, Objective};
use litscan::ingest::{
    load_corpus, save_corpus, FixtureTransport, HttpTransport, RecordingTransport, Transport,
};
use litscan::pipeline::{
    self, load_decisions, load_json, output_path, Backend, Evaluation, ReportArtifacts, RunConfig,
    CORPUS_FILE, DECISIONS_FILE, EVALUATION_FILE, TIMINGS_FILE,
};
use litscan::taxonomy::{load_annotations, load_taxonomy, resolve_gold, CategoryGroup};
use litscan::trends::{MonotonicClock, StageTiming};
use litscan::{Error, Result};

#[derive(Parser)]
#[command(
    name = "litscan",
    version,
    about = "Zero-shot literature triage over PubMed"
)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Taxonomy file; required when no config is given.
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,

    /// Directory for all artifacts.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Input modes, comma separated: abstract, title, fused, appended.
    #[arg(long, global = true, value_delimiter = ',')]
    modes: Vec<InputMode>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More log output (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args, Default)]
struct FetchArgs {
    #[arg(long)]
    query: Option<String>,

    #[arg(long)]
    max_articles: Option<usize>,

    #[arg(long)]
    year_min: Option<i32>,

    #[arg(long)]
    year_max: Option<i32>,

    /// Keep records without an abstract.
    #[arg(long)]
    allow_missing_abstract: bool,

    /// Replay recorded E-utilities responses from this directory instead of the network.
    #[arg(long, conflicts_with = "record")]
    offline: Option<PathBuf>,

    /// Save every E-utilities response into this directory for later offline runs.
    #[arg(long)]
    record: Option<PathBuf>,

    /// E-utilities base URL.
    #[arg(long, hide = true)]
    eutils_url: Option<String>,

    /// NCBI API key; raises the request rate limit.
    #[arg(long, env = "NCBI_API_KEY", hide_env_values = true)]
    api_key: Option<String>,
}

#[derive(Args, Default)]
struct ScorerArgs {
    #[arg(long, value_parser = ["mock", "remote"])]
    scorer: Option<String>,

    /// Scoring service address, e.g. http://127.0.0.1:8000.
    #[arg(long)]
    endpoint: Option<String>,

    #[arg(long)]
    parallelism: Option<usize>,

    /// Corpus to classify (default: the fetched corpus in the output directory).
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Args, Default)]
struct EvalArgs {
    /// Annotation file, one vote per line.
    #[arg(long)]
    annotations: Option<PathBuf>,

    /// Tune multilabel thresholds on a seeded split before evaluating.
    #[arg(long)]
    tune: bool,

    #[arg(long)]
    objective: Option<Objective>,
}

#[derive(Subcommand)]
enum Command {
    /// Search PubMed and store the filtered corpus.
    Fetch(FetchArgs),
    /// Classify the corpus into every taxonomy group.
    Classify(ScorerArgs),
    /// Compare decisions with annotated gold labels.
    Evaluate(EvalArgs),
    /// Aggregate decisions by category and publication year.
    Trends,
    /// Render the report from stored artifacts.
    Report,
    /// Compare label phrasings on an annotated corpus.
    Ablate {
        /// Variant file: `group` plus `[[variant]]` tables with `name` and `phrases`.
        #[arg(long)]
        variants: PathBuf,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Fetch (unless --corpus is given), classify, evaluate when annotations exist, trends and report.
    RunAll {
        #[command(flatten)]
        fetch: FetchArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Usage(_) => 2,
        Error::Network(_) => 3,
        Error::Protocol(_) => 4,
        Error::Data(_) | Error::Xml { .. } | Error::Line { .. } => 5,
        Error::Io { .. } => 6,
        Error::Batch { .. } | Error::Record { .. } => 1,
    }
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut config = match (&common.config, &common.taxonomy) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(taxonomy)) => RunConfig::new(taxonomy),
        (None, None) => return Err(Error::Usage("give --config or --taxonomy".into())),
    };
    if let (Some(_), Some(taxonomy)) = (&common.config, &common.taxonomy) {
        config.taxonomy = taxonomy.clone();
    }
    if let Some(o) = &common.output {
        config.output_dir = o.clone();
    }
    if !common.modes.is_empty() {
        config.input_modes = common.modes.clone();
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    Ok(config)
}

fn apply_fetch(config: &mut RunConfig, a: &FetchArgs) {
    if let Some(q) = &a.query {
        config.query = q.clone();
    }
    if let Some(n) = a.max_articles {
        config.inclusion.max_articles = n;
    }
    if a.year_min.is_some() {
        config.inclusion.year_min = a.year_min;
    }
    if a.year_max.is_some() {
        config.inclusion.year_max = a.year_max;
    }
    if a.allow_missing_abstract {
        config.inclusion.require_abstract = false;
    }
}

fn apply_scorer(config: &mut RunConfig, a: &ScorerArgs) {
    match a.scorer.as_deref() {
        Some("remote") => config.scorer.backend = Backend::Remote,
        Some(_) => config.scorer.backend = Backend::Mock,
        None => {}
    }
    if let Some(e) = &a.endpoint {
        config.scorer.endpoint = Some(e.clone());
        if a.scorer.is_none() {
            config.scorer.backend = Backend::Remote;
        }
    }
    if let Some(p) = a.parallelism {
        config.scorer.parallelism = p;
    }
}

fn apply_eval(config: &mut RunConfig, a: &EvalArgs) {
    if let Some(p) = &a.annotations {
        config.annotations = Some(p.clone());
    }
    if a.tune {
        config.tuning.enabled = true;
    }
    if let Some(o) = a.objective {
        config.tuning.objective = o;
    }
}

fn transport(a: &FetchArgs) -> Result<Box<dyn Transport>> {
    if let Some(dir) = &a.offline {
        return Ok(Box::new(FixtureTransport::new(dir)?));
    }
    let http = match &a.eutils_url {
        Some(url) => HttpTransport::with_base_url(url, a.api_key.clone())?,
        None => HttpTransport::new(a.api_key.clone())?,
    };
    Ok(match &a.record {
        Some(dir) => Box::new(RecordingTransport::new(http, dir)?),
        None => Box::new(http),
    })
}

fn groups(config: &RunConfig) -> Result<Vec<CategoryGroup>> {
    load_taxonomy(&config.taxonomy)
}

fn corpus_path(config: &RunConfig, a: &ScorerArgs) -> PathBuf {
    a.corpus
        .clone()
        .unwrap_or_else(|| output_path(config, CORPUS_FILE))
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "{} not found; run `litscan {hint}` first",
            path.display()
        )))
    }
}

fn timings(config: &RunConfig) -> Result<Vec<StageTiming>> {
    let path = output_path(config, TIMINGS_FILE);
    if path.is_file() {
        load_json(&path)
    } else {
        Ok(Vec::new())
    }
}

fn do_fetch(config: &RunConfig, a: &FetchArgs) -> Result<()> {
    let summary = pipeline::fetch(config, transport(a)?, &MonotonicClock::new())?;
    println!(
        "retrieved {} records; {} kept after inclusion filtering -> {}",
        summary.retrieved,
        summary.records.len(),
        output_path(config, CORPUS_FILE).display()
    );
    Ok(())
}

fn do_classify(config: &RunConfig, a: &ScorerArgs) -> Result<()> {
    let path = corpus_path(config, a);
    require(&path, "fetch")?;
    let records = load_corpus(&path)?;
    // later stages read the corpus from the output directory
    let stored = output_path(config, CORPUS_FILE);
    if path != stored {
        std::fs::create_dir_all(&config.output_dir)
            .map_err(|e| Error::io(&config.output_dir, e))?;
        save_corpus(&records, &stored)?;
    }
    let scorer = config.build_scorer()?;
    let (decisions, timings) = pipeline::classify_all(
        config,
        &groups(config)?,
        &records,
        scorer.as_ref(),
        &MonotonicClock::new(),
    )?;
    for t in &timings {
        println!(
            "{}: {} records in {:.2} min",
            t.stage,
            t.records,
            t.minutes()
        );
    }
    println!(
        "{} decisions -> {}",
        decisions.len(),
        output_path(config, DECISIONS_FILE).display()
    );
    Ok(())
}

fn do_evaluate(config: &RunConfig) -> Result<Evaluation> {
    let path = output_path(config, DECISIONS_FILE);
    require(&path, "classify")?;
    let evaluation = pipeline::evaluate(config, &groups(config)?, &load_decisions(&path)?)?;
    for r in &evaluation.reports {
        let ac = r
            .accuracy
            .map(|a| format!("{a:.3}"))
            .unwrap_or_else(|| "-".into());
        let auc = r
            .auc
            .map(|a| format!("{a:.3}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{} [{}] n={} Ac={ac} F1={:.3} AUC={auc} Pv={:.3} Re={:.3}",
            r.group, r.input, r.records, r.f1, r.precision, r.recall
        );
    }
    Ok(evaluation)
}

fn do_trends(config: &RunConfig) -> Result<()> {
    let decisions = output_path(config, DECISIONS_FILE);
    require(&decisions, "classify")?;
    let corpus = output_path(config, CORPUS_FILE);
    require(&corpus, "fetch")?;
    let trends = pipeline::compute_trends(
        config,
        &groups(config)?,
        &load_decisions(&decisions)?,
        &load_corpus(&corpus)?,
    )?;
    for path in pipeline::write_trends(config, &trends)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn do_report(config: &RunConfig) -> Result<()> {
    let decisions_path = output_path(config, DECISIONS_FILE);
    require(&decisions_path, "classify")?;
    let corpus = &output_path(config, CORPUS_FILE);
    require(corpus, "fetch")?;
    let groups = groups(config)?;
    let decisions = load_decisions(&decisions_path)?;
    let records = load_corpus(corpus)?;
    let trends = pipeline::compute_trends(config, &groups, &decisions, &records)?;
    let eval_path = output_path(config, EVALUATION_FILE);
    let evaluation: Option<Evaluation> = if eval_path.is_file() {
        Some(load_json(&eval_path)?)
    } else {
        None
    };
    let criteria = config.criteria()?;
    let scorer = config.build_scorer()?.describe();
    let timings = timings(config)?;
    let bundle = pipeline::report(
        config,
        &ReportArtifacts {
            criteria: &criteria,
            scorer: &scorer,
            groups: &groups,
            decisions: &decisions,
            evaluation: evaluation.as_ref(),
            trends: Some(&trends),
            timings: &timings,
        },
        &pipeline::timestamp(),
    )?;
    println!("report -> {}", bundle.report.display());
    Ok(())
}

fn do_ablate(config: &RunConfig, variants: &Path, a: &ScorerArgs) -> Result<()> {
    let annotations = config
        .annotations
        .clone()
        .ok_or_else(|| Error::Usage("ablation needs --annotations".into()))?;
    let (group_name, variants) = pipeline::load_variants(variants)?;
    let groups = groups(config)?;
    let group = groups
        .iter()
        .find(|g| g.name == group_name)
        .ok_or_else(|| Error::Usage(format!("group {group_name:?} is not in the taxonomy")))?;
    let path = corpus_path(config, a);
    require(&path, "fetch")?;
    let records = load_corpus(&path)?;
    let gold = resolve_gold(&load_annotations(&annotations, &groups)?, &groups);
    let empty = Default::default();
    let scorer = config.build_scorer()?;
    let table = pipeline::ablate(
        group,
        &variants,
        &config.input_modes,
        &records,
        gold.get(&group.name).unwrap_or(&empty),
        scorer.as_ref(),
        pipeline::ClassifyOptions {
            parallelism: config.scorer.parallelism,
            max_chars: config.scorer.max_chars,
        },
        config.averaging,
    )?;
    let md = table.to_markdown();
    print!("{md}");
    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let md_path = output_path(config, "ablation.md");
    std::fs::write(&md_path, md).map_err(|e| Error::io(&md_path, e))?;
    let csv_path = output_path(config, "ablation.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    table.write_csv(file)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = base_config(&cli.common)?;
    match &cli.command {
        Command::Fetch(a) => {
            apply_fetch(&mut config, a);
            config.validate()?;
            do_fetch(&config, a)
        }
        Command::Classify(a) => {
            apply_scorer(&mut config, a);
            config.validate()?;
            do_classify(&config, a)
        }
        Command::Evaluate(a) => {
            apply_eval(&mut config, a);
            config.validate()?;
            do_evaluate(&config).map(|_| ())
        }
        Command::Trends => {
            config.validate()?;
            do_trends(&config)
        }
        Command::Report => {
            config.validate()?;
            do_report(&config)
        }
        Command::Ablate {
            variants,
            scorer,
            annotations,
        } => {
            apply_scorer(&mut config, scorer);
            if let Some(a) = annotations {
                config.annotations = Some(a.clone());
            }
            config.validate()?;
            do_ablate(&config, variants, scorer)
        }
        Command::RunAll {
            fetch,
            scorer,
            eval,
        } => {
            apply_fetch(&mut config, fetch);
            apply_scorer(&mut config, scorer);
            apply_eval(&mut config, eval);
            config.validate()?;
            if scorer.corpus.is_none() {
                do_fetch(&config, fetch)?;
            }
            do_classify(&config, scorer)?;
            if config.annotations.is_some() {
                do_evaluate(&config)?;
            }
            do_report(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => {
            info!("done");
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            eprintln!("litscan: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
