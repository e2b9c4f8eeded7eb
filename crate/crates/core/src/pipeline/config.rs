use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decision::{default_grid, InputMode, Objective};
use crate::error::{Error, Result};
use crate::ingest::{current_year, InclusionCriteria, YearRange};
use crate::metrics::Averaging;
use crate::scorer::{MockScorer, RemoteScorer, Scorer, DEFAULT_MAX_CHARS};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InclusionSection {
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    pub require_abstract: bool,
    pub max_articles: usize,
}

impl Default for InclusionSection {
    fn default() -> Self {
        InclusionSection {
            year_min: None,
            year_max: None,
            require_abstract: true,
            max_articles: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub backend: Backend,
    pub endpoint: Option<String>,
    pub parallelism: usize,
    pub max_chars: usize,
}

impl Default for ScorerSection {
    fn default() -> Self {
        ScorerSection {
            backend: Backend::Mock,
            endpoint: None,
            parallelism: 4,
            max_chars: DEFAULT_MAX_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    /// Sweep multilabel thresholds on a tuning split before evaluating.
    pub enabled: bool,
    pub fraction: f64,
    pub grid: Option<Vec<f64>>,
    pub objective: Objective,
}

impl Default for TuningSection {
    fn default() -> Self {
        TuningSection {
            enabled: false,
            fraction: 0.5,
            grid: None,
            objective: Objective::F1,
        }
    }
}

impl TuningSection {
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone().unwrap_or_else(default_grid)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendsSection {
    /// Input mode whose decisions feed the trends; defaults to the first configured mode.
    pub input: Option<InputMode>,
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
}

/// Everything one pipeline run needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub query: String,
    pub taxonomy: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub input_modes: Vec<InputMode>,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub inclusion: InclusionSection,
    #[serde(default)]
    pub scorer: ScorerSection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub trends: TrendsSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("litscan-out")
}

fn default_modes() -> Vec<InputMode> {
    vec![InputMode::Abstract]
}

fn range(min: Option<i32>, max: Option<i32>, what: &str) -> Result<Option<YearRange>> {
    match (min, max) {
        (None, None) => Ok(None),
        (Some(min), None) => YearRange::new(min, current_year()).map(Some),
        (None, Some(_)) => Err(Error::Usage(format!(
            "{what}: year_max given without year_min"
        ))),
        (Some(min), Some(max)) => YearRange::new(min, max)
            .map(Some)
            .map_err(|e| Error::Usage(format!("{what}: {e}"))),
    }
}

impl RunConfig {
    /// A config with defaults everywhere except the taxonomy path.
    pub fn new(taxonomy: impl Into<PathBuf>) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            query: String::new(),
            taxonomy: taxonomy.into(),
            output_dir: default_output_dir(),
            seed: 0,
            input_modes: default_modes(),
            annotations: None,
            averaging: Averaging::default(),
            inclusion: InclusionSection::default(),
            scorer: ScorerSection::default(),
            tuning: TuningSection::default(),
            trends: TrendsSection::default(),
        }
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))?;
        if config.version != CONFIG_VERSION {
            return Err(Error::Usage(format!(
                "config: unsupported version {}",
                config.version
            )));
        }
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.taxonomy);
        resolve(&mut config.output_dir);
        if let Some(a) = config.annotations.as_mut() {
            resolve(a);
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Usage(format!("config file {} not found", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Checks everything that can be checked without touching the network.
    pub fn validate(&self) -> Result<()> {
        let usage = |msg: String| Err(Error::Usage(msg));
        if !self.taxonomy.is_file() {
            return usage(format!(
                "taxonomy file {} does not exist",
                self.taxonomy.display()
            ));
        }
        if let Some(a) = &self.annotations {
            if !a.is_file() {
                return usage(format!("annotations file {} does not exist", a.display()));
            }
        }
        if self.input_modes.is_empty() {
            return usage("input_modes is empty".into());
        }
        let mut seen = HashSet::new();
        if let Some(m) = self.input_modes.iter().find(|m| !seen.insert(**m)) {
            return usage(format!("input mode {m} listed twice"));
        }
        if let Some(m) = self.trends.input {
            if !self.input_modes.contains(&m) {
                return usage(format!("trend input mode {m} is not among input_modes"));
            }
        }
        if self.inclusion.max_articles == 0 {
            return usage("inclusion.max_articles must be at least 1".into());
        }
        range(
            self.inclusion.year_min,
            self.inclusion.year_max,
            "inclusion",
        )?;
        range(self.trends.year_min, self.trends.year_max, "trends")?;
        if self.scorer.parallelism == 0 {
            return usage("scorer.parallelism must be at least 1".into());
        }
        if self.scorer.max_chars == 0 {
            return usage("scorer.max_chars must be at least 1".into());
        }
        match (self.scorer.backend, &self.scorer.endpoint) {
            (Backend::Remote, None) => return usage("remote scorer needs scorer.endpoint".into()),
            (Backend::Remote, Some(e)) => {
                RemoteScorer::new(e)?;
            }
            (Backend::Mock, _) => {}
        }
        let t = &self.tuning;
        if !(t.fraction > 0.0 && t.fraction < 1.0) {
            return usage(format!("tuning.fraction {} must be in (0, 1)", t.fraction));
        }
        if let Some(grid) = &t.grid {
            if grid.is_empty() || grid.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                return usage("tuning.grid must be non-empty with values in (0, 1)".into());
            }
        }
        Ok(())
    }

    pub fn criteria(&self) -> Result<InclusionCriteria> {
        let criteria = InclusionCriteria {
            query: self.query.clone(),
            year_range: range(
                self.inclusion.year_min,
                self.inclusion.year_max,
                "inclusion",
            )?,
            require_abstract: self.inclusion.require_abstract,
            max_articles: self.inclusion.max_articles,
        };
        criteria.validate()?;
        Ok(criteria)
    }

    /// Explicit trend years, falling back to the inclusion range.
    pub fn trend_years(&self) -> Result<Option<YearRange>> {
        match range(self.trends.year_min, self.trends.year_max, "trends")? {
            Some(r) => Ok(Some(r)),
            None => range(
                self.inclusion.year_min,
                self.inclusion.year_max,
                "inclusion",
            ),
        }
    }

    pub fn trend_input(&self) -> InputMode {
        self.trends.input.unwrap_or(self.input_modes[0])
    }

    pub fn build_scorer(&self) -> Result<Box<dyn Scorer>> {
        match self.scorer.backend {
            Backend::Mock => Ok(Box::new(MockScorer)),
            Backend::Remote => {
                let endpoint =
                    self.scorer.endpoint.as_deref().ok_or_else(|| {
                        Error::Usage("remote scorer needs scorer.endpoint".into())
                    })?;
                Ok(Box::new(RemoteScorer::new(endpoint)?))
            }
        }
    }
}
