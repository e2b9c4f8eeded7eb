use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ArticleRecord;
use crate::scorer::truncate_at_word;

/// Which parts of an article are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Abstract,
    Title,
    /// Abstract and title scored separately, scores averaged.
    Fused,
    /// Title and abstract joined into one text.
    Appended,
}

impl InputMode {
    pub const ALL: [InputMode; 4] = [
        InputMode::Abstract,
        InputMode::Title,
        InputMode::Fused,
        InputMode::Appended,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Abstract => "abstract",
            InputMode::Title => "title",
            InputMode::Fused => "fused",
            InputMode::Appended => "appended",
        }
    }

    /// Column heading used in reports.
    pub fn heading(self) -> &'static str {
        match self {
            InputMode::Abstract => "Abstract",
            InputMode::Title => "Title",
            InputMode::Fused => "Probability (Abstract + Title)",
            InputMode::Appended => "Title + Abstract",
        }
    }

    pub fn needs_abstract(self) -> bool {
        !matches!(self, InputMode::Title)
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown input mode {s:?} (abstract, title, fused, appended)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelInput {
    Single(String),
    /// Scored separately, then fused.
    Pair {
        abstract_text: String,
        title: String,
    },
}

/// Separator between title and abstract in appended mode.
pub const APPEND_SEPARATOR: &str = ". ";

/// Text(s) to score for `record` under `mode`, each within `max_chars`.
///
/// Appended mode keeps the whole title and truncates only the abstract. A
/// trailing period on the title is dropped before the separator so the join
/// never doubles it.
pub fn build_input(
    record: &ArticleRecord,
    mode: InputMode,
    max_chars: usize,
) -> Result<ModelInput> {
    let title = record.title.trim();
    let abstract_text = record.abstract_text.trim();
    if mode.needs_abstract() && abstract_text.is_empty() {
        return Err(Error::Data(format!(
            "record {} has no abstract; use title mode or require an abstract at inclusion",
            record.pmid
        )));
    }
    Ok(match mode {
        InputMode::Abstract => {
            ModelInput::Single(truncate_at_word(abstract_text, max_chars).to_string())
        }
        InputMode::Title => ModelInput::Single(truncate_at_word(title, max_chars).to_string()),
        InputMode::Fused => ModelInput::Pair {
            abstract_text: truncate_at_word(abstract_text, max_chars).to_string(),
            title: truncate_at_word(title, max_chars).to_string(),
        },
        InputMode::Appended => {
            let head = title.strip_suffix('.').unwrap_or(title);
            let used = head.chars().count() + APPEND_SEPARATOR.chars().count();
            let rest = truncate_at_word(abstract_text, max_chars.saturating_sub(used));
            if rest.is_empty() {
                ModelInput::Single(head.to_string())
            } else {
                ModelInput::Single(format!("{head}{APPEND_SEPARATOR}{rest}"))
            }
        }
    })
}
