//! Text cleaning: stopword removal, alphabet filtering and lowercasing, in a
//! configurable order.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three cleaning stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanStage {
    Lowercase,
    FilterAlphabet,
    RemoveStopwords,
}

const ALL_STAGES: [CleanStage; 3] = [
    CleanStage::Lowercase,
    CleanStage::FilterAlphabet,
    CleanStage::RemoveStopwords,
];

/// Configuration for [`clean_pipeline`].
///
/// `stage_order` is a permutation of the three stages; the per-stage flags
/// control whether a stage actually runs. The default order lowercases
/// before stopword matching so that lowercase stoplists match mixed-case
/// tokens exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanConfig {
    stopwords: BTreeSet<String>,
    pub remove_stopwords: bool,
    pub filter_alphabet: bool,
    pub lowercase: bool,
    stage_order: [CleanStage; 3],
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            stopwords: BTreeSet::new(),
            remove_stopwords: true,
            filter_alphabet: true,
            lowercase: true,
            stage_order: ALL_STAGES,
        }
    }
}

impl CleanConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the stopword list. Entries must be single lowercase tokens.
    pub fn with_stopwords<I, S>(mut self, words: I) -> Result<Self, PreprocessError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for word in words {
            let word = word.as_ref().trim();
            if word.is_empty() {
                continue;
            }
            if word.chars().any(char::is_whitespace) {
                return Err(PreprocessError::MultiWordStopword {
                    entry: word.to_string(),
                });
            }
            set.insert(word.to_lowercase());
        }
        self.stopwords = set;
        Ok(self)
    }

    /// Sets the stage execution order; must mention each stage exactly once.
    pub fn with_stage_order(mut self, order: [CleanStage; 3]) -> Result<Self, PreprocessError> {
        for stage in ALL_STAGES {
            if order.iter().filter(|&&s| s == stage).count() != 1 {
                return Err(PreprocessError::InvalidStageOrder {
                    order: order.to_vec(),
                });
            }
        }
        self.stage_order = order;
        Ok(self)
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn stage_order(&self) -> [CleanStage; 3] {
        self.stage_order
    }
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("stopword entry {entry:?} is not a single token")]
    MultiWordStopword { entry: String },
    #[error("stage order {order:?} must contain each stage exactly once")]
    InvalidStageOrder { order: Vec<CleanStage> },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads a stopword file: UTF-8, one token per line, `#` comment lines and
/// blank lines ignored.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, PreprocessError> {
    let content = std::fs::read_to_string(path).map_err(|source| PreprocessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut set = BTreeSet::new();
    for line in content.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.chars().any(char::is_whitespace) {
            return Err(PreprocessError::MultiWordStopword {
                entry: line.to_string(),
            });
        }
        set.insert(line.to_lowercase());
    }
    Ok(set)
}

/// Drops whitespace-separated tokens whose lowercase form is in the
/// stoplist; remaining tokens are re-joined with single spaces.
pub fn remove_stopwords(text: &str, stoplist: &BTreeSet<String>) -> String {
    text.split_whitespace()
        .filter(|token| !stoplist.contains(&token.to_lowercase()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Removes every character that is neither alphabetic nor whitespace, then
/// collapses whitespace runs to single spaces and trims the ends.
pub fn filter_alphabet(text: &str) -> String {
    let kept: String = text
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .filter(|c| c.is_alphabetic() || *c == ' ')
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Unicode case-folding; idempotent.
pub fn lowercase(text: &str) -> String {
    text.to_lowercase()
}

/// Applies the enabled stages in the configured order.
pub fn clean_pipeline(text: &str, config: &CleanConfig) -> String {
    let mut current = text.to_string();
    for stage in config.stage_order {
        current = match stage {
            CleanStage::Lowercase if config.lowercase => lowercase(&current),
            CleanStage::FilterAlphabet if config.filter_alphabet => filter_alphabet(&current),
            CleanStage::RemoveStopwords if config.remove_stopwords => {
                remove_stopwords(&current, &config.stopwords)
            }
            _ => current,
        };
    }
    current
}
