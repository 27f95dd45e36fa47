//! Experiment configuration: a versioned, human-editable TOML schema
//! covering the whole pipeline.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationMethod;
use crate::corpus::ColumnMap;
use crate::ensemble::{Aggregation, EnsembleConfig, MemberSpec};
use crate::models::TrainConfig;
use crate::preprocess::CleanStage;
use crate::splitprep::SplitRatios;
use crate::translate::RetryPolicy;
use crate::tuner::Grid;

use super::{ExperimentError, Stage};

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(default = "default_text_column")]
    pub text_column: String,
    #[serde(default = "default_label_column")]
    pub label_column: String,
}

fn default_text_column() -> String {
    ColumnMap::default().text_column
}

fn default_label_column() -> String {
    ColumnMap::default().label_column
}

impl DatasetSection {
    pub fn column_map(&self) -> ColumnMap {
        ColumnMap {
            text_column: self.text_column.clone(),
            label_column: self.label_column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanSection {
    pub stopwords_path: Option<PathBuf>,
    /// Off by default: the better-performing dataset variant keeps
    /// stopwords.
    pub remove_stopwords: bool,
    pub filter_alphabet: bool,
    pub lowercase: bool,
    pub stage_order: [CleanStage; 3],
}

impl Default for CleanSection {
    fn default() -> Self {
        CleanSection {
            stopwords_path: None,
            remove_stopwords: false,
            filter_alphabet: true,
            lowercase: true,
            stage_order: [
                CleanStage::Lowercase,
                CleanStage::FilterAlphabet,
                CleanStage::RemoveStopwords,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    None,
    Undersample,
    Augment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrySection {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetrySection {
    fn default() -> Self {
        RetrySection {
            max_attempts: 3,
            base_delay_ms: 200,
            max_delay_ms: 5000,
        }
    }
}

impl RetrySection {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            base_delay: Duration::from_millis(self.base_delay_ms),
            max_delay: Duration::from_millis(self.max_delay_ms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationBackendKind {
    Dictionary,
    Echo,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryFile {
    pub path: PathBuf,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationSection {
    pub backend: TranslationBackendKind,
    #[serde(default)]
    pub backend_id: Option<String>,
    #[serde(default)]
    pub dictionary_files: Vec<DictionaryFile>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub cache_file: Option<PathBuf>,
    #[serde(default = "default_parallel_width")]
    pub parallel_width: usize,
    #[serde(default)]
    pub retry: RetrySection,
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_parallel_width() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSection {
    pub mode: BalanceMode,
    #[serde(default)]
    pub target: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_method_cycle")]
    pub method_cycle: Vec<AugmentationMethod>,
    #[serde(default)]
    pub synonym_lexicon: Option<PathBuf>,
    #[serde(default = "default_synonym_rate")]
    pub synonym_rate: f64,
    /// Augment the raw (pre-cleaning) text instead of the cleaned text.
    #[serde(default)]
    pub augment_on_raw: bool,
    #[serde(default)]
    pub translation: Option<TranslationSection>,
}

fn default_seed() -> u64 {
    42
}

fn default_method_cycle() -> Vec<AugmentationMethod> {
    AugmentationMethod::ALL.to_vec()
}

fn default_synonym_rate() -> f64 {
    0.2
}

impl Default for BalanceSection {
    fn default() -> Self {
        BalanceSection {
            mode: BalanceMode::None,
            target: None,
            seed: default_seed(),
            method_cycle: default_method_cycle(),
            synonym_lexicon: None,
            synonym_rate: default_synonym_rate(),
            augment_on_raw: false,
            translation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSection {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
            seed: default_seed(),
        }
    }
}

impl SplitSection {
    pub fn ratios(&self) -> Result<SplitRatios, crate::splitprep::SplitError> {
        SplitRatios::new(self.train, self.validation, self.test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    Hash,
    Wordpiece,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerSection {
    pub kind: TokenizerKind,
    pub assets_dir: Option<PathBuf>,
    pub lowercase: bool,
    pub max_length: usize,
}

impl Default for TokenizerSection {
    fn default() -> Self {
        TokenizerSection {
            kind: TokenizerKind::Hash,
            assets_dir: None,
            lowercase: true,
            max_length: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub backend: String,
    #[serde(default)]
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSection {
    pub backend: String,
    #[serde(default)]
    pub base: TrainConfig,
    pub grid: Grid,
    #[serde(default = "default_tune_width")]
    pub parallel_width: usize,
}

fn default_tune_width() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagMemberSection {
    pub backend: String,
    #[serde(default)]
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagSection {
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    pub members: Vec<BagMemberSection>,
}

/// External trainer settings used by the `finetune` backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneSection {
    pub command: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    pub encoder_dir: PathBuf,
    pub encoder_name: String,
    #[serde(default = "default_device")]
    pub device: String,
    #[serde(default)]
    pub work_dir: Option<PathBuf>,
}

fn default_device() -> String {
    "cpu".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("runs"),
        }
    }
}

/// Which of the three run modes a config requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Train,
    Tune,
    Bag,
}

impl RunMode {
    pub fn tag(&self) -> &'static str {
        match self {
            RunMode::Train => "train",
            RunMode::Tune => "tune",
            RunMode::Bag => "bag",
        }
    }
}

/// Root experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub clean: CleanSection,
    #[serde(default)]
    pub balance: BalanceSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub tokenizer: TokenizerSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub tune: Option<TuneSection>,
    #[serde(default)]
    pub bag: Option<BagSection>,
    #[serde(default)]
    pub finetune: Option<FinetuneSection>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        let config: ExperimentConfig = toml::from_str(text)
            .map_err(|e| ExperimentError::stage(Stage::Config, e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ExperimentError::stage(Stage::Config, format!("reading {}: {e}", path.display()))
        })?;
        let mut config = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            config.rebase_paths(base);
        }
        Ok(config)
    }

    /// Canonical snapshot used for run-directory addressing.
    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn mode(&self) -> Result<RunMode, ExperimentError> {
        match (&self.train, &self.tune, &self.bag) {
            (Some(_), None, None) => Ok(RunMode::Train),
            (None, Some(_), None) => Ok(RunMode::Tune),
            (None, None, Some(_)) => Ok(RunMode::Bag),
            _ => Err(ExperimentError::stage(
                Stage::Config,
                "exactly one of [train], [tune], [bag] must be present".to_string(),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let config_err = |message: String| ExperimentError::stage(Stage::Config, message);
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mode = self.mode()?;
        self.split.ratios().map_err(|e| config_err(e.to_string()))?;

        if self.balance.mode == BalanceMode::Augment {
            if self.balance.method_cycle.is_empty() {
                return Err(config_err("balance.method_cycle must not be empty".into()));
            }
            let needs_translation = self.balance.method_cycle.iter().any(|m| {
                matches!(
                    m,
                    AugmentationMethod::BtEnglish | AugmentationMethod::BtArabic
                )
            });
            if needs_translation && self.balance.translation.is_none() {
                return Err(config_err(
                    "balance.translation is required when the method cycle back-translates".into(),
                ));
            }
            let needs_lexicon = self
                .balance
                .method_cycle
                .contains(&AugmentationMethod::Synonym);
            if needs_lexicon && self.balance.synonym_lexicon.is_none() {
                return Err(config_err(
                    "balance.synonym_lexicon is required when the method cycle includes synonym replacement".into(),
                ));
            }
            if !(self.balance.synonym_rate > 0.0 && self.balance.synonym_rate <= 1.0) {
                return Err(config_err(format!(
                    "balance.synonym_rate {} must be in (0, 1]",
                    self.balance.synonym_rate
                )));
            }
        }
        if let Some(translation) = &self.balance.translation {
            match translation.backend {
                TranslationBackendKind::Http if translation.endpoint.is_none() => {
                    return Err(config_err(
                        "balance.translation.endpoint is required for the http backend".into(),
                    ));
                }
                TranslationBackendKind::Dictionary if translation.dictionary_files.is_empty() => {
                    return Err(config_err(
                        "balance.translation.dictionary_files is required for the dictionary backend".into(),
                    ));
                }
                _ => {}
            }
        }

        if self.tokenizer.kind == TokenizerKind::Wordpiece && self.tokenizer.assets_dir.is_none() {
            return Err(config_err(
                "tokenizer.assets_dir is required for the wordpiece tokenizer".into(),
            ));
        }

        let uses_finetune =
            |backend: &str| backend == "finetune" || backend.starts_with("finetune:");
        let mut finetune_needed = false;
        match mode {
            RunMode::Train => {
                let section = self.train.as_ref().expect("mode checked");
                section
                    .config
                    .validate()
                    .map_err(|e| config_err(e.to_string()))?;
                finetune_needed |= uses_finetune(&section.backend);
            }
            RunMode::Tune => {
                let section = self.tune.as_ref().expect("mode checked");
                section
                    .grid
                    .validate()
                    .map_err(|e| config_err(e.to_string()))?;
                section
                    .base
                    .validate()
                    .map_err(|e| config_err(e.to_string()))?;
                finetune_needed |= uses_finetune(&section.backend);
            }
            RunMode::Bag => {
                let section = self.bag.as_ref().expect("mode checked");
                if section.members.is_empty() {
                    return Err(config_err("bag.members must not be empty".into()));
                }
                for member in &section.members {
                    member
                        .config
                        .validate()
                        .map_err(|e| config_err(e.to_string()))?;
                    finetune_needed |= uses_finetune(&member.backend);
                }
            }
        }
        if finetune_needed && self.finetune.is_none() {
            return Err(config_err(
                "[finetune] section is required when a finetune backend is referenced".into(),
            ));
        }
        Ok(())
    }

    pub fn ensemble_config(&self) -> Option<EnsembleConfig> {
        self.bag.as_ref().map(|section| EnsembleConfig {
            members: section
                .members
                .iter()
                .map(|m| MemberSpec {
                    backend_id: m.backend.clone(),
                    config: m.config.clone(),
                })
                .collect(),
            aggregation: section.aggregation,
            base_seed: section.base_seed,
        })
    }

    /// Rebases every relative path in the config against `base`.
    pub fn rebase_paths(&mut self, base: &Path) {
        let rebase = |path: &mut PathBuf| {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        };
        rebase(&mut self.dataset.path);
        if let Some(p) = &mut self.clean.stopwords_path {
            rebase(p);
        }
        if let Some(p) = &mut self.balance.synonym_lexicon {
            rebase(p);
        }
        if let Some(t) = &mut self.balance.translation {
            for file in &mut t.dictionary_files {
                rebase(&mut file.path);
            }
            if let Some(p) = &mut t.cache_file {
                rebase(p);
            }
        }
        if let Some(p) = &mut self.tokenizer.assets_dir {
            rebase(p);
        }
        rebase(&mut self.output.dir);
        if let Some(f) = &mut self.finetune {
            rebase(&mut f.command);
            rebase(&mut f.encoder_dir);
            if let Some(p) = &mut f.work_dir {
                rebase(p);
            }
        }
    }
}
