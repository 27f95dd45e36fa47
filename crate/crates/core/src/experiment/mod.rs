//! Experiment orchestration: config-driven runs through the whole pipeline
//! with persisted, re-executable run records.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::{
    execute_plan, plan_balance, undersample, BackTranslationAugmenter, SynonymAugmenter,
    SynonymLexicon, TextAugmenter,
};
use crate::corpus::{load_dataset, LabeledDataset};
use crate::ensemble::{fit_ensemble, predict_ensemble, Aggregation, EnsembleConfig, MemberSpec};
use crate::metrics::{evaluate_labels, MetricReport};
use crate::models::{
    load_model, BackendRegistry, BaselineBackend, EpochLog, ProcessBackend, ProcessBackendConfig,
    TrainConfig, TrainedModel, BASELINE_BACKEND_ID,
};
use crate::preprocess::{clean_pipeline, load_stopwords, CleanConfig};
use crate::splitprep::{
    stratified_split, tokenize_batch, HashTokenizer, Tokenizer, WordPieceTokenizer,
};
use crate::translate::{
    translate_many, DictionaryBackend, EchoBackend, HttpBackend, HttpBackendConfig, PivotLanguage,
    TranslationBackend, TranslationCache, SOURCE_LANG,
};
use crate::tuner::{grid_search_parallel, TuneResult};

pub mod config;
pub mod report;

pub use config::{
    BalanceMode, BalanceSection, CleanSection, DatasetSection, ExperimentConfig, FinetuneSection,
    RunMode, TokenizerKind, TranslationBackendKind, TranslationSection,
};
pub use report::render_report;

/// Pipeline stages, in execution order; errors carry the stage they
/// happened in and the CLI maps stages to distinct exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Load,
    Clean,
    Balance,
    Split,
    Tokenize,
    Train,
    Tune,
    Bag,
    Evaluate,
    Report,
    Translate,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Clean => "clean",
            Stage::Balance => "balance",
            Stage::Split => "split",
            Stage::Tokenize => "tokenize",
            Stage::Train => "train",
            Stage::Tune => "tune",
            Stage::Bag => "bag",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Translate => "translate",
        }
    }

    /// Stable nonzero process exit code for failures in this stage.
    pub fn exit_code(&self) -> u8 {
        match self {
            Stage::Config => 2,
            Stage::Load => 3,
            Stage::Clean => 4,
            Stage::Balance => 5,
            Stage::Split => 6,
            Stage::Tokenize => 7,
            Stage::Train => 8,
            Stage::Tune => 9,
            Stage::Bag => 10,
            Stage::Evaluate => 11,
            Stage::Report => 12,
            Stage::Translate => 13,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("stage {stage}: {message}")]
pub struct ExperimentError {
    stage: Stage,
    message: String,
}

impl ExperimentError {
    pub fn stage(stage: Stage, message: impl Into<String>) -> Self {
        ExperimentError {
            stage,
            message: message.into(),
        }
    }

    pub fn stage_of(&self) -> Stage {
        self.stage
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

fn err_in<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> ExperimentError {
    move |e| ExperimentError::stage(stage, e.to_string())
}

/// Content fingerprints of every dataset the run saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFingerprints {
    pub loaded: String,
    pub cleaned: String,
    pub balanced: String,
    pub train: String,
    pub validation: String,
    pub test: String,
    pub encoded: String,
}

/// Mode-specific results carried by a run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RunOutcome {
    Train {
        backend_id: String,
        config: TrainConfig,
        log: EpochLog,
        selected_epoch: usize,
        validation_report: MetricReport,
        test_report: MetricReport,
    },
    Tune {
        backend_id: String,
        result: TuneResult,
    },
    Bag {
        member_backend_ids: Vec<String>,
        member_epochs: Vec<usize>,
        aggregation: Aggregation,
        validation_report: MetricReport,
        test_report: MetricReport,
    },
}

/// Persisted record of one completed run. Deterministic backends re-executed
/// from the snapshot reproduce the same metric artifacts byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub created_unix: u64,
    pub balance_mode: BalanceMode,
    pub config_snapshot: String,
    pub fingerprints: StageFingerprints,
    /// Records whose cleaned text came out empty and were dropped.
    pub cleaned_dropped: usize,
    pub outcome: RunOutcome,
}

impl RunRecord {
    pub fn path_in(out_dir: &Path, run_id: &str) -> PathBuf {
        out_dir.join("runs").join(run_id).join("run.json")
    }

    pub fn load(out_dir: &Path, run_id: &str) -> Result<RunRecord, ExperimentError> {
        let path = Self::path_in(out_dir, run_id);
        let content = std::fs::read_to_string(&path).map_err(|e| {
            ExperimentError::stage(
                Stage::Report,
                format!("unknown run {run_id}: {e} ({})", path.display()),
            )
        })?;
        serde_json::from_str(&content).map_err(err_in(Stage::Report))
    }
}

fn short_hash(content: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(content.as_bytes());
    let digest = hasher.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_clean_config(section: &config::CleanSection) -> Result<CleanConfig, ExperimentError> {
    let mut clean = CleanConfig::new();
    clean.remove_stopwords = section.remove_stopwords;
    clean.filter_alphabet = section.filter_alphabet;
    clean.lowercase = section.lowercase;
    let mut clean = clean
        .with_stage_order(section.stage_order)
        .map_err(err_in(Stage::Clean))?;
    if section.remove_stopwords {
        let path = section.stopwords_path.as_ref().ok_or_else(|| {
            ExperimentError::stage(
                Stage::Clean,
                "clean.stopwords_path is required when remove_stopwords is on",
            )
        })?;
        let words = load_stopwords(path).map_err(err_in(Stage::Clean))?;
        clean = clean.with_stopwords(words).map_err(err_in(Stage::Clean))?;
    }
    Ok(clean)
}

/// Cleans every record; records whose cleaned text is empty are dropped and
/// counted.
fn clean_dataset(
    dataset: &LabeledDataset,
    clean: &CleanConfig,
) -> Result<(LabeledDataset, usize), ExperimentError> {
    let mut records = Vec::with_capacity(dataset.len());
    let mut dropped = 0usize;
    for record in dataset.records() {
        let text = clean_pipeline(&record.text, clean);
        if text.trim().is_empty() {
            dropped += 1;
            continue;
        }
        let mut cleaned = record.clone();
        cleaned.text = text;
        records.push(cleaned);
    }
    let cleaned = LabeledDataset::from_records_detached(records).map_err(err_in(Stage::Clean))?;
    Ok((cleaned, dropped))
}

fn build_translation_backend(
    section: &config::TranslationSection,
) -> Result<Box<dyn TranslationBackend>, ExperimentError> {
    match section.backend {
        TranslationBackendKind::Echo => Ok(Box::new(EchoBackend)),
        TranslationBackendKind::Dictionary => {
            let backend_id = section
                .backend_id
                .clone()
                .unwrap_or_else(|| "dictionary".to_string());
            let mut backend = DictionaryBackend::new(backend_id);
            for file in &section.dictionary_files {
                backend
                    .load_table(&file.path, &file.source, &file.target)
                    .map_err(err_in(Stage::Translate))?;
            }
            Ok(Box::new(backend))
        }
        TranslationBackendKind::Http => {
            let endpoint = section
                .endpoint
                .clone()
                .expect("validated: http backend has an endpoint");
            let backend_id = section
                .backend_id
                .clone()
                .unwrap_or_else(|| format!("http:{endpoint}"));
            Ok(Box::new(HttpBackend::new(HttpBackendConfig {
                endpoint,
                api_key_env: section.api_key_env.clone(),
                timeout: std::time::Duration::from_secs(section.timeout_secs),
                backend_id,
            })))
        }
    }
}

fn translation_cache_path(config: &ExperimentConfig) -> PathBuf {
    config
        .balance
        .translation
        .as_ref()
        .and_then(|t| t.cache_file.clone())
        .unwrap_or_else(|| config.output.dir.join("translation_cache.jsonl"))
}

fn balance_dataset(
    config: &ExperimentConfig,
    input: &LabeledDataset,
) -> Result<LabeledDataset, ExperimentError> {
    match config.balance.mode {
        BalanceMode::None => Ok(input.clone()),
        BalanceMode::Undersample => {
            undersample(input, config.balance.seed).map_err(err_in(Stage::Balance))
        }
        BalanceMode::Augment => {
            let section = &config.balance;
            let translation = section.translation.as_ref();
            let backend_id_for_key = translation
                .map(|t| match t.backend {
                    TranslationBackendKind::Echo => "echo".to_string(),
                    TranslationBackendKind::Dictionary => t
                        .backend_id
                        .clone()
                        .unwrap_or_else(|| "dictionary".to_string()),
                    TranslationBackendKind::Http => t.backend_id.clone().unwrap_or_else(|| {
                        format!("http:{}", t.endpoint.clone().unwrap_or_default())
                    }),
                })
                .unwrap_or_default();

            // Balanced datasets are cached: back-translation is the expensive,
            // least reproducible stage.
            let balance_key = short_hash(&format!(
                "{}|{}|{}",
                input.fingerprint(),
                serde_json::to_string(section).expect("section serializes"),
                backend_id_for_key,
            ));
            let cache_dir = config.output.dir.join("cache");
            let cached_path = cache_dir.join(format!("balanced-{balance_key}.jsonl"));
            if cached_path.exists() {
                return LabeledDataset::read_jsonl(&cached_path).map_err(err_in(Stage::Balance));
            }

            let plan = plan_balance(input, section.target)
                .with_method_cycle(section.method_cycle.clone())
                .map_err(err_in(Stage::Balance))?;

            let cache_path = translation_cache_path(config);
            if let Some(parent) = cache_path.parent() {
                std::fs::create_dir_all(parent).map_err(err_in(Stage::Balance))?;
            }
            let translation_cache =
                TranslationCache::open(&cache_path).map_err(err_in(Stage::Translate))?;
            let backend = translation
                .map(build_translation_backend)
                .transpose()?
                .unwrap_or_else(|| Box::new(EchoBackend));
            let policy = translation.map(|t| t.retry.policy()).unwrap_or_default();

            let lexicon = section
                .synonym_lexicon
                .as_ref()
                .map(|path| SynonymLexicon::load(path))
                .transpose()
                .map_err(err_in(Stage::Balance))?
                .unwrap_or_default();

            let bt_en = BackTranslationAugmenter::new(
                PivotLanguage::English,
                backend.as_ref(),
                &translation_cache,
                policy.clone(),
            );
            let bt_ar = BackTranslationAugmenter::new(
                PivotLanguage::Arabic,
                backend.as_ref(),
                &translation_cache,
                policy,
            );
            let synonym = SynonymAugmenter::new(&lexicon, section.synonym_rate);
            let augmenters: Vec<&dyn TextAugmenter> = vec![&bt_en, &bt_ar, &synonym];

            let balanced = execute_plan(input, &plan, &augmenters, section.seed)
                .map_err(err_in(Stage::Balance))?;

            std::fs::create_dir_all(&cache_dir).map_err(err_in(Stage::Balance))?;
            balanced
                .write_jsonl(&cached_path)
                .map_err(err_in(Stage::Balance))?;
            Ok(balanced)
        }
    }
}

/// Balances a dataset using the config's balance and translation settings;
/// the standalone `balance` subcommand drives this directly.
pub fn balance_with_config(
    config: &ExperimentConfig,
    input: &LabeledDataset,
) -> Result<LabeledDataset, ExperimentError> {
    balance_dataset(config, input)
}

fn build_tokenizer(config: &ExperimentConfig) -> Result<Box<dyn Tokenizer>, ExperimentError> {
    match config.tokenizer.kind {
        TokenizerKind::Hash => Ok(Box::new(HashTokenizer)),
        TokenizerKind::Wordpiece => {
            let dir = config
                .tokenizer
                .assets_dir
                .as_ref()
                .expect("validated: wordpiece tokenizer has assets_dir");
            Ok(Box::new(
                WordPieceTokenizer::from_dir(dir, config.tokenizer.lowercase)
                    .map_err(err_in(Stage::Tokenize))?,
            ))
        }
    }
}

/// Backends available under this config: the baseline always, plus the
/// external-trainer bridge when a `[finetune]` section is present.
pub fn build_registry(config: &ExperimentConfig) -> BackendRegistry {
    let mut registry = BackendRegistry::new();
    registry.register(Box::new(BaselineBackend::new()));
    if let Some(section) = &config.finetune {
        registry.register(Box::new(ProcessBackend::new(ProcessBackendConfig {
            command: section.command.clone(),
            args: section.args.clone(),
            encoder_dir: section.encoder_dir.clone(),
            encoder_name: section.encoder_name.clone(),
            device: section.device.clone(),
            work_dir: section
                .work_dir
                .clone()
                .unwrap_or_else(|| config.output.dir.join("trainer-jobs")),
        })));
    }
    registry
}

/// Maps the short backend names used in config files onto registry ids.
pub fn resolve_backend_id(name: &str, config: &ExperimentConfig) -> String {
    match name {
        "baseline" => BASELINE_BACKEND_ID.to_string(),
        "finetune" => config
            .finetune
            .as_ref()
            .map(|f| format!("finetune:{}", f.encoder_name))
            .unwrap_or_else(|| name.to_string()),
        other => other.to_string(),
    }
}

fn evaluate_split(
    model: &dyn TrainedModel,
    split: &LabeledDataset,
) -> Result<MetricReport, ExperimentError> {
    let texts = split.texts();
    let predicted = model
        .predict_labels(&texts)
        .map_err(err_in(Stage::Evaluate))?;
    evaluate_labels(&split.labels(), &predicted).map_err(err_in(Stage::Evaluate))
}

/// Executes the configured pipeline end to end and persists the run record
/// and its artifacts under `<output.dir>/runs/<run_id>/`.
///
/// Run directories are content-addressed by the config snapshot hash;
/// re-running the same config rewrites the same directory, while a hash
/// collision with a different snapshot aborts instead of overwriting.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord, ExperimentError> {
    config.validate()?;
    let mode = config.mode()?;
    let snapshot = config.render();
    let run_id = short_hash(&snapshot);
    let run_dir = config.output.dir.join("runs").join(&run_id);
    let run_json = run_dir.join("run.json");
    if run_json.exists() {
        let existing: RunRecord = serde_json::from_str(
            &std::fs::read_to_string(&run_json).map_err(err_in(Stage::Config))?,
        )
        .map_err(err_in(Stage::Config))?;
        if existing.config_snapshot != snapshot {
            return Err(ExperimentError::stage(
                Stage::Config,
                format!("run directory {run_id} holds a different config snapshot"),
            ));
        }
    }
    let data_dir = run_dir.join("data");
    std::fs::create_dir_all(&data_dir).map_err(err_in(Stage::Config))?;

    // Load.
    let loaded = load_dataset(&config.dataset.path, &config.dataset.column_map())
        .map_err(err_in(Stage::Load))?;
    loaded
        .write_jsonl(&data_dir.join("loaded.jsonl"))
        .map_err(err_in(Stage::Load))?;

    // Clean and balance; augmentation normally runs on cleaned text, with a
    // flag to balance the raw text first instead.
    let clean = build_clean_config(&config.clean)?;
    let augment_raw = config.balance.augment_on_raw && config.balance.mode == BalanceMode::Augment;
    let (cleaned_fp, cleaned_dropped, balanced) = if augment_raw {
        let balanced_raw = balance_dataset(config, &loaded)?;
        let (cleaned, dropped) = clean_dataset(&balanced_raw, &clean)?;
        (cleaned.fingerprint(), dropped, cleaned)
    } else {
        let (cleaned, dropped) = clean_dataset(&loaded, &clean)?;
        let fp = cleaned.fingerprint();
        cleaned
            .write_jsonl(&data_dir.join("cleaned.jsonl"))
            .map_err(err_in(Stage::Clean))?;
        (fp, dropped, balance_dataset(config, &cleaned)?)
    };
    balanced
        .write_jsonl(&data_dir.join("balanced.jsonl"))
        .map_err(err_in(Stage::Balance))?;

    // Split.
    let ratios = config.split.ratios().map_err(err_in(Stage::Split))?;
    let (train, validation, test) =
        stratified_split(&balanced, ratios, config.split.seed).map_err(err_in(Stage::Split))?;
    for (split, name) in [
        (&train, "train"),
        (&validation, "validation"),
        (&test, "test"),
    ] {
        split
            .write_jsonl(&data_dir.join(format!("{name}.jsonl")))
            .map_err(err_in(Stage::Split))?;
    }

    // Tokenize: the feature-extraction stage produces the encoded batches
    // recorded in the run fingerprint; text-native backends keep consuming
    // the split text directly.
    let tokenizer = build_tokenizer(config)?;
    let mut encoded_digest = String::new();
    for split in [&train, &validation, &test] {
        let batch = tokenize_batch(
            &split.texts(),
            tokenizer.as_ref(),
            config.tokenizer.max_length,
        )
        .map_err(err_in(Stage::Tokenize))?;
        let bytes = serde_json::to_vec(&batch).map_err(err_in(Stage::Tokenize))?;
        encoded_digest.push_str(&sha_hex(&bytes));
        encoded_digest.push('|');
    }
    let encoded_fp = short_hash(&format!("{}|{encoded_digest}", tokenizer.vocabulary_id()));

    let registry = build_registry(config);

    // Mode dispatch.
    let outcome = match mode {
        RunMode::Train => {
            let section = config.train.as_ref().expect("mode checked");
            let backend_id = resolve_backend_id(&section.backend, config);
            let backend = registry.get(&backend_id).map_err(err_in(Stage::Train))?;
            let fit = backend
                .fit(&train, &validation, &section.config)
                .map_err(err_in(Stage::Train))?;
            fit.model
                .save(&run_dir.join("model"))
                .map_err(err_in(Stage::Train))?;
            report::write_curves(&run_dir.join("curves.csv"), &fit.log)
                .map_err(err_in(Stage::Train))?;
            let validation_report = evaluate_split(fit.model.as_ref(), &validation)?;
            let test_report = evaluate_split(fit.model.as_ref(), &test)?;
            report::write_run_metrics(&run_dir, &validation_report, &test_report)
                .map_err(err_in(Stage::Evaluate))?;
            RunOutcome::Train {
                backend_id,
                config: section.config.clone(),
                selected_epoch: fit.selected_epoch,
                log: fit.log,
                validation_report,
                test_report,
            }
        }
        RunMode::Tune => {
            let section = config.tune.as_ref().expect("mode checked");
            let backend_id = resolve_backend_id(&section.backend, config);
            let backend = registry.get(&backend_id).map_err(err_in(Stage::Tune))?;
            let result = grid_search_parallel(
                backend,
                &section.grid,
                &train,
                &validation,
                &section.base,
                section.base.seed,
                section.parallel_width,
            )
            .map_err(err_in(Stage::Tune))?;
            report::write_tuning_table(&run_dir.join("tuning_table.csv"), &backend_id, &result)
                .map_err(err_in(Stage::Tune))?;
            RunOutcome::Tune { backend_id, result }
        }
        RunMode::Bag => {
            let section = config.bag.as_ref().expect("mode checked");
            let ensemble_config = EnsembleConfig {
                members: section
                    .members
                    .iter()
                    .map(|m| MemberSpec {
                        backend_id: resolve_backend_id(&m.backend, config),
                        config: m.config.clone(),
                    })
                    .collect(),
                aggregation: section.aggregation,
                base_seed: section.base_seed,
            };
            let ensemble = fit_ensemble(&ensemble_config, &registry, &train, &validation)
                .map_err(err_in(Stage::Bag))?;
            for (index, member) in ensemble.members().iter().enumerate() {
                member
                    .save(&run_dir.join("models").join(format!("member-{index}")))
                    .map_err(err_in(Stage::Bag))?;
            }
            let validation_prediction = predict_ensemble(&ensemble, &validation.texts())
                .map_err(err_in(Stage::Evaluate))?;
            let validation_report =
                evaluate_labels(&validation.labels(), &validation_prediction.labels)
                    .map_err(err_in(Stage::Evaluate))?;
            let test_prediction =
                predict_ensemble(&ensemble, &test.texts()).map_err(err_in(Stage::Evaluate))?;
            let test_report = evaluate_labels(&test.labels(), &test_prediction.labels)
                .map_err(err_in(Stage::Evaluate))?;
            report::write_run_metrics(&run_dir, &validation_report, &test_report)
                .map_err(err_in(Stage::Evaluate))?;
            RunOutcome::Bag {
                member_backend_ids: ensemble_config
                    .members
                    .iter()
                    .map(|m| m.backend_id.clone())
                    .collect(),
                member_epochs: ensemble_config
                    .members
                    .iter()
                    .map(|m| m.config.epochs)
                    .collect(),
                aggregation: section.aggregation,
                validation_report,
                test_report,
            }
        }
    };

    let record = RunRecord {
        run_id: run_id.clone(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        balance_mode: config.balance.mode,
        config_snapshot: snapshot,
        fingerprints: StageFingerprints {
            loaded: loaded.fingerprint(),
            cleaned: cleaned_fp,
            balanced: balanced.fingerprint(),
            train: train.fingerprint(),
            validation: validation.fingerprint(),
            test: test.fingerprint(),
            encoded: encoded_fp,
        },
        cleaned_dropped,
        outcome,
    };
    std::fs::write(
        &run_json,
        serde_json::to_string_pretty(&record).expect("record serializes"),
    )
    .map_err(err_in(Stage::Config))?;
    Ok(record)
}

/// Loads a persisted model and evaluates it on a dataset file (JSON-lines
/// interchange format).
pub fn evaluate_model(
    model_dir: &Path,
    dataset_path: &Path,
) -> Result<MetricReport, ExperimentError> {
    let model = load_model(model_dir).map_err(err_in(Stage::Evaluate))?;
    let dataset = LabeledDataset::read_jsonl(dataset_path).map_err(err_in(Stage::Evaluate))?;
    evaluate_split(model.as_ref(), &dataset)
}

/// Statistics from warming the translation cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarmStats {
    pub texts: usize,
    pub cached_entries: usize,
}

/// Round-trips every cleaned text through the pivot so later augment runs
/// hit the cache only.
pub fn warm_translation_cache(
    config: &ExperimentConfig,
    pivot: PivotLanguage,
) -> Result<WarmStats, ExperimentError> {
    let section = config.balance.translation.as_ref().ok_or_else(|| {
        ExperimentError::stage(
            Stage::Translate,
            "config has no balance.translation section",
        )
    })?;
    let loaded = load_dataset(&config.dataset.path, &config.dataset.column_map())
        .map_err(err_in(Stage::Load))?;
    let clean = build_clean_config(&config.clean)?;
    let (cleaned, _) = clean_dataset(&loaded, &clean)?;

    let cache_path = translation_cache_path(config);
    if let Some(parent) = cache_path.parent() {
        std::fs::create_dir_all(parent).map_err(err_in(Stage::Translate))?;
    }
    let cache = TranslationCache::open(&cache_path).map_err(err_in(Stage::Translate))?;
    let backend = build_translation_backend(section)?;
    let policy = section.retry.policy();

    let texts = cleaned.texts();
    let outbound = translate_many(
        &texts,
        SOURCE_LANG,
        pivot.code(),
        backend.as_ref(),
        &cache,
        &policy,
        section.parallel_width,
    )
    .map_err(err_in(Stage::Translate))?;
    translate_many(
        &outbound,
        pivot.code(),
        SOURCE_LANG,
        backend.as_ref(),
        &cache,
        &policy,
        section.parallel_width,
    )
    .map_err(err_in(Stage::Translate))?;
    Ok(WarmStats {
        texts: texts.len(),
        cached_entries: cache.len(),
    })
}
