//! Classifier backends: the train/predict contract, a deterministic
//! bag-of-words baseline, a transformer fine-tuning bridge, and stub
//! backends for tests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EmotionLabel, LabeledDataset};

pub mod baseline;
pub mod finetune;
pub mod stub;

pub use baseline::{BaselineBackend, BaselineModel, BASELINE_BACKEND_ID};
pub use finetune::{ProcessBackend, ProcessBackendConfig, ProcessModel};
pub use stub::{ConstantModel, InjectedBackend};

/// Early-stopping settings; the monitored quantity is validation loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub enabled: bool,
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping {
            enabled: false,
            patience: 2,
        }
    }
}

/// Full hyperparameter bundle for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_probability: f64,
    pub weight_decay: f64,
    pub early_stopping: EarlyStopping,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 4,
            batch_size: 8,
            learning_rate: 2e-6,
            dropout_probability: 0.0,
            weight_decay: 0.0,
            early_stopping: EarlyStopping::default(),
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs < 1 {
            return Err(ModelError::InvalidConfig {
                message: "epochs must be at least 1".to_string(),
            });
        }
        if self.batch_size < 1 {
            return Err(ModelError::InvalidConfig {
                message: "batch_size must be at least 1".to_string(),
            });
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(ModelError::InvalidConfig {
                message: format!("learning_rate {} must be positive", self.learning_rate),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_probability) {
            return Err(ModelError::InvalidConfig {
                message: format!(
                    "dropout_probability {} must lie in [0, 1)",
                    self.dropout_probability
                ),
            });
        }
        if self.weight_decay < 0.0 {
            return Err(ModelError::InvalidConfig {
                message: format!("weight_decay {} must be non-negative", self.weight_decay),
            });
        }
        Ok(())
    }
}

/// One completed training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

pub type EpochLog = Vec<EpochRow>;

/// Probability vector over the five labels: non-negative, summing to 1
/// within 1e-6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct LabelProbs([f64; EmotionLabel::COUNT]);

impl LabelProbs {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(values: [f64; EmotionLabel::COUNT]) -> Result<Self, ModelError> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::InvalidProbabilities {
                message: format!("probabilities must be finite and non-negative, got {values:?}"),
            });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(ModelError::InvalidProbabilities {
                message: format!("probabilities sum to {sum}, expected 1"),
            });
        }
        Ok(LabelProbs(values))
    }

    pub fn uniform() -> Self {
        LabelProbs([1.0 / EmotionLabel::COUNT as f64; EmotionLabel::COUNT])
    }

    pub fn values(&self) -> &[f64; EmotionLabel::COUNT] {
        &self.0
    }

    pub fn get(&self, label: EmotionLabel) -> f64 {
        self.0[label.index()]
    }

    /// Highest-probability label; ties resolve to the earlier label in the
    /// fixed label order.
    pub fn argmax(&self) -> EmotionLabel {
        let mut best = 0;
        for idx in 1..self.0.len() {
            if self.0[idx] > self.0[best] {
                best = idx;
            }
        }
        EmotionLabel::from_index(best).expect("index in range")
    }
}

impl TryFrom<[f64; 5]> for LabelProbs {
    type Error = ModelError;

    fn try_from(values: [f64; 5]) -> Result<Self, Self::Error> {
        LabelProbs::new(values)
    }
}

impl From<LabelProbs> for [f64; 5] {
    fn from(probs: LabelProbs) -> Self {
        probs.0
    }
}

/// Identity of a trained model: who trained it, with what settings, on what
/// data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub backend_id: String,
    pub config: TrainConfig,
    pub dataset_fingerprint: String,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{which} split is empty")]
    EmptySplit { which: &'static str },
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {message}")]
    InvalidConfig { message: String },
    #[error("invalid probabilities: {message}")]
    InvalidProbabilities { message: String },
    #[error("trainer process failed: {message}")]
    Trainer { message: String },
    #[error("model persistence at {path}: {message}")]
    Persist { path: String, message: String },
    #[error("unknown backend {backend_id:?}")]
    UnknownBackend { backend_id: String },
}

/// Result of a fit: the trained model, the per-epoch log, and which epoch's
/// weights the model carries (the best epoch under early stopping, otherwise
/// the last).
pub struct FitOutcome {
    pub model: Box<dyn TrainedModel>,
    pub log: EpochLog,
    pub selected_epoch: usize,
}

impl FitOutcome {
    /// Log row for the epoch whose weights were kept.
    pub fn selected_row(&self) -> EpochRow {
        self.log[self.selected_epoch - 1]
    }
}

impl std::fmt::Debug for FitOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FitOutcome")
            .field("backend_id", &self.model.metadata().backend_id)
            .field("epochs", &self.log.len())
            .field("selected_epoch", &self.selected_epoch)
            .finish()
    }
}

/// Pluggable train contract.
pub trait ClassifierBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn fit(
        &self,
        train: &LabeledDataset,
        validation: &LabeledDataset,
        config: &TrainConfig,
    ) -> Result<FitOutcome, ModelError>;
}

/// A trained classifier: per-text probability vectors plus metadata, and
/// persistence into a run directory.
pub trait TrainedModel: Send + Sync {
    fn metadata(&self) -> &ModelMetadata;
    fn predict_proba(&self, texts: &[String]) -> Result<Vec<LabelProbs>, ModelError>;
    fn save(&self, dir: &Path) -> Result<(), ModelError>;

    fn predict_labels(&self, texts: &[String]) -> Result<Vec<EmotionLabel>, ModelError> {
        Ok(self
            .predict_proba(texts)?
            .into_iter()
            .map(|p| p.argmax())
            .collect())
    }
}

/// Named backends available to the tuner, ensembles and the experiment
/// runner.
#[derive(Default)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Box<dyn ClassifierBackend>>,
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, backend: Box<dyn ClassifierBackend>) {
        self.backends
            .insert(backend.backend_id().to_string(), backend);
    }

    pub fn get(&self, backend_id: &str) -> Result<&dyn ClassifierBackend, ModelError> {
        self.backends
            .get(backend_id)
            .map(Box::as_ref)
            .ok_or_else(|| ModelError::UnknownBackend {
                backend_id: backend_id.to_string(),
            })
    }

    pub fn ids(&self) -> Vec<&str> {
        self.backends.keys().map(String::as_str).collect()
    }
}

/// Reloads a persisted model from its save directory, dispatching on the
/// backend id recorded in `metadata.json`.
pub fn load_model(dir: &Path) -> Result<Box<dyn TrainedModel>, ModelError> {
    let meta_path = dir.join("metadata.json");
    let metadata: ModelMetadata =
        serde_json::from_str(&std::fs::read_to_string(&meta_path).map_err(|e| {
            ModelError::Persist {
                path: meta_path.display().to_string(),
                message: e.to_string(),
            }
        })?)
        .map_err(|e| ModelError::Persist {
            path: meta_path.display().to_string(),
            message: e.to_string(),
        })?;
    if metadata.backend_id == baseline::BASELINE_BACKEND_ID {
        Ok(Box::new(BaselineModel::load(dir)?))
    } else if metadata.backend_id.starts_with("finetune:") {
        Ok(Box::new(ProcessModel::load(dir)?))
    } else {
        Err(ModelError::UnknownBackend {
            backend_id: metadata.backend_id,
        })
    }
}

pub(crate) fn check_splits(
    train: &LabeledDataset,
    validation: &LabeledDataset,
) -> Result<(), ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptySplit { which: "train" });
    }
    if validation.is_empty() {
        return Err(ModelError::EmptySplit {
            which: "validation",
        });
    }
    Ok(())
}

/// Tracks the best validation loss and signals when `patience` epochs pass
/// without improvement.
pub(crate) struct EarlyStopTracker {
    best_loss: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopTracker {
    pub(crate) fn new() -> Self {
        EarlyStopTracker {
            best_loss: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records an epoch's validation loss; returns true when training should
    /// stop.
    pub(crate) fn observe(&mut self, epoch: usize, loss: f64, patience: usize) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= patience
    }

    pub(crate) fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}
