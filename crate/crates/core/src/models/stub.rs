//! Stub backends and models for exercising the tuner, ensembles and the
//! experiment runner without real training.

use std::path::Path;

use crate::corpus::LabeledDataset;

use super::{
    check_splits, ClassifierBackend, EarlyStopTracker, EpochRow, FitOutcome, LabelProbs,
    ModelError, ModelMetadata, TrainConfig, TrainedModel,
};

/// A trained model that returns the same probability vector for every text.
#[derive(Debug, Clone)]
pub struct ConstantModel {
    metadata: ModelMetadata,
    probs: LabelProbs,
}

impl ConstantModel {
    pub fn new(backend_id: impl Into<String>, probs: LabelProbs) -> Self {
        ConstantModel {
            metadata: ModelMetadata {
                backend_id: backend_id.into(),
                config: TrainConfig::default(),
                dataset_fingerprint: String::new(),
            },
            probs,
        }
    }

    fn with_metadata(metadata: ModelMetadata, probs: LabelProbs) -> Self {
        ConstantModel { metadata, probs }
    }
}

impl TrainedModel for ConstantModel {
    fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    fn predict_proba(&self, texts: &[String]) -> Result<Vec<LabelProbs>, ModelError> {
        Ok(vec![self.probs; texts.len()])
    }

    fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let persist = |e: std::io::Error| ModelError::Persist {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(persist)?;
        std::fs::write(
            dir.join("metadata.json"),
            serde_json::to_string_pretty(&self.metadata).expect("metadata serializes"),
        )
        .map_err(persist)?;
        std::fs::write(
            dir.join("probs.json"),
            serde_json::to_string(&self.probs).expect("probs serialize"),
        )
        .map_err(persist)
    }
}

/// Evaluation scores injected as a function of the training configuration.
pub type EvalFn = dyn Fn(&TrainConfig) -> (f64, f64) + Send + Sync;

/// Predicate selecting configurations whose fits should fail.
pub type FailPredicate = dyn Fn(&TrainConfig) -> bool + Send + Sync;

/// Backend whose validation loss/accuracy are a pure function of the config.
///
/// Fits emit one epoch row per epoch with the injected scores, honor early
/// stopping, and produce a [`ConstantModel`].
pub struct InjectedBackend {
    backend_id: String,
    eval: Box<EvalFn>,
    probs: LabelProbs,
    fail_when: Option<Box<FailPredicate>>,
}

impl InjectedBackend {
    pub fn new(
        backend_id: impl Into<String>,
        eval: impl Fn(&TrainConfig) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        InjectedBackend {
            backend_id: backend_id.into(),
            eval: Box::new(eval),
            probs: LabelProbs::uniform(),
            fail_when: None,
        }
    }

    /// Fixed probability vector the trained stub model will emit.
    pub fn with_probs(mut self, probs: LabelProbs) -> Self {
        self.probs = probs;
        self
    }

    /// Makes fits fail for configurations matching the predicate.
    pub fn failing_when(
        mut self,
        predicate: impl Fn(&TrainConfig) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.fail_when = Some(Box::new(predicate));
        self
    }
}

impl ClassifierBackend for InjectedBackend {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn fit(
        &self,
        train: &LabeledDataset,
        validation: &LabeledDataset,
        config: &TrainConfig,
    ) -> Result<FitOutcome, ModelError> {
        config.validate()?;
        check_splits(train, validation)?;
        if let Some(predicate) = &self.fail_when {
            if predicate(config) {
                return Err(ModelError::Trainer {
                    message: format!("injected failure for config {config:?}"),
                });
            }
        }
        let (validation_loss, validation_accuracy) = (self.eval)(config);
        let mut log = Vec::new();
        let mut tracker = EarlyStopTracker::new();
        let mut selected_epoch = 0;
        for epoch in 1..=config.epochs {
            if !validation_loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            log.push(EpochRow {
                epoch,
                train_loss: validation_loss,
                validation_loss,
                validation_accuracy,
            });
            selected_epoch = epoch;
            if config.early_stopping.enabled
                && tracker.observe(epoch, validation_loss, config.early_stopping.patience)
            {
                selected_epoch = tracker.best_epoch();
                break;
            }
        }
        if config.early_stopping.enabled {
            selected_epoch = tracker.best_epoch();
        }
        let metadata = ModelMetadata {
            backend_id: self.backend_id.clone(),
            config: config.clone(),
            dataset_fingerprint: train.fingerprint(),
        };
        Ok(FitOutcome {
            model: Box::new(ConstantModel::with_metadata(metadata, self.probs)),
            log,
            selected_epoch,
        })
    }
}
