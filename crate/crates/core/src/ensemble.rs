//! Bootstrap-bagging ensembles over classifier members with soft or hard
//! vote aggregation.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, EmotionLabel, LabeledDataset, Provenance, ReviewRecord};
use crate::models::{BackendRegistry, LabelProbs, ModelError, TrainConfig, TrainedModel};

/// Vote rule for combining member predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Arithmetic mean of member probability vectors.
    #[default]
    Soft,
    /// Majority over member argmax labels; ties resolve in fixed label
    /// order.
    Hard,
}

/// One ensemble member: which backend trains it and with what settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub backend_id: String,
    pub config: TrainConfig,
}

/// Ensemble definition. Member `i` trains on a fresh bootstrap sample drawn
/// with seed `base_seed + i`, and its training seed is derived the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: Vec<MemberSpec>,
    #[serde(default)]
    pub aggregation: Aggregation,
    pub base_seed: u64,
}

impl EnsembleConfig {
    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.members.is_empty() {
            return Err(EnsembleError::NoMembers);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble needs at least one member")]
    NoMembers,
    #[error("cannot bootstrap an empty training set")]
    EmptyTrain,
    #[error("member {index} failed to train: {source}")]
    MemberFailed {
        index: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Uniform sample with replacement of the full training-set size. Draws get
/// fresh ids and provenance pointing at the drawn source record.
pub fn bootstrap_sample(
    train: &LabeledDataset,
    seed: u64,
) -> Result<LabeledDataset, EnsembleError> {
    if train.is_empty() {
        return Err(EnsembleError::EmptyTrain);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let n = train.len();
    let mut records = Vec::with_capacity(n);
    for draw in 0..n {
        let source = &train.records()[rng.random_range(0..n)];
        records.push(ReviewRecord {
            id: format!("{}#b{draw}", source.id),
            text: source.text.clone(),
            label: source.label,
            provenance: Provenance::Resampled {
                source_id: source.id.clone(),
            },
        });
    }
    Ok(LabeledDataset::from_records_detached(records)?)
}

/// Trained bagging ensemble.
pub struct BaggedEnsemble {
    members: Vec<Box<dyn TrainedModel>>,
    config: EnsembleConfig,
}

impl std::fmt::Debug for BaggedEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BaggedEnsemble")
            .field("members", &self.members.len())
            .field("aggregation", &self.config.aggregation)
            .finish()
    }
}

impl BaggedEnsemble {
    pub fn from_members(
        members: Vec<Box<dyn TrainedModel>>,
        config: EnsembleConfig,
    ) -> Result<Self, EnsembleError> {
        if members.is_empty() {
            return Err(EnsembleError::NoMembers);
        }
        Ok(BaggedEnsemble { members, config })
    }

    pub fn members(&self) -> &[Box<dyn TrainedModel>] {
        &self.members
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Trains every member on its own bootstrap resample of `train`.
pub fn fit_ensemble(
    config: &EnsembleConfig,
    registry: &BackendRegistry,
    train: &LabeledDataset,
    validation: &LabeledDataset,
) -> Result<BaggedEnsemble, EnsembleError> {
    config.validate()?;
    let mut members: Vec<Box<dyn TrainedModel>> = Vec::with_capacity(config.members.len());
    for (index, member) in config.members.iter().enumerate() {
        let backend = registry.get(&member.backend_id)?;
        let member_seed = config.base_seed + index as u64;
        let member_config = TrainConfig {
            seed: member_seed,
            ..member.config.clone()
        };
        let sample = bootstrap_sample(train, member_seed)?;
        let outcome = backend
            .fit(&sample, validation, &member_config)
            .map_err(|source| EnsembleError::MemberFailed { index, source })?;
        members.push(outcome.model);
    }
    BaggedEnsemble::from_members(members, config.clone())
}

/// Predicted labels plus the aggregated probability vectors behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub labels: Vec<EmotionLabel>,
    pub probabilities: Vec<LabelProbs>,
}

/// Aggregates member predictions in fixed member order.
///
/// Soft mode averages probability vectors and takes the argmax. Hard mode
/// counts member argmax votes, reports vote shares as the aggregated vector,
/// and resolves ties to the earliest label in the fixed order.
pub fn predict_ensemble(
    ensemble: &BaggedEnsemble,
    texts: &[String],
) -> Result<EnsemblePrediction, EnsembleError> {
    let member_probs: Vec<Vec<LabelProbs>> = ensemble
        .members
        .iter()
        .map(|m| m.predict_proba(texts))
        .collect::<Result<_, _>>()?;
    let n = ensemble.len() as f64;

    let mut labels = Vec::with_capacity(texts.len());
    let mut probabilities = Vec::with_capacity(texts.len());
    for text_idx in 0..texts.len() {
        let aggregated = match ensemble.config.aggregation {
            Aggregation::Soft => {
                let mut mean = [0.0; EmotionLabel::COUNT];
                for probs in &member_probs {
                    for (slot, value) in mean.iter_mut().zip(probs[text_idx].values()) {
                        *slot += value;
                    }
                }
                for slot in &mut mean {
                    *slot /= n;
                }
                LabelProbs::new(mean)?
            }
            Aggregation::Hard => {
                let mut votes = [0usize; EmotionLabel::COUNT];
                for probs in &member_probs {
                    votes[probs[text_idx].argmax().index()] += 1;
                }
                let mut shares = [0.0; EmotionLabel::COUNT];
                for (slot, &count) in shares.iter_mut().zip(&votes) {
                    *slot = count as f64 / n;
                }
                LabelProbs::new(shares)?
            }
        };
        labels.push(aggregated.argmax());
        probabilities.push(aggregated);
    }
    Ok(EnsemblePrediction {
        labels,
        probabilities,
    })
}
