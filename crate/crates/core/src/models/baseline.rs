//! Deterministic bag-of-words baseline: a multinomial generative classifier
//! with additive smoothing, trained in closed form.
//!
//! The baseline exists so that every pipeline property is testable at desk
//! scale with bit-reproducible results. Tokens are whitespace-split as-is;
//! case handling belongs to the cleaning pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{EmotionLabel, LabeledDataset};

use super::{
    check_splits, ClassifierBackend, EarlyStopTracker, EpochRow, FitOutcome, LabelProbs,
    ModelError, ModelMetadata, TrainedModel,
};

pub const BASELINE_BACKEND_ID: &str = "bow-baseline";
const SMOOTHING: f64 = 1.0;

/// Closed-form bag-of-words backend.
#[derive(Debug, Clone, Default)]
pub struct BaselineBackend;

impl BaselineBackend {
    pub fn new() -> Self {
        BaselineBackend
    }
}

/// Trained counts: per-label document and token totals plus per-word token
/// counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    metadata: ModelMetadata,
    documents: [u64; EmotionLabel::COUNT],
    token_totals: [u64; EmotionLabel::COUNT],
    word_counts: BTreeMap<String, [u64; EmotionLabel::COUNT]>,
}

impl BaselineModel {
    fn train(train: &LabeledDataset, metadata: ModelMetadata) -> Self {
        let mut documents = [0u64; EmotionLabel::COUNT];
        let mut token_totals = [0u64; EmotionLabel::COUNT];
        let mut word_counts: BTreeMap<String, [u64; EmotionLabel::COUNT]> = BTreeMap::new();
        for record in train.records() {
            let class = record.label.index();
            documents[class] += 1;
            for token in record.text.split_whitespace() {
                token_totals[class] += 1;
                word_counts.entry(token.to_string()).or_default()[class] += 1;
            }
        }
        BaselineModel {
            metadata,
            documents,
            token_totals,
            word_counts,
        }
    }

    fn vocabulary_size(&self) -> usize {
        self.word_counts.len()
    }

    /// Smoothed log-likelihood of a known-vocabulary token under a class.
    fn log_likelihood(&self, counts: &[u64; EmotionLabel::COUNT], class: usize) -> f64 {
        let numerator = counts[class] as f64 + SMOOTHING;
        let denominator =
            self.token_totals[class] as f64 + SMOOTHING * self.vocabulary_size() as f64;
        (numerator / denominator).ln()
    }

    fn posterior(&self, text: &str) -> LabelProbs {
        let total_documents: u64 = self.documents.iter().sum();
        let mut scores = [f64::NEG_INFINITY; EmotionLabel::COUNT];
        for (class, slot) in scores.iter_mut().enumerate() {
            if self.documents[class] == 0 {
                continue;
            }
            let mut score = (self.documents[class] as f64 / total_documents as f64).ln();
            for token in text.split_whitespace() {
                // Tokens outside the training vocabulary carry no signal.
                if let Some(counts) = self.word_counts.get(token) {
                    score += self.log_likelihood(counts, class);
                }
            }
            *slot = score;
        }
        softmax(&scores)
    }

    /// Smoothed posterior probability of the record's own label; used for
    /// the loss curves.
    fn mean_negative_log_likelihood(&self, split: &LabeledDataset) -> f64 {
        let total: f64 = split
            .records()
            .iter()
            .map(|record| {
                let probs = self.posterior(&record.text);
                -probs.get(record.label).ln()
            })
            .sum();
        total / split.len() as f64
    }

    fn accuracy(&self, split: &LabeledDataset) -> f64 {
        let correct = split
            .records()
            .iter()
            .filter(|record| self.posterior(&record.text).argmax() == record.label)
            .count();
        correct as f64 / split.len() as f64
    }

    /// Reads a model saved by [`TrainedModel::save`].
    pub fn load(dir: &Path) -> Result<BaselineModel, ModelError> {
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

        let counts_path = dir.join("counts.tsv");
        let content = std::fs::read_to_string(&counts_path).map_err(|e| ModelError::Persist {
            path: counts_path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut documents = [0u64; EmotionLabel::COUNT];
        let mut token_totals = [0u64; EmotionLabel::COUNT];
        let mut word_counts: BTreeMap<String, [u64; EmotionLabel::COUNT]> = BTreeMap::new();
        let bad_line = |line: usize, why: &str| ModelError::Persist {
            path: counts_path.display().to_string(),
            message: format!("line {line}: {why}"),
        };
        for (idx, line) in content.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["label", name, docs, tokens] => {
                    let label = EmotionLabel::parse(name)
                        .map_err(|_| bad_line(idx + 1, "unknown label"))?;
                    documents[label.index()] = docs
                        .parse()
                        .map_err(|_| bad_line(idx + 1, "bad document count"))?;
                    token_totals[label.index()] = tokens
                        .parse()
                        .map_err(|_| bad_line(idx + 1, "bad token count"))?;
                }
                ["count", name, word, count] => {
                    let label = EmotionLabel::parse(name)
                        .map_err(|_| bad_line(idx + 1, "unknown label"))?;
                    let parsed: u64 = count
                        .parse()
                        .map_err(|_| bad_line(idx + 1, "bad word count"))?;
                    word_counts.entry(word.to_string()).or_default()[label.index()] = parsed;
                }
                _ => return Err(bad_line(idx + 1, "unrecognized row kind")),
            }
        }
        Ok(BaselineModel {
            metadata,
            documents,
            token_totals,
            word_counts,
        })
    }
}

fn softmax(scores: &[f64; EmotionLabel::COUNT]) -> LabelProbs {
    let max = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut values = [0.0; EmotionLabel::COUNT];
    let mut sum = 0.0;
    for (idx, &score) in scores.iter().enumerate() {
        if score.is_finite() {
            values[idx] = (score - max).exp();
            sum += values[idx];
        }
    }
    for value in &mut values {
        *value /= sum;
    }
    LabelProbs::new(values).expect("softmax output is a distribution")
}

impl ClassifierBackend for BaselineBackend {
    fn backend_id(&self) -> &str {
        BASELINE_BACKEND_ID
    }

    fn fit(
        &self,
        train: &LabeledDataset,
        validation: &LabeledDataset,
        config: &super::TrainConfig,
    ) -> Result<FitOutcome, ModelError> {
        config.validate()?;
        check_splits(train, validation)?;

        let metadata = ModelMetadata {
            backend_id: BASELINE_BACKEND_ID.to_string(),
            config: config.clone(),
            dataset_fingerprint: train.fingerprint(),
        };
        let model = BaselineModel::train(train, metadata);

        // Closed-form training: every epoch re-evaluates the same counts, so
        // the log rows are identical and early stopping sees a flat curve.
        let train_loss = model.mean_negative_log_likelihood(train);
        let validation_loss = model.mean_negative_log_likelihood(validation);
        let validation_accuracy = model.accuracy(validation);

        let mut log = Vec::new();
        let mut tracker = EarlyStopTracker::new();
        let mut selected_epoch = 0;
        for epoch in 1..=config.epochs {
            if !train_loss.is_finite() || !validation_loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            log.push(EpochRow {
                epoch,
                train_loss,
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

        Ok(FitOutcome {
            model: Box::new(model),
            log,
            selected_epoch,
        })
    }
}

impl TrainedModel for BaselineModel {
    fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    fn predict_proba(&self, texts: &[String]) -> Result<Vec<LabelProbs>, ModelError> {
        Ok(texts.iter().map(|text| self.posterior(text)).collect())
    }

    fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let persist_err = |path: &Path, e: std::io::Error| ModelError::Persist {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| persist_err(dir, e))?;

        let meta_path = dir.join("metadata.json");
        std::fs::write(
            &meta_path,
            serde_json::to_string_pretty(&self.metadata).expect("metadata serializes"),
        )
        .map_err(|e| persist_err(&meta_path, e))?;

        let mut table = String::from("# bow-baseline counts v1\n");
        for label in EmotionLabel::ALL {
            table.push_str(&format!(
                "label\t{}\t{}\t{}\n",
                label.as_str(),
                self.documents[label.index()],
                self.token_totals[label.index()]
            ));
        }
        for (word, counts) in &self.word_counts {
            for label in EmotionLabel::ALL {
                let count = counts[label.index()];
                if count > 0 {
                    table.push_str(&format!("count\t{}\t{}\t{}\n", label.as_str(), word, count));
                }
            }
        }
        let counts_path = dir.join("counts.tsv");
        std::fs::write(&counts_path, table).map_err(|e| persist_err(&counts_path, e))
    }
}
