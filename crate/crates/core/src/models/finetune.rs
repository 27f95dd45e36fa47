//! Transformer fine-tuning behind the backend contract, bridged to an
//! external trainer process.
//!
//! No mature pure-Rust stack exists for fine-tuning the published Indonesian
//! encoders, so this backend drives a trainer executable over a small
//! JSON-lines protocol: the fit writes the splits and a request file, spawns
//! the trainer, and reads per-epoch events from its stdout. The repository
//! ships two trainers speaking the protocol: `tools/hf_trainer.py` (real
//! fine-tuning over locally downloaded encoder weights) and the
//! `emoflow-trainer-stub` binary (deterministic offline stand-in used by the
//! test suite).
//!
//! Protocol, version 1. Request file:
//!
//! ```json
//! {"schema_version":1,"mode":"train","encoder_dir":"...","encoder_name":"...",
//!  "device":"cpu","config":{...},"train_file":"...","validation_file":"...",
//!  "model_dir":"..."}
//! ```
//!
//! Trainer stdout, one JSON object per line:
//!
//! ```json
//! {"event":"epoch","epoch":1,"train_loss":0.9,"validation_loss":0.8,"validation_accuracy":0.55}
//! {"event":"trained","model_dir":"...","selected_epoch":1}
//! ```
//!
//! JSON has no representation for NaN or infinity, so trainers report a
//! non-finite loss as `null`; the bridge turns that into the
//! non-finite-loss error naming the epoch.
//!
//! Predict mode uses `{"mode":"predict","model_dir":...,"texts_file":...,
//! "output_file":...}` and the output file carries one
//! `{"probabilities":[...5 floats...]}` row per input text.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::corpus::{EmotionLabel, LabeledDataset};

use super::{
    check_splits, ClassifierBackend, EpochRow, FitOutcome, LabelProbs, ModelError, ModelMetadata,
    TrainConfig, TrainedModel,
};

pub const PROTOCOL_VERSION: u32 = 1;

static JOB_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Settings for the external trainer bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessBackendConfig {
    /// Trainer executable implementing the protocol.
    pub command: PathBuf,
    /// Arguments inserted before `--request <path>`.
    #[serde(default)]
    pub args: Vec<String>,
    /// Directory holding the pretrained encoder assets (downloaded
    /// out-of-band).
    pub encoder_dir: PathBuf,
    /// Encoder selector passed through to the trainer, e.g. an IndoBERT or
    /// DistilBERT identifier.
    pub encoder_name: String,
    /// Device selector passed through to the trainer ("cpu", "cuda:0", ...).
    #[serde(default = "default_device")]
    pub device: String,
    /// Scratch directory for job files and model outputs.
    pub work_dir: PathBuf,
}

fn default_device() -> String {
    "cpu".to_string()
}

/// Fine-tuning backend that delegates training and inference to the
/// configured trainer process.
pub struct ProcessBackend {
    config: ProcessBackendConfig,
    backend_id: String,
}

impl ProcessBackend {
    pub fn new(config: ProcessBackendConfig) -> Self {
        let backend_id = format!("finetune:{}", config.encoder_name);
        ProcessBackend { config, backend_id }
    }

    pub fn config(&self) -> &ProcessBackendConfig {
        &self.config
    }

    fn job_dir(&self) -> Result<PathBuf, ModelError> {
        let seq = JOB_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = self
            .config
            .work_dir
            .join(format!("job-{}-{seq}", std::process::id()));
        std::fs::create_dir_all(&dir).map_err(|e| ModelError::Persist {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(dir)
    }
}

#[derive(Serialize)]
struct TrainRequest<'a> {
    schema_version: u32,
    mode: &'static str,
    encoder_dir: &'a Path,
    encoder_name: &'a str,
    device: &'a str,
    config: &'a TrainConfig,
    train_file: &'a Path,
    validation_file: &'a Path,
    model_dir: &'a Path,
}

#[derive(Serialize)]
struct PredictRequest<'a> {
    schema_version: u32,
    mode: &'static str,
    model_dir: &'a Path,
    texts_file: &'a Path,
    output_file: &'a Path,
}

#[derive(Serialize, Deserialize)]
struct SplitRow<'a> {
    id: &'a str,
    text: &'a str,
    label: &'a str,
}

#[derive(Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum TrainerEvent {
    Epoch {
        epoch: usize,
        train_loss: Option<f64>,
        validation_loss: Option<f64>,
        validation_accuracy: f64,
    },
    Trained {
        model_dir: PathBuf,
        selected_epoch: usize,
    },
    Predicted {
        #[allow(dead_code)]
        count: usize,
    },
    Error {
        message: String,
    },
}

#[derive(Deserialize)]
struct ProbRow {
    probabilities: [f64; EmotionLabel::COUNT],
}

fn write_split(path: &Path, split: &LabeledDataset) -> Result<(), ModelError> {
    let mut out = String::new();
    for record in split.records() {
        let row = SplitRow {
            id: &record.id,
            text: &record.text,
            label: record.label.as_str(),
        };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| ModelError::Persist {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn run_trainer(
    command: &Path,
    args: &[String],
    request_path: &Path,
) -> Result<Vec<TrainerEvent>, ModelError> {
    let output = Command::new(command)
        .args(args)
        .arg("--request")
        .arg(request_path)
        .output()
        .map_err(|e| ModelError::Trainer {
            message: format!("failed to launch {}: {e}", command.display()),
        })?;
    let stdout = String::from_utf8_lossy(&output.stdout);
    let mut events = Vec::new();
    for line in stdout.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let event: TrainerEvent = serde_json::from_str(line).map_err(|e| ModelError::Trainer {
            message: format!("unparseable trainer event {line:?}: {e}"),
        })?;
        if let TrainerEvent::Error { message } = event {
            return Err(ModelError::Trainer { message });
        }
        events.push(event);
    }
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let tail: String = stderr.lines().rev().take(5).collect::<Vec<_>>().join(" | ");
        return Err(ModelError::Trainer {
            message: format!("trainer exited with {}: {tail}", output.status),
        });
    }
    Ok(events)
}

impl ClassifierBackend for ProcessBackend {
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

        let job = self.job_dir()?;
        let train_file = job.join("train.jsonl");
        let validation_file = job.join("validation.jsonl");
        let model_dir = job.join("model");
        write_split(&train_file, train)?;
        write_split(&validation_file, validation)?;

        let request = TrainRequest {
            schema_version: PROTOCOL_VERSION,
            mode: "train",
            encoder_dir: &self.config.encoder_dir,
            encoder_name: &self.config.encoder_name,
            device: &self.config.device,
            config,
            train_file: &train_file,
            validation_file: &validation_file,
            model_dir: &model_dir,
        };
        let request_path = job.join("request.json");
        std::fs::write(
            &request_path,
            serde_json::to_string_pretty(&request).expect("request serializes"),
        )
        .map_err(|e| ModelError::Persist {
            path: request_path.display().to_string(),
            message: e.to_string(),
        })?;

        let events = run_trainer(&self.config.command, &self.config.args, &request_path)?;
        let mut log: Vec<EpochRow> = Vec::new();
        let mut trained: Option<(PathBuf, usize)> = None;
        for event in events {
            match event {
                TrainerEvent::Epoch {
                    epoch,
                    train_loss,
                    validation_loss,
                    validation_accuracy,
                } => {
                    let (Some(train_loss), Some(validation_loss)) = (train_loss, validation_loss)
                    else {
                        return Err(ModelError::NonFiniteLoss { epoch });
                    };
                    if !train_loss.is_finite() || !validation_loss.is_finite() {
                        return Err(ModelError::NonFiniteLoss { epoch });
                    }
                    log.push(EpochRow {
                        epoch,
                        train_loss,
                        validation_loss,
                        validation_accuracy,
                    });
                }
                TrainerEvent::Trained {
                    model_dir,
                    selected_epoch,
                } => trained = Some((model_dir, selected_epoch)),
                TrainerEvent::Predicted { .. } => {}
                TrainerEvent::Error { .. } => unreachable!("handled in run_trainer"),
            }
        }
        let (model_dir, selected_epoch) = trained.ok_or_else(|| ModelError::Trainer {
            message: "trainer finished without a trained event".to_string(),
        })?;
        if log.is_empty() {
            return Err(ModelError::Trainer {
                message: "trainer reported no epochs".to_string(),
            });
        }
        if selected_epoch == 0 || selected_epoch > log.len() {
            return Err(ModelError::Trainer {
                message: format!(
                    "trainer selected epoch {selected_epoch} outside the {} reported epochs",
                    log.len()
                ),
            });
        }

        let metadata = ModelMetadata {
            backend_id: self.backend_id.clone(),
            config: config.clone(),
            dataset_fingerprint: train.fingerprint(),
        };
        Ok(FitOutcome {
            model: Box::new(ProcessModel {
                metadata,
                command: self.config.command.clone(),
                args: self.config.args.clone(),
                model_dir,
            }),
            log,
            selected_epoch,
        })
    }
}

/// Handle to a model trained by the external trainer; prediction shells back
/// out to the same executable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessModel {
    metadata: ModelMetadata,
    command: PathBuf,
    args: Vec<String>,
    model_dir: PathBuf,
}

impl ProcessModel {
    pub fn model_dir(&self) -> &Path {
        &self.model_dir
    }

    pub fn load(dir: &Path) -> Result<ProcessModel, ModelError> {
        let path = dir.join("process_model.json");
        let content = std::fs::read_to_string(&path).map_err(|e| ModelError::Persist {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&content).map_err(|e| ModelError::Persist {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

impl TrainedModel for ProcessModel {
    fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    fn predict_proba(&self, texts: &[String]) -> Result<Vec<LabelProbs>, ModelError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let seq = JOB_COUNTER.fetch_add(1, Ordering::Relaxed);
        let job = self.model_dir.join(format!("predict-{seq}"));
        std::fs::create_dir_all(&job).map_err(|e| ModelError::Persist {
            path: job.display().to_string(),
            message: e.to_string(),
        })?;
        let texts_file = job.join("texts.jsonl");
        let output_file = job.join("probabilities.jsonl");
        let mut body = String::new();
        for text in texts {
            body.push_str(
                &serde_json::to_string(&serde_json::json!({ "text": text }))
                    .expect("text row serializes"),
            );
            body.push('\n');
        }
        std::fs::write(&texts_file, body).map_err(|e| ModelError::Persist {
            path: texts_file.display().to_string(),
            message: e.to_string(),
        })?;

        let request = PredictRequest {
            schema_version: PROTOCOL_VERSION,
            mode: "predict",
            model_dir: &self.model_dir,
            texts_file: &texts_file,
            output_file: &output_file,
        };
        let request_path = job.join("request.json");
        std::fs::write(
            &request_path,
            serde_json::to_string_pretty(&request).expect("request serializes"),
        )
        .map_err(|e| ModelError::Persist {
            path: request_path.display().to_string(),
            message: e.to_string(),
        })?;

        run_trainer(&self.command, &self.args, &request_path)?;

        let content = std::fs::read_to_string(&output_file).map_err(|e| ModelError::Trainer {
            message: format!("trainer wrote no output file: {e}"),
        })?;
        let mut probs = Vec::with_capacity(texts.len());
        for line in content.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let row: ProbRow = serde_json::from_str(line).map_err(|e| ModelError::Trainer {
                message: format!("unparseable probability row {line:?}: {e}"),
            })?;
            probs.push(LabelProbs::new(row.probabilities)?);
        }
        if probs.len() != texts.len() {
            return Err(ModelError::Trainer {
                message: format!(
                    "trainer returned {} probability rows for {} texts",
                    probs.len(),
                    texts.len()
                ),
            });
        }
        Ok(probs)
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
            dir.join("process_model.json"),
            serde_json::to_string_pretty(self).expect("model handle serializes"),
        )
        .map_err(persist)
    }
}
