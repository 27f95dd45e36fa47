//! Deterministic trainer speaking the external-trainer protocol.
//!
//! Stands in for a real fine-tuning process so the whole orchestration stack
//! (process backend, tuner, ensembles, experiment runner) can run offline.
//! Training fits the bag-of-words baseline on the request's splits and saves
//! it under the requested model directory; predict mode reloads it.
//!
//! Two encoder names trigger failure behaviors for tests: `emit-nan` reports
//! a non-finite epoch loss, and `fail` reports a trainer error and exits
//! nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Deserialize;

use emoflow_core::corpus::{EmotionLabel, LabeledDataset, ReviewRecord};
use emoflow_core::models::{
    BaselineBackend, BaselineModel, ClassifierBackend, TrainConfig, TrainedModel,
};

#[derive(Deserialize)]
struct Request {
    #[allow(dead_code)]
    schema_version: u32,
    mode: String,
    encoder_name: Option<String>,
    config: Option<TrainConfig>,
    train_file: Option<PathBuf>,
    validation_file: Option<PathBuf>,
    model_dir: Option<PathBuf>,
    texts_file: Option<PathBuf>,
    output_file: Option<PathBuf>,
}

#[derive(Deserialize)]
struct SplitRow {
    id: String,
    text: String,
    label: String,
}

#[derive(Deserialize)]
struct TextRow {
    text: String,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            println!(
                "{}",
                serde_json::json!({ "event": "error", "message": message })
            );
            ExitCode::from(3)
        }
    }
}

fn run() -> Result<(), String> {
    let mut args = std::env::args().skip(1);
    let mut request_path = None;
    while let Some(arg) = args.next() {
        if arg == "--request" {
            request_path = args.next();
        }
    }
    let request_path = request_path.ok_or("usage: emoflow-trainer-stub --request <path>")?;
    let raw = std::fs::read_to_string(&request_path)
        .map_err(|e| format!("cannot read request {request_path}: {e}"))?;
    let request: Request =
        serde_json::from_str(&raw).map_err(|e| format!("invalid request json: {e}"))?;

    match request.mode.as_str() {
        "train" => train(request),
        "predict" => predict(request),
        other => Err(format!("unknown mode {other:?}")),
    }
}

fn load_split(path: &Path) -> Result<LabeledDataset, String> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut records = Vec::new();
    for line in content.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let row: SplitRow =
            serde_json::from_str(line).map_err(|e| format!("bad split row {line:?}: {e}"))?;
        let label = EmotionLabel::parse(&row.label).map_err(|e| e.to_string())?;
        records.push(ReviewRecord::original(row.id, row.text, label));
    }
    LabeledDataset::from_records_detached(records).map_err(|e| e.to_string())
}

fn train(request: Request) -> Result<(), String> {
    match request.encoder_name.as_deref() {
        Some("fail") => return Err("requested failure".to_string()),
        Some("emit-nan") => {
            // Non-finite losses travel as null per the protocol.
            println!(
                "{}",
                serde_json::json!({
                    "event": "epoch",
                    "epoch": 1,
                    "train_loss": null,
                    "validation_loss": null,
                    "validation_accuracy": 0.0,
                })
            );
            println!(
                "{}",
                serde_json::json!({
                    "event": "trained",
                    "model_dir": request.model_dir,
                    "selected_epoch": 1,
                })
            );
            return Ok(());
        }
        _ => {}
    }

    let train_file = request.train_file.ok_or("train request lacks train_file")?;
    let validation_file = request
        .validation_file
        .ok_or("train request lacks validation_file")?;
    let model_dir = request.model_dir.ok_or("train request lacks model_dir")?;
    let config = request.config.ok_or("train request lacks config")?;

    let train_split = load_split(&train_file)?;
    let validation_split = load_split(&validation_file)?;
    let outcome = BaselineBackend::new()
        .fit(&train_split, &validation_split, &config)
        .map_err(|e| e.to_string())?;
    for row in &outcome.log {
        println!(
            "{}",
            serde_json::json!({
                "event": "epoch",
                "epoch": row.epoch,
                "train_loss": row.train_loss,
                "validation_loss": row.validation_loss,
                "validation_accuracy": row.validation_accuracy,
            })
        );
    }
    outcome.model.save(&model_dir).map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::json!({
            "event": "trained",
            "model_dir": model_dir,
            "selected_epoch": outcome.selected_epoch,
        })
    );
    Ok(())
}

fn predict(request: Request) -> Result<(), String> {
    let model_dir = request.model_dir.ok_or("predict request lacks model_dir")?;
    let texts_file = request
        .texts_file
        .ok_or("predict request lacks texts_file")?;
    let output_file = request
        .output_file
        .ok_or("predict request lacks output_file")?;

    let model = BaselineModel::load(&model_dir).map_err(|e| e.to_string())?;
    let content = std::fs::read_to_string(&texts_file)
        .map_err(|e| format!("cannot read {}: {e}", texts_file.display()))?;
    let mut texts = Vec::new();
    for line in content.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let row: TextRow =
            serde_json::from_str(line).map_err(|e| format!("bad text row {line:?}: {e}"))?;
        texts.push(row.text);
    }
    let probs = model.predict_proba(&texts).map_err(|e| e.to_string())?;
    let mut out = String::new();
    for p in &probs {
        out.push_str(
            &serde_json::to_string(&serde_json::json!({ "probabilities": p.values() }))
                .expect("row serializes"),
        );
        out.push('\n');
    }
    std::fs::write(&output_file, out)
        .map_err(|e| format!("cannot write {}: {e}", output_file.display()))?;
    println!(
        "{}",
        serde_json::json!({ "event": "predicted", "count": probs.len() })
    );
    Ok(())
}
