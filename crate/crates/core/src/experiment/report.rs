//! Report generation: collates persisted runs into the four delimited
//! result tables, plus per-run metric and curve files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::metrics::MetricReport;
use crate::models::EpochLog;
use crate::tuner::{CellOutcome, TuneResult};

use super::{BalanceMode, ExperimentError, RunOutcome, RunRecord, Stage};

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<(), std::io::Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn f4(value: f64) -> String {
    format!("{value:.4}")
}

/// Per-epoch training curves in plottable form.
pub fn write_curves(path: &Path, log: &EpochLog) -> Result<(), std::io::Error> {
    let mut rows = vec![vec![
        "epoch".to_string(),
        "train_loss".to_string(),
        "validation_loss".to_string(),
        "validation_accuracy".to_string(),
    ]];
    for row in log {
        rows.push(vec![
            row.epoch.to_string(),
            f4(row.train_loss),
            f4(row.validation_loss),
            f4(row.validation_accuracy),
        ]);
    }
    write_csv(path, &rows)
}

/// Per-run metric files: aggregate rows for the validation and test splits
/// plus a per-label breakdown of the test split.
pub fn write_run_metrics(
    run_dir: &Path,
    validation: &MetricReport,
    test: &MetricReport,
) -> Result<(), std::io::Error> {
    let mut rows = vec![vec![
        "split".to_string(),
        "accuracy".to_string(),
        "weighted_precision".to_string(),
        "weighted_recall".to_string(),
        "weighted_f1".to_string(),
    ]];
    for (name, report) in [("validation", validation), ("test", test)] {
        rows.push(vec![
            name.to_string(),
            f4(report.accuracy),
            f4(report.weighted_precision),
            f4(report.weighted_recall),
            f4(report.weighted_f1),
        ]);
    }
    write_csv(&run_dir.join("metric_report.csv"), &rows)?;

    let mut per_label = vec![vec![
        "label".to_string(),
        "precision".to_string(),
        "recall".to_string(),
        "f1".to_string(),
        "support".to_string(),
    ]];
    for (label, metrics) in crate::corpus::EmotionLabel::ALL.iter().zip(&test.per_class) {
        per_label.push(vec![
            label.as_str().to_string(),
            f4(metrics.precision),
            f4(metrics.recall),
            f4(metrics.f1),
            metrics.support.to_string(),
        ]);
    }
    write_csv(&run_dir.join("per_label_metrics.csv"), &per_label)
}

/// Grid-search rows in the tuning-table column order.
pub fn write_tuning_table(
    path: &Path,
    backend_id: &str,
    result: &TuneResult,
) -> Result<(), std::io::Error> {
    let mut rows = vec![tuning_header()];
    for row in &result.rows {
        rows.push(tuning_row(backend_id, row));
    }
    write_csv(path, &rows)
}

fn tuning_header() -> Vec<String> {
    [
        "Model",
        "Epochs",
        "Dropout",
        "Weight Decay",
        "Batch Size",
        "Eval Loss",
        "Eval Accuracy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn tuning_row(backend_id: &str, row: &crate::tuner::TuneRow) -> Vec<String> {
    let (loss, accuracy) = match &row.outcome {
        CellOutcome::Scored {
            eval_loss,
            eval_accuracy,
            ..
        } => (f4(*eval_loss), f4(*eval_accuracy)),
        CellOutcome::Failed { error } => (format!("failed: {error}"), String::new()),
    };
    vec![
        backend_id.to_string(),
        row.config.epochs.to_string(),
        format!("{}", row.config.dropout_probability),
        format!("{}", row.config.weight_decay),
        row.config.batch_size.to_string(),
        loss,
        accuracy,
    ]
}

/// Short human label for a backend id ("bow-baseline", "finetune:indobert").
fn model_label(backend_id: &str) -> String {
    backend_id
        .strip_prefix("finetune:")
        .unwrap_or(backend_id)
        .to_string()
}

/// Groups member backend ids into a combination label like
/// "2 indobert + distilbert".
fn combination_label(member_backend_ids: &[String]) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for id in member_backend_ids {
        let label = model_label(id);
        if !counts.contains_key(&label) {
            order.push(label.clone());
        }
        *counts.entry(label).or_insert(0) += 1;
    }
    order
        .iter()
        .map(|label| {
            let count = counts[label];
            if count == 1 {
                label.clone()
            } else {
                format!("{count} {label}")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Renders the four result tables from the requested runs into
/// `<out_dir>/reports/`. Every table file is written even when it has no
/// rows, so a zero-run report is headers only.
pub fn render_report(out_dir: &Path, run_ids: &[String]) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut without_augmentation = vec![["Method", "Acc.", "Prec.", "Rec.", "F1", "Ep.", "US"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<String>>()];
    let mut after_augmentation = vec![["Model", "Epoch", "Loss", "Acc.", "Prec.", "Rec.", "F1"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<String>>()];
    let mut tuning = vec![tuning_header()];
    let mut bagging = vec![["Model Combination", "Accuracy", "F1-Score", "Epoch"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<String>>()];

    for run_id in run_ids {
        let record = RunRecord::load(out_dir, run_id)?;
        match &record.outcome {
            RunOutcome::Train {
                backend_id,
                config,
                log,
                selected_epoch,
                test_report,
                ..
            } => {
                let eval_loss = log[selected_epoch - 1].validation_loss;
                if record.balance_mode == BalanceMode::Augment {
                    after_augmentation.push(vec![
                        model_label(backend_id),
                        config.epochs.to_string(),
                        f4(eval_loss),
                        f4(test_report.accuracy),
                        f4(test_report.weighted_precision),
                        f4(test_report.weighted_recall),
                        f4(test_report.weighted_f1),
                    ]);
                } else {
                    without_augmentation.push(vec![
                        model_label(backend_id),
                        f4(test_report.accuracy),
                        f4(test_report.weighted_precision),
                        f4(test_report.weighted_recall),
                        f4(test_report.weighted_f1),
                        config.epochs.to_string(),
                        if record.balance_mode == BalanceMode::Undersample {
                            "Yes".to_string()
                        } else {
                            "No".to_string()
                        },
                    ]);
                }
            }
            RunOutcome::Tune { backend_id, result } => {
                for row in &result.rows {
                    tuning.push(tuning_row(backend_id, row));
                }
            }
            RunOutcome::Bag {
                member_backend_ids,
                member_epochs,
                test_report,
                ..
            } => {
                let mut epochs: Vec<usize> = member_epochs.clone();
                epochs.dedup();
                let epoch_label = epochs
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("/");
                bagging.push(vec![
                    combination_label(member_backend_ids),
                    f4(test_report.accuracy),
                    f4(test_report.weighted_f1),
                    epoch_label,
                ]);
            }
        }
    }

    let reports_dir = out_dir.join("reports");
    let targets = [
        (
            "classification_without_augmentation.csv",
            &without_augmentation,
        ),
        ("classification_after_augmentation.csv", &after_augmentation),
        ("hyperparameter_tuning.csv", &tuning),
        ("bagging_performance.csv", &bagging),
    ];
    let mut written = Vec::new();
    for (name, rows) in targets {
        let path = reports_dir.join(name);
        write_csv(&path, rows).map_err(|e| {
            ExperimentError::stage(Stage::Report, format!("writing {}: {e}", path.display()))
        })?;
        written.push(path);
    }
    Ok(written)
}
