//! Exhaustive grid search over training configurations with ranked results.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabeledDataset;
use crate::models::{ClassifierBackend, ModelError, TrainConfig};

/// Value sets for the tuned dimensions; the search space is their Cartesian
/// product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub epochs: Vec<usize>,
    pub dropout: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub batch_size: Vec<usize>,
}

impl Grid {
    pub fn validate(&self) -> Result<(), TuneError> {
        for (name, empty) in [
            ("epochs", self.epochs.is_empty()),
            ("dropout", self.dropout.is_empty()),
            ("weight_decay", self.weight_decay.is_empty()),
            ("batch_size", self.batch_size.is_empty()),
        ] {
            if empty {
                return Err(TuneError::EmptyDimension { name });
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.epochs.len() * self.dropout.len() * self.weight_decay.len() * self.batch_size.len()
    }

    /// Materializes the grid cells in a fixed lexicographic order (epochs,
    /// dropout, weight decay, batch size), overriding `base` per cell and
    /// pinning the shared seed.
    pub fn cells(&self, base: &TrainConfig, seed: u64) -> Vec<TrainConfig> {
        let mut cells = Vec::with_capacity(self.cell_count());
        for &epochs in &self.epochs {
            for &dropout in &self.dropout {
                for &weight_decay in &self.weight_decay {
                    for &batch_size in &self.batch_size {
                        cells.push(TrainConfig {
                            epochs,
                            dropout_probability: dropout,
                            weight_decay,
                            batch_size,
                            seed,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn contains(&self, config: &TrainConfig) -> bool {
        self.epochs.contains(&config.epochs)
            && self.dropout.contains(&config.dropout_probability)
            && self.weight_decay.contains(&config.weight_decay)
            && self.batch_size.contains(&config.batch_size)
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Scored {
        eval_loss: f64,
        eval_accuracy: f64,
        wall_secs: f64,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub config: TrainConfig,
    pub outcome: CellOutcome,
}

impl TuneRow {
    pub fn eval_accuracy(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Scored { eval_accuracy, .. } => Some(*eval_accuracy),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn eval_loss(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Scored { eval_loss, .. } => Some(*eval_loss),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Ranked grid-search results: scored rows sorted best-first, failed cells
/// recorded after them in cell order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub rows: Vec<TuneRow>,
    /// Index of the selected row in `rows` (always 0 after ranking; kept
    /// explicit so persisted results are self-describing).
    pub best: usize,
}

impl TuneResult {
    pub fn best_row(&self) -> &TuneRow {
        &self.rows[self.best]
    }

    pub fn scored_rows(&self) -> impl Iterator<Item = &TuneRow> {
        self.rows
            .iter()
            .filter(|r| matches!(r.outcome, CellOutcome::Scored { .. }))
    }
}

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("grid dimension {name} is empty")]
    EmptyDimension { name: &'static str },
    #[error("every grid cell failed; last error: {last_error}")]
    AllCellsFailed { last_error: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Ranking comparator: higher accuracy first; ties broken by lower eval
/// loss, then fewer epochs, then smaller batch size, then original cell
/// order.
fn rank(
    a: &(usize, f64, f64, TrainConfig),
    b: &(usize, f64, f64, TrainConfig),
) -> std::cmp::Ordering {
    let (a_idx, a_loss, a_acc, a_cfg) = a;
    let (b_idx, b_loss, b_acc, b_cfg) = b;
    b_acc
        .partial_cmp(a_acc)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| {
            a_loss
                .partial_cmp(b_loss)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .then_with(|| a_cfg.epochs.cmp(&b_cfg.epochs))
        .then_with(|| a_cfg.batch_size.cmp(&b_cfg.batch_size))
        .then_with(|| a_idx.cmp(b_idx))
}

/// Fits one model per grid cell (same seed throughout) and ranks the
/// outcomes. Cell failures are recorded in their rows and excluded from the
/// ranking; the search only errors when every cell failed.
pub fn grid_search(
    backend: &dyn ClassifierBackend,
    grid: &Grid,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    base: &TrainConfig,
    seed: u64,
) -> Result<TuneResult, TuneError> {
    run_grid(backend, grid, train, validation, base, seed, 1)
}

/// Grid search with up to `width` cells fitted concurrently. Results are
/// merged by cell index, so the ranking is identical to the sequential run
/// for deterministic backends.
pub fn grid_search_parallel(
    backend: &dyn ClassifierBackend,
    grid: &Grid,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    base: &TrainConfig,
    seed: u64,
    width: usize,
) -> Result<TuneResult, TuneError> {
    run_grid(backend, grid, train, validation, base, seed, width.max(1))
}

fn run_grid(
    backend: &dyn ClassifierBackend,
    grid: &Grid,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    base: &TrainConfig,
    seed: u64,
    width: usize,
) -> Result<TuneResult, TuneError> {
    grid.validate()?;
    let cells = grid.cells(base, seed);

    let fit_cell = |config: &TrainConfig| -> CellOutcome {
        let started = Instant::now();
        match backend.fit(train, validation, config) {
            Ok(outcome) => {
                let row = outcome.selected_row();
                CellOutcome::Scored {
                    eval_loss: row.validation_loss,
                    eval_accuracy: row.validation_accuracy,
                    wall_secs: started.elapsed().as_secs_f64(),
                }
            }
            Err(error) => CellOutcome::Failed {
                error: error.to_string(),
            },
        }
    };

    let outcomes: Vec<CellOutcome> = if width <= 1 || cells.len() <= 1 {
        cells.iter().map(fit_cell).collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<CellOutcome>>> = (0..cells.len())
            .map(|_| std::sync::Mutex::new(None))
            .collect();
        std::thread::scope(|scope| {
            for _ in 0..width.min(cells.len()) {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if idx >= cells.len() {
                        break;
                    }
                    let outcome = fit_cell(&cells[idx]);
                    *slots[idx].lock().expect("slot lock") = Some(outcome);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.into_inner().expect("slot lock").expect("cell visited"))
            .collect()
    };

    let mut scored: Vec<(usize, f64, f64, TrainConfig)> = Vec::new();
    let mut failed: Vec<TuneRow> = Vec::new();
    let mut last_error = String::new();
    for (idx, (config, outcome)) in cells.iter().zip(&outcomes).enumerate() {
        match outcome {
            CellOutcome::Scored {
                eval_loss,
                eval_accuracy,
                ..
            } => scored.push((idx, *eval_loss, *eval_accuracy, config.clone())),
            CellOutcome::Failed { error } => {
                last_error = error.clone();
                failed.push(TuneRow {
                    config: config.clone(),
                    outcome: outcome.clone(),
                });
            }
        }
    }
    if scored.is_empty() {
        return Err(TuneError::AllCellsFailed { last_error });
    }
    scored.sort_by(rank);

    let mut rows: Vec<TuneRow> = scored
        .iter()
        .map(|(idx, _, _, config)| TuneRow {
            config: config.clone(),
            outcome: outcomes[*idx].clone(),
        })
        .collect();
    rows.extend(failed);
    Ok(TuneResult { rows, best: 0 })
}
