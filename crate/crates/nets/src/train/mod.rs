//! Mini-batch training of operator models on L1 loss with Adam.

mod grad;
mod init;
mod mlp_grad;
mod optim;

pub use grad::{loss_and_grad, model_params, param_count, set_model_params};
pub use init::{init_model, random_mlp, Architecture, DeepOnetArch, FnoArch, ShiftDeepOnetArch};
pub use mlp_grad::{backward, forward_tape, Tape};
pub use optim::{adam_step, AdamConfig, AdamState, Scheduler};

use crate::operator_nets::OperatorModel;
use crate::NetError;
use hyperop_core::grid::{relative_l1_values, GridError};
use hyperop_core::measures::{substream, Dataset};
use hyperop_core::stats;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("empty dataset")]
    Empty,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_scheduler")]
    pub scheduler: Scheduler,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub seed: u64,
    /// Validate every this many epochs (and always after the last one).
    #[serde(default = "default_val_every")]
    pub val_every: usize,
}

fn default_lr() -> f64 {
    5e-4
}
fn default_batch() -> usize {
    10
}
fn default_scheduler() -> Scheduler {
    Scheduler::Exponential { gamma: 0.999 }
}
fn default_val_every() -> usize {
    1
}

impl TrainConfig {
    pub fn with_epochs(epochs: usize) -> Self {
        Self {
            lr: default_lr(),
            batch_size: default_batch(),
            epochs,
            scheduler: default_scheduler(),
            adam: AdamConfig::default(),
            seed: 0,
            val_every: default_val_every(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if self.val_every == 0 {
            return Err(TrainError::Config("val_every must be positive".into()));
        }
        self.scheduler.validate().map_err(TrainError::Config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean relative L1 on the validation set; NaN when not evaluated.
    pub val_rel_l1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl History {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_rel_l1")?;
        for r in &self.records {
            writeln!(w, "{},{},{}", r.epoch, r.train_loss, r.val_rel_l1)?;
        }
        Ok(())
    }
}

/// Per-sample relative L1 errors summarised over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean: f64,
    pub count: usize,
}

impl EvalSummary {
    pub fn from_errors(errors: &[f64]) -> Result<Self, TrainError> {
        if errors.is_empty() {
            return Err(TrainError::Empty);
        }
        Ok(Self {
            median: stats::quantile(errors, 0.5),
            q25: stats::quantile(errors, 0.25),
            q75: stats::quantile(errors, 0.75),
            mean: stats::mean(errors),
            count: errors.len(),
        })
    }
}

pub fn sample_errors(model: &OperatorModel, data: &Dataset) -> Result<Vec<f64>, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    data.inputs
        .iter()
        .zip(&data.outputs)
        .map(|(u, v)| {
            let pred = model.predict(&data.grid, u)?;
            Ok(relative_l1_values(&pred, v)?)
        })
        .collect()
}

pub fn evaluate(model: &OperatorModel, data: &Dataset) -> Result<EvalSummary, TrainError> {
    EvalSummary::from_errors(&sample_errors(model, data)?)
}

fn mean_loss(model: &OperatorModel, data: &Dataset, batch: usize) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for chunk in (0..data.len()).collect::<Vec<_>>().chunks(batch) {
        let x: Vec<&[f64]> = chunk.iter().map(|&i| data.inputs[i].as_slice()).collect();
        let y: Vec<&[f64]> = chunk.iter().map(|&i| data.outputs[i].as_slice()).collect();
        let (l, _) = loss_and_grad(model, &data.grid, &x, &y)?;
        total += l * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}

pub fn train_model(
    model: OperatorModel,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<(OperatorModel, History), TrainError> {
    train_model_with(model, train, val, cfg, |_| {})
}

/// Trains and returns the parameters with the lowest validation error seen,
/// calling `on_epoch` after every epoch. Epoch 0 in the history is the
/// untrained model.
pub fn train_model_with(
    mut model: OperatorModel,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(OperatorModel, History), TrainError> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Empty);
    }
    if train.grid != val.grid {
        return Err(TrainError::Config("training and validation grids differ".into()));
    }
    let mut history = History::default();
    let first = EpochRecord {
        epoch: 0,
        train_loss: mean_loss(&model, train, cfg.batch_size)?,
        val_rel_l1: evaluate(&model, val)?.mean,
    };
    on_epoch(&first);
    history.records.push(first);
    let mut params = model_params(&model);
    let mut best = (first.val_rel_l1, params.clone());
    let mut state = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        let lr = cfg.scheduler.rate(cfg.lr, epoch - 1);
        order.shuffle(&mut substream(cfg.seed, epoch as u64));
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let x: Vec<&[f64]> = chunk.iter().map(|&i| train.inputs[i].as_slice()).collect();
            let y: Vec<&[f64]> = chunk.iter().map(|&i| train.outputs[i].as_slice()).collect();
            let (loss, g) = loss_and_grad(&model, &train.grid, &x, &y)?;
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::Divergence { epoch, batch: bi });
            }
            total += loss * chunk.len() as f64;
            adam_step(&mut params, &g, &mut state, lr, &cfg.adam);
            set_model_params(&mut model, &params);
        }
        let val_rel_l1 = if epoch % cfg.val_every == 0 || epoch == cfg.epochs {
            let v = evaluate(&model, val)?.mean;
            if !v.is_finite() {
                return Err(TrainError::Divergence { epoch, batch: order.len().div_ceil(cfg.batch_size) });
            }
            if v < best.0 {
                best = (v, params.clone());
                history.best_epoch = epoch;
            }
            v
        } else {
            f64::NAN
        };
        let rec = EpochRecord { epoch, train_loss: total / train.len() as f64, val_rel_l1 };
        on_epoch(&rec);
        history.records.push(rec);
    }
    set_model_params(&mut model, &best.1);
    Ok((model, history))
}
