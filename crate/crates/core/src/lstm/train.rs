//! Minibatch training with time-decayed Adam, gradient clipping and early
//! stopping on validation MSE.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Architecture, LstmModel, Mode};
use super::optim::{adam_step, lr_schedule, AdamHyper, AdamMoments};
use crate::error::{Error, Result};
use crate::features::{ScalerParams, WindowSet};
use crate::series::Resolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Per-epoch time-decay constant.
    pub decay_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Fraction of windows (taken from the end) held out for validation.
    pub validation_fraction: f64,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let arch = Architecture::default();
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay_rate: 0.01,
            max_epochs: 200,
            patience: 10,
            batch_size: 32,
            seed: 0,
            clip_norm: 5.0,
            validation_fraction: 0.1,
            num_layers: arch.num_layers,
            hidden_size: arch.hidden_size,
            dropout_rate: arch.dropout_rate,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(0.0 < self.beta1 && self.beta1 < self.beta2 && self.beta2 < 1.0) {
            return bad(format!(
                "need 0 < beta1 < beta2 < 1, got beta1={} beta2={}",
                self.beta1, self.beta2
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.epsilon <= 0.0 || self.decay_rate < 0.0 || self.clip_norm <= 0.0 {
            return bad("epsilon and clip_norm must be positive, decay_rate non-negative".into());
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("patience, batch_size and max_epochs must be at least 1".into());
        }
        self.architecture().validate()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            num_layers: self.num_layers,
            hidden_size: self.hidden_size,
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    /// Learning rate for a 0-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_schedule(epoch, self.learning_rate, self.decay_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn best_val_mse(&self) -> f64 {
        self.epochs[self.best_epoch - 1].val_mse
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse,lr\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_mse, e.val_mse, e.lr);
        }
        out
    }
}

/// Early-stopping bookkeeping: tracks the best validation loss and how many
/// epochs have passed without improving on it.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    waited: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.waited = 0;
            StopDecision {
                improved: true,
                stop: false,
            }
        } else {
            self.waited += 1;
            StopDecision {
                improved: false,
                stop: self.waited >= self.patience,
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Mean of squared residuals.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyData("mse of zero samples".into()));
    }
    let ss: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    Ok(ss / predictions.len() as f64)
}

/// Inference-mode predictions for every window of a set, in order.
pub fn predict_windows(
    model: &LstmModel,
    windows: &WindowSet,
    batch_size: usize,
) -> Result<Vec<f64>> {
    let mut unused = rand::rngs::mock::StepRng::new(0, 0);
    let idx: Vec<usize> = (0..windows.len()).collect();
    let mut out = Vec::with_capacity(windows.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch: Vec<&[Vec<f64>]> = chunk.iter().map(|&k| windows.window(k)).collect();
        out.extend(model.forward_batch(&batch, Mode::Infer, &mut unused)?.0);
    }
    Ok(out)
}

pub fn validation_mse(model: &LstmModel, windows: &WindowSet, batch_size: usize) -> Result<f64> {
    mse(
        &predict_windows(model, windows, batch_size)?,
        &windows.targets(),
    )
}

/// Trains a fresh model on `windows`, early-stopping on `val_windows`, and
/// returns the snapshot with the lowest validation MSE.
pub fn train(
    windows: &WindowSet,
    val_windows: &WindowSet,
    scaler: ScalerParams,
    resolution: Resolution,
    config: &TrainConfig,
) -> Result<(LstmModel, TrainReport)> {
    config.validate()?;
    if windows.is_empty() || val_windows.is_empty() {
        return Err(Error::EmptyData(
            "training and validation window sets must be non-empty".into(),
        ));
    }
    if windows.lookback() != val_windows.lookback() {
        return Err(Error::Shape(
            "training and validation lookbacks differ".into(),
        ));
    }
    if windows.input_width() != scaler.width() || val_windows.input_width() != scaler.width() {
        return Err(Error::Shape(format!(
            "windows have {} columns, scaler has {}",
            windows.input_width(),
            scaler.width()
        )));
    }
    let batch_size = config.batch_size;
    fit(windows, scaler, resolution, config, |m| {
        validation_mse(m, val_windows, batch_size)
    })
}

fn fit<V>(
    windows: &WindowSet,
    scaler: ScalerParams,
    resolution: Resolution,
    config: &TrainConfig,
    mut validate: V,
) -> Result<(LstmModel, TrainReport)>
where
    V: FnMut(&LstmModel) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LstmModel::init(
        config.architecture(),
        scaler,
        windows.lookback(),
        resolution,
        &mut rng,
    )?;
    let mut moments = {
        let sizes: Vec<usize> = model.param_slices_mut().iter().map(|s| s.len()).collect();
        AdamMoments::zeros(sizes)
    };
    let hyper = config.adam();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut records = Vec::new();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut step: u64 = 0;

    for epoch in 1..=config.max_epochs {
        let lr = config.lr_at(epoch - 1);
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;

        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&[Vec<f64>]> = chunk.iter().map(|&k| windows.window(k)).collect();
            let targets: Vec<f64> = chunk.iter().map(|&k| windows.target(k)).collect();
            let (preds, cache) = model.forward_batch(&batch, Mode::Train, &mut rng)?;
            let n = chunk.len() as f64;
            let mut loss_grads = Vec::with_capacity(chunk.len());
            for (p, y) in preds.iter().zip(&targets) {
                sq_sum += (p - y) * (p - y);
                loss_grads.push(2.0 * (p - y) / n);
            }
            let mut grads = model.backward(&cache, &loss_grads)?;
            grads.clip_global_norm(config.clip_norm);
            if !grads.global_norm().is_finite() {
                return Err(Error::Divergence { epoch });
            }
            step += 1;
            let g = grads.slices();
            adam_step(
                &mut model.param_slices_mut(),
                &g,
                &mut moments,
                step,
                lr,
                &hyper,
            )?;
        }

        let train_mse = sq_sum / windows.len() as f64;
        let val_mse = validate(&model)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        records.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr,
        });
        let decision = stopper.observe(epoch, val_mse);
        if decision.improved {
            best = model.clone();
        }
        if decision.stop {
            break;
        }
    }

    let report = TrainReport {
        stopped_epoch: records.len(),
        best_epoch: stopper.best_epoch(),
        epochs: records,
    };
    Ok((best, report))
}
