//! Mini-batch Adam training loop with validation early stopping.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::DEFAULT_EMBEDDING_DIM;
use crate::error::{PrsError, Result};
use crate::numerics::lstm::DEFAULT_HIDDEN_DIM;
use crate::numerics::{AdamState, ParamSet, DEFAULT_HIDDEN};

/// Model and optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per step: positions for point-wise models, lists for DPWN.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub valid_fraction: f64,
    pub embedding_dim: usize,
    pub hidden: Vec<usize>,
    pub lstm_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 256,
            learning_rate: 0.001,
            patience: 3,
            valid_fraction: 0.1,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            hidden: DEFAULT_HIDDEN.to_vec(),
            lstm_hidden: DEFAULT_HIDDEN_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.embedding_dim == 0 || self.lstm_hidden == 0 {
            return Err(PrsError::Config(
                "batch size and model dims must be positive".into(),
            ));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(PrsError::Config(
                "hidden layer widths must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(PrsError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub valid_losses: Vec<f64>,
}

/// Runs shuffled mini-batch Adam until `cfg.epochs` or until the validation
/// loss fails to improve for `cfg.patience` epochs; returns the best model.
///
/// `batch_grad` must write the mean gradient of the batch loss into its
/// (zeroed) gradient buffer.
pub(crate) fn fit<M, S>(
    mut model: M,
    mut samples: Vec<S>,
    valid: &[S],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    batch_grad: impl Fn(&M, &[S], &mut M),
    valid_loss: impl Fn(&M, &[S]) -> f64,
) -> Result<(M, TrainLog)>
where
    M: ParamSet + Clone,
    S: Clone,
{
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok((model, log));
    }
    let mut adam = AdamState::new(&model, cfg.learning_rate);
    let mut grads = model.clone();
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..cfg.epochs {
        samples.shuffle(rng);
        for batch in samples.chunks(cfg.batch_size) {
            grads.fill_zero();
            batch_grad(&model, batch, &mut grads);
            adam.step(&mut model, &grads)?;
        }
        log.epochs_run = epoch + 1;
        if valid.is_empty() {
            best = model.clone();
            continue;
        }
        let loss = valid_loss(&model, valid);
        if !loss.is_finite() {
            return Err(PrsError::Training(format!(
                "validation loss diverged at epoch {epoch}"
            )));
        }
        log.valid_losses.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best = model.clone();
            log.best_epoch = epoch + 1;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, log))
}
