//! Shared minibatch loop with validation early stopping.

use rand::Rng;

use acoustic_core::rng;
use acoustic_core::{Adam, AdamConfig, Bound, ParamStore, Tape, Tensor, TensorError, Var};

use crate::error::{invalid, PipelineError, Result, StateDump};

/// Stream ids under the training seed.
pub const INIT_STREAM: u64 = 1 << 40;
pub const SHUFFLE_STREAM: u64 = (1 << 40) + 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Items per optimizer step.
    pub batch: usize,
    pub lr: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch: 16,
            lr: 1e-3,
            patience: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss per training item.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl FitReport {
    pub fn best_val(&self) -> f64 {
        self.history[self.best_epoch].val_loss
    }
}

fn diverged(store: &ParamStore, epoch: usize, step: usize, loss: f64) -> PipelineError {
    PipelineError::Diverged(Box::new(StateDump {
        epoch,
        step,
        loss,
        names: store.names().to_vec(),
        params: store.tensors().to_vec(),
    }))
}

/// Run Adam over shuffled minibatches of `items` indices. `batch_loss`
/// builds the summed loss of a batch on the tape; `validate` scores the
/// current parameters on held-out data. The parameters of the best
/// validation epoch are restored before returning.
pub fn fit<M>(
    model: &mut M,
    store: &mut ParamStore,
    items: usize,
    cfg: &TrainConfig,
    mut batch_loss: impl FnMut(&mut M, &mut Tape, &Bound, &[usize], &mut rng::Rng) -> Result<Var>,
    mut validate: impl FnMut(&mut M, &ParamStore) -> Result<f64>,
) -> Result<FitReport> {
    if items == 0 || cfg.batch == 0 || cfg.epochs == 0 {
        return Err(invalid("train", "items, batch and epochs must be positive"));
    }
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    })?;
    let mut shuffle = rng::stream(cfg.seed, SHUFFLE_STREAM);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..items).collect();
        for k in (1..items).rev() {
            order.swap(k, shuffle.random_range(0..=k));
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let mut tape = Tape::new();
            let bound = store.bind(&mut tape)?;
            let loss = match batch_loss(model, &mut tape, &bound, chunk, &mut shuffle) {
                Err(PipelineError::Tensor(TensorError::NonFinite { .. })) => {
                    return Err(diverged(store, epoch, step, f64::NAN))
                }
                other => other?,
            };
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(diverged(store, epoch, step, value));
            }
            total += value;
            let grads = bound.grads(&tape.backward(loss)?);
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(diverged(store, epoch, step, value));
            }
            adam.step(store.tensors_mut(), &grads)?;
            step += 1;
        }
        let val_loss = validate(model, store)?;
        if !val_loss.is_finite() {
            return Err(diverged(store, epoch, step, val_loss));
        }
        history.push(EpochRecord {
            epoch,
            train_loss: total / items as f64,
            val_loss,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, store.tensors().to_vec()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    store.tensors_mut().clone_from_slice(&params);
    Ok(FitReport {
        history,
        best_epoch,
        stopped_early,
    })
}
