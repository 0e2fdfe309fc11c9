use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{stack_batch, Optimizer, SaeConfig, SaeGradient, SaeModel};
use crate::embed::DifferenceVector;
use crate::error::{MispError, Result};
use crate::scalar::Scalar;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Stream id for shuffling so it never overlaps the initialization draws.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: SaeModel<T>,
    /// Dataset loss before the first update.
    pub initial_loss: T,
    /// Dataset loss after each epoch.
    pub history: Vec<T>,
}

/// Trains from the seeded initialization of `config`.
pub fn train<T: Scalar>(config: SaeConfig<T>, dataset: &[DifferenceVector<T>]) -> Result<TrainOutcome<T>> {
    let model = SaeModel::init(config)?;
    train_from(model, dataset)
}

/// Continues training `model` for `model.config.epochs` epochs.
///
/// Each epoch shuffles the rows with a generator seeded from the config
/// seed, walks the mini-batches in order and applies one optimizer step per
/// batch. `ρ̂` is the mean activation of the current mini-batch. After every
/// epoch the full-dataset loss is recorded.
pub fn train_from<T: Scalar>(mut model: SaeModel<T>, dataset: &[DifferenceVector<T>]) -> Result<TrainOutcome<T>> {
    model.config.validate()?;
    if dataset.is_empty() {
        return Err(MispError::Empty("SAE training set is empty".into()));
    }
    let x = stack_batch(dataset)?;
    if x.ncols() != model.input_dim() {
        return Err(MispError::dim(format!(
            "training rows have length {}, model expects {}",
            x.ncols(),
            model.input_dim()
        )));
    }
    let cfg = model.config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut opt = OptimizerState::new(&cfg, model.num_params());

    let initial_loss = dataset_loss_matrix(&model, x.view(), cfg.batch_size)?;
    if !initial_loss.is_finite() {
        return Err(MispError::Diverged { stage: "epoch", index: 0 });
    }
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Array2<T> = x.select(Axis(0), chunk);
            let (stats, grad) = model.grad_matrix(batch.view())?;
            if !stats.total().is_finite() {
                return Err(MispError::Diverged { stage: "epoch", index: epoch });
            }
            opt.step(&mut model, &grad);
        }
        let loss = dataset_loss_matrix(&model, x.view(), cfg.batch_size)?;
        if !loss.is_finite() {
            return Err(MispError::Diverged { stage: "epoch", index: epoch });
        }
        history.push(loss);
    }
    Ok(TrainOutcome {
        model,
        initial_loss,
        history,
    })
}

/// Row-weighted mean of batch losses over contiguous, unshuffled batches.
pub fn dataset_loss<T: Scalar>(model: &SaeModel<T>, dataset: &[DifferenceVector<T>]) -> Result<T> {
    let x = stack_batch(dataset)?;
    dataset_loss_matrix(model, x.view(), model.config.batch_size)
}

fn dataset_loss_matrix<T: Scalar>(model: &SaeModel<T>, x: ArrayView2<'_, T>, batch_size: usize) -> Result<T> {
    let mut acc = T::zero();
    for chunk in x.axis_chunks_iter(Axis(0), batch_size.max(1)) {
        let stats = model.loss_matrix(chunk)?;
        acc += stats.total() * T::from_usize_lossy(chunk.nrows());
    }
    Ok(acc / T::from_usize_lossy(x.nrows()))
}

/// Mean hidden activation over every row and unit.
pub fn mean_activation<T: Scalar>(model: &SaeModel<T>, dataset: &[DifferenceVector<T>]) -> Result<T> {
    let x = stack_batch(dataset)?;
    let h = model.encode_batch(x.view())?;
    Ok(h.mean().expect("non-empty"))
}

enum OptimizerState<T> {
    Sgd { lr: T },
    Adam { lr: T, m: Vec<T>, v: Vec<T>, t: i32 },
}

impl<T: Scalar> OptimizerState<T> {
    fn new(cfg: &SaeConfig<T>, n: usize) -> Self {
        match cfg.optimizer {
            Optimizer::Sgd => OptimizerState::Sgd { lr: cfg.learning_rate },
            Optimizer::Adam => OptimizerState::Adam {
                lr: cfg.learning_rate,
                m: vec![T::zero(); n],
                v: vec![T::zero(); n],
                t: 0,
            },
        }
    }

    fn step(&mut self, model: &mut SaeModel<T>, grad: &SaeGradient<T>) {
        let params = model
            .encoder_weights
            .iter_mut()
            .chain(model.encoder_bias.iter_mut())
            .chain(model.decoder_weights.iter_mut())
            .chain(model.decoder_bias.iter_mut());
        let grads = grad
            .encoder_weights
            .iter()
            .chain(grad.encoder_bias.iter())
            .chain(grad.decoder_weights.iter())
            .chain(grad.decoder_bias.iter());
        match self {
            OptimizerState::Sgd { lr } => {
                for (p, &g) in params.zip(grads) {
                    *p -= *lr * g;
                }
            }
            OptimizerState::Adam { lr, m, v, t } => {
                *t += 1;
                let b1 = T::lit(ADAM_BETA1);
                let b2 = T::lit(ADAM_BETA2);
                let eps = T::lit(ADAM_EPS);
                let one = T::one();
                let c1 = one - b1.powi(*t);
                let c2 = one - b2.powi(*t);
                for (((p, &g), mi), vi) in params.zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = b1 * *mi + (one - b1) * g;
                    *vi = b2 * *vi + (one - b2) * g * g;
                    let mhat = *mi / c1;
                    let vhat = *vi / c2;
                    *p -= *lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}
