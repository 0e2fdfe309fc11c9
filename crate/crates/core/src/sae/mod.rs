//! Single-hidden-layer sparse autoencoder over difference vectors.
//!
//! Encoder `h = sigmoid(W_e d + b_e)`, linear decoder `r = W_d h + b_d`.
//! Loss on a batch `X` of `B` rows:
//!
//! ```text
//! L = (1/B) Σ_b ‖r_b − d_b‖² + γ Σ_j KL(ρ ‖ ρ̂_j)
//! ```
//!
//! where `ρ̂_j` is the batch-mean activation of hidden unit `j`, clamped to
//! `[1e-6, 1 − 1e-6]` before the KL term is evaluated.

mod checkpoint;
mod train;

pub use checkpoint::{CheckpointDoc, CHECKPOINT_FORMAT};
pub use train::{dataset_loss, mean_activation, train, train_from, TrainOutcome};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::embed::DifferenceVector;
use crate::error::{MispError, Result};
use crate::numeric::sigmoid;
use crate::scalar::Scalar;

/// Bounds applied to `ρ̂_j` before the KL term.
pub const RHO_HAT_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    /// Plain gradient descent.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaeConfig<T> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// γ
    pub sparsity_weight: T,
    /// ρ
    pub target_activation: T,
    pub learning_rate: T,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl<T: Scalar> SaeConfig<T> {
    pub const DEFAULT_HIDDEN_DIM: usize = 128;
    pub const DEFAULT_BATCH_SIZE: usize = 64;
    pub const DEFAULT_EPOCHS: usize = 50;

    /// Defaults: `H = 128`, `γ = 1`, `ρ = 0.05`, learning rate `1e-3`,
    /// batch 64, 50 epochs, seed 0, Adam.
    pub fn new(input_dim: usize) -> Self {
        SaeConfig {
            input_dim,
            hidden_dim: Self::DEFAULT_HIDDEN_DIM,
            sparsity_weight: T::one(),
            target_activation: T::lit(0.05),
            learning_rate: T::lit(1e-3),
            batch_size: Self::DEFAULT_BATCH_SIZE,
            epochs: Self::DEFAULT_EPOCHS,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MispError::Config(m.to_string()));
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if !(self.sparsity_weight >= T::zero() && self.sparsity_weight.is_finite()) {
            return bad("sparsity_weight must be a finite value >= 0");
        }
        if !(self.target_activation > T::zero() && self.target_activation < T::one()) {
            return bad("target_activation must lie in (0, 1)");
        }
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> SaeConfig<U> {
        SaeConfig {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            sparsity_weight: U::lit(self.sparsity_weight.as_f64()),
            target_activation: U::lit(self.target_activation.as_f64()),
            learning_rate: U::lit(self.learning_rate.as_f64()),
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel<T> {
    /// `H × input_dim`
    pub encoder_weights: Array2<T>,
    pub encoder_bias: Array1<T>,
    /// `input_dim × H`
    pub decoder_weights: Array2<T>,
    pub decoder_bias: Array1<T>,
    pub config: SaeConfig<T>,
}

/// Gradient with the same block layout as [`SaeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct SaeGradient<T> {
    pub encoder_weights: Array2<T>,
    pub encoder_bias: Array1<T>,
    pub decoder_weights: Array2<T>,
    pub decoder_bias: Array1<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaeLoss<T> {
    pub total: T,
    pub reconstruction: T,
    pub sparsity: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeBatchStats<T> {
    /// Clamped `ρ̂_j` per hidden unit.
    pub mean_activation: Vec<T>,
    pub reconstruction_loss: T,
    pub sparsity_loss: T,
}

impl<T: Scalar> SaeBatchStats<T> {
    pub fn total(&self) -> T {
        self.reconstruction_loss + self.sparsity_loss
    }
}

impl<T: Scalar> SaeModel<T> {
    /// Seeded init: weights uniform in `±1/sqrt(fan_in)`, zero biases.
    pub fn init(config: SaeConfig<T>) -> Result<Self> {
        config.validate()?;
        let (h, n) = (config.hidden_dim, config.input_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut block = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            Array2::from_shape_simple_fn((rows, cols), || T::lit(dist.sample(&mut rng)))
        };
        let encoder_weights = block(h, n, n);
        let decoder_weights = block(n, h, h);
        Ok(SaeModel {
            encoder_weights,
            encoder_bias: Array1::zeros(h),
            decoder_weights,
            decoder_bias: Array1::zeros(n),
            config,
        })
    }

    pub fn zeros(config: SaeConfig<T>) -> Result<Self> {
        config.validate()?;
        let (h, n) = (config.hidden_dim, config.input_dim);
        Ok(SaeModel {
            encoder_weights: Array2::zeros((h, n)),
            encoder_bias: Array1::zeros(h),
            decoder_weights: Array2::zeros((n, h)),
            decoder_bias: Array1::zeros(n),
            config,
        })
    }

    pub fn from_parts(
        config: SaeConfig<T>,
        encoder_weights: Array2<T>,
        encoder_bias: Array1<T>,
        decoder_weights: Array2<T>,
        decoder_bias: Array1<T>,
    ) -> Result<Self> {
        config.validate()?;
        let (h, n) = (config.hidden_dim, config.input_dim);
        if encoder_weights.dim() != (h, n)
            || encoder_bias.len() != h
            || decoder_weights.dim() != (n, h)
            || decoder_bias.len() != n
        {
            return Err(MispError::dim(format!(
                "parameter shapes inconsistent with input_dim={n}, hidden_dim={h}"
            )));
        }
        let model = SaeModel {
            encoder_weights,
            encoder_bias,
            decoder_weights,
            decoder_bias,
            config,
        };
        if !model.params_flat().iter().all(|v| v.is_finite()) {
            return Err(MispError::NonFinite("SAE parameters must be finite".into()));
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(MispError::dim(format!(
                "SAE expects input length {}, got {len}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `sigmoid(W_e d + b_e)`; every entry lies strictly inside (0, 1) in
    /// exact arithmetic.
    pub fn encode(&self, d: &[T]) -> Result<Vec<T>> {
        self.check_input(d.len())?;
        Ok(self
            .encoder_weights
            .rows()
            .into_iter()
            .zip(self.encoder_bias.iter())
            .map(|(row, &b)| sigmoid(row.iter().zip(d).map(|(&w, &x)| w * x).sum::<T>() + b))
            .collect())
    }

    /// `W_d code + b_d`.
    pub fn decode(&self, code: &[T]) -> Result<Vec<T>> {
        if code.len() != self.hidden_dim() {
            return Err(MispError::dim(format!(
                "SAE code must have length {}, got {}",
                self.hidden_dim(),
                code.len()
            )));
        }
        Ok(self
            .decoder_weights
            .rows()
            .into_iter()
            .zip(self.decoder_bias.iter())
            .map(|(row, &b)| row.iter().zip(code).map(|(&w, &c)| w * c).sum::<T>() + b)
            .collect())
    }

    /// Hidden activations for every row of `x` (`B × H`).
    pub fn encode_batch(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(x.ncols())?;
        let mut z = x.dot(&self.encoder_weights.t());
        z += &self.encoder_bias;
        z.mapv_inplace(sigmoid);
        Ok(z)
    }

    pub fn decode_batch(&self, codes: ArrayView2<'_, T>) -> Array2<T> {
        let mut r = codes.dot(&self.decoder_weights.t());
        r += &self.decoder_bias;
        r
    }

    pub fn num_params(&self) -> usize {
        let (h, n) = (self.hidden_dim(), self.input_dim());
        2 * h * n + h + n
    }

    /// Parameters in block order: encoder weights, encoder bias, decoder
    /// weights, decoder bias (matrices row-major).
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(self.encoder_weights.iter().copied());
        out.extend(self.encoder_bias.iter().copied());
        out.extend(self.decoder_weights.iter().copied());
        out.extend(self.decoder_bias.iter().copied());
        out
    }

    pub fn set_params_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(MispError::dim("flat parameter vector has wrong length"));
        }
        let mut it = flat.iter().copied();
        for p in self
            .encoder_weights
            .iter_mut()
            .chain(self.encoder_bias.iter_mut())
            .chain(self.decoder_weights.iter_mut())
            .chain(self.decoder_bias.iter_mut())
        {
            *p = it.next().expect("length checked");
        }
        Ok(())
    }

    pub fn loss_matrix(&self, x: ArrayView2<'_, T>) -> Result<SaeBatchStats<T>> {
        Ok(self.forward(x)?.stats)
    }

    pub fn grad_matrix(&self, x: ArrayView2<'_, T>) -> Result<(SaeBatchStats<T>, SaeGradient<T>)> {
        let fwd = self.forward(x)?;
        let grad = self.backward(x, &fwd);
        Ok((fwd.stats, grad))
    }

    fn forward(&self, x: ArrayView2<'_, T>) -> Result<Forward<T>> {
        if x.nrows() == 0 {
            return Err(MispError::Empty("SAE batch is empty".into()));
        }
        let hidden = self.encode_batch(x)?;
        let recon = self.decode_batch(hidden.view());
        let err = recon - x;
        let b = T::from_usize_lossy(x.nrows());
        let reconstruction_loss = err.iter().map(|&e| e * e).sum::<T>() / b;

        let rho = self.config.target_activation;
        let lo = T::lit(RHO_HAT_CLAMP);
        let hi = T::one() - lo;
        let raw = hidden.mean_axis(Axis(0)).expect("non-empty batch");
        let mean_activation: Vec<T> = raw.iter().map(|&r| r.max(lo).min(hi)).collect();
        let kl_sum: T = mean_activation.iter().map(|&c| kl_unchecked(rho, c)).sum();
        let sparsity_loss = self.config.sparsity_weight * kl_sum;
        Ok(Forward {
            hidden,
            err,
            raw_mean: raw,
            stats: SaeBatchStats {
                mean_activation,
                reconstruction_loss,
                sparsity_loss,
            },
        })
    }

    fn backward(&self, x: ArrayView2<'_, T>, fwd: &Forward<T>) -> SaeGradient<T> {
        let b = T::from_usize_lossy(x.nrows());
        let two = T::lit(2.0);
        let d_recon = fwd.err.mapv(|e| two * e / b);
        let decoder_weights = d_recon.t().dot(&fwd.hidden);
        let decoder_bias = d_recon.sum_axis(Axis(0));

        let rho = self.config.target_activation;
        let gamma = self.config.sparsity_weight;
        let lo = T::lit(RHO_HAT_CLAMP);
        let hi = T::one() - lo;
        // dL/dρ̂_j through the clamp, spread evenly over the batch rows.
        let d_rho_hat: Array1<T> = fwd.raw_mean.mapv(|r| {
            if r < lo || r > hi {
                T::zero()
            } else {
                gamma * (-rho / r + (T::one() - rho) / (T::one() - r)) / b
            }
        });
        let mut d_hidden = d_recon.dot(&self.decoder_weights);
        d_hidden += &d_rho_hat;
        let d_pre = d_hidden * &fwd.hidden.mapv(|h| h * (T::one() - h));
        let encoder_weights = d_pre.t().dot(&x);
        let encoder_bias = d_pre.sum_axis(Axis(0));
        SaeGradient {
            encoder_weights,
            encoder_bias,
            decoder_weights,
            decoder_bias,
        }
    }
}

struct Forward<T> {
    hidden: Array2<T>,
    err: Array2<T>,
    raw_mean: Array1<T>,
    stats: SaeBatchStats<T>,
}

impl<T: Scalar> SaeGradient<T> {
    pub fn flat(&self) -> Vec<T> {
        self.encoder_weights
            .iter()
            .chain(self.encoder_bias.iter())
            .chain(self.decoder_weights.iter())
            .chain(self.decoder_bias.iter())
            .copied()
            .collect()
    }
}

fn kl_unchecked<T: Scalar>(rho: T, rho_hat: T) -> T {
    let one = T::one();
    rho * (rho / rho_hat).ln() + (one - rho) * ((one - rho) / (one - rho_hat)).ln()
}

/// `KL(Bernoulli(ρ) ‖ Bernoulli(ρ̂))`. Both arguments must lie in (0, 1).
pub fn kl_sparsity<T: Scalar>(rho: T, rho_hat: T) -> Result<T> {
    let inside = |v: T| v > T::zero() && v < T::one();
    if !inside(rho) || !inside(rho_hat) {
        return Err(MispError::Domain(format!(
            "KL sparsity needs arguments in (0,1), got rho={rho}, rho_hat={rho_hat}"
        )));
    }
    Ok(kl_unchecked(rho, rho_hat).max(T::zero()))
}

/// Stacks difference vectors into a `B × n` matrix.
pub fn stack_batch<T: Scalar>(batch: &[DifferenceVector<T>]) -> Result<Array2<T>> {
    let first = batch
        .first()
        .ok_or_else(|| MispError::Empty("batch of difference vectors is empty".into()))?;
    let n = first.dim();
    let mut x = Array2::zeros((batch.len(), n));
    for (i, d) in batch.iter().enumerate() {
        if d.dim() != n {
            return Err(MispError::dim("difference vectors in a batch must share a length"));
        }
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&d.values[..]));
    }
    Ok(x)
}

pub fn sae_loss<T: Scalar>(model: &SaeModel<T>, batch: &[DifferenceVector<T>]) -> Result<SaeLoss<T>> {
    let stats = model.loss_matrix(stack_batch(batch)?.view())?;
    Ok(SaeLoss {
        total: stats.total(),
        reconstruction: stats.reconstruction_loss,
        sparsity: stats.sparsity_loss,
    })
}

pub fn sae_grad<T: Scalar>(model: &SaeModel<T>, batch: &[DifferenceVector<T>]) -> Result<SaeGradient<T>> {
    Ok(model.grad_matrix(stack_batch(batch)?.view())?.1)
}

pub fn batch_stats<T: Scalar>(model: &SaeModel<T>, batch: &[DifferenceVector<T>]) -> Result<SaeBatchStats<T>> {
    model.loss_matrix(stack_batch(batch)?.view())
}
