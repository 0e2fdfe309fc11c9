use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{MispError, Result};
use crate::numeric::log_sum_exp;
use crate::pl_dpo::DifferentiablePolicy;
use crate::scalar::Scalar;

/// Bag-of-tokens softmax policy: every position draws from
/// `softmax(W · features)`, `W` being `V × F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy<T> {
    pub weights: Array2<T>,
}

/// Features of one (prompt, image) pair plus the response to score.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyContext<T> {
    pub features: Vec<T>,
    pub response: Vec<usize>,
}

impl<T: Scalar> ToyPolicy<T> {
    pub fn zeros(vocab: usize, features: usize) -> Self {
        ToyPolicy {
            weights: Array2::zeros((vocab, features)),
        }
    }

    pub fn vocab(&self) -> usize {
        self.weights.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn check(&self, ctx: &ToyContext<T>) -> Result<()> {
        if ctx.features.len() != self.feature_dim() {
            return Err(MispError::dim(format!(
                "context has {} features, policy expects {}",
                ctx.features.len(),
                self.feature_dim()
            )));
        }
        if ctx.response.is_empty() {
            return Err(MispError::Empty("response has no tokens".into()));
        }
        if let Some(&bad) = ctx.response.iter().find(|&&t| t >= self.vocab()) {
            return Err(MispError::Domain(format!(
                "token {bad} outside vocabulary of size {}",
                self.vocab()
            )));
        }
        Ok(())
    }

    /// Per-token log-probabilities `log softmax(W x)`.
    fn log_softmax(&self, features: &[T]) -> Array1<T> {
        let logits = self.weights.dot(&ArrayView1::from(features));
        let lse = log_sum_exp(logits.as_slice().expect("contiguous"));
        logits.mapv(|z| z - lse)
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.weights.iter().copied().collect()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.weights.len() {
            return Err(MispError::dim("flat parameter vector has wrong length"));
        }
        for (w, &v) in self.weights.iter_mut().zip(flat) {
            *w = v;
        }
        Ok(())
    }
}

/// `Σ_t log softmax(W x)[y_t]`.
pub fn toy_logprob<T: Scalar>(policy: &ToyPolicy<T>, ctx: &ToyContext<T>) -> Result<T> {
    policy.check(ctx)?;
    let lp = policy.log_softmax(&ctx.features);
    Ok(ctx.response.iter().map(|&t| lp[t]).sum())
}

/// `Σ_t (e_{y_t} − p) xᵀ`, shape `V × F`.
pub fn toy_logprob_grad<T: Scalar>(policy: &ToyPolicy<T>, ctx: &ToyContext<T>) -> Result<Array2<T>> {
    policy.check(ctx)?;
    let probs = policy.log_softmax(&ctx.features).mapv(T::exp);
    let len = T::from_usize_lossy(ctx.response.len());
    let mut coef = probs.mapv(|p| -len * p);
    for &t in &ctx.response {
        coef[t] += T::one();
    }
    let x = ArrayView1::from(&ctx.features[..]);
    Ok(Array2::from_shape_fn(policy.weights.dim(), |(v, f)| coef[v] * x[f]))
}

impl<T: Scalar> DifferentiablePolicy<T> for ToyPolicy<T> {
    type Context = ToyContext<T>;

    fn num_params(&self) -> usize {
        self.weights.len()
    }

    fn log_prob(&self, ctx: &ToyContext<T>) -> Result<T> {
        toy_logprob(self, ctx)
    }

    fn log_prob_grad(&self, ctx: &ToyContext<T>) -> Result<Vec<T>> {
        Ok(toy_logprob_grad(self, ctx)?.into_iter().collect())
    }
}
