//! Preference losses over precomputed log-ratios.
//!
//! A log-ratio is `log π_θ(y | x, m) − log π_ref(y | x, m)` for one
//! (response, image) pair; the reference policy is frozen data. All losses
//! are minimization losses:
//!
//! ```text
//! pairwise:        softplus(−β (pos − neg))
//! multi-negative:  softplus(log Σ_i exp(a_i)),   a_i = β (neg_i − pos)
//! total:           multi-negative + λ · pairwise(text_pos, text_neg)
//! ```
//!
//! With one negative the multi-negative loss is the pairwise loss.

mod gradient;
mod io;

pub use gradient::{
    is_weights, mn_gradient_exact, mn_gradient_is, text_gradient, total_loss_gradient, DifferentiablePolicy,
    IsMode, PolicyInstance, TextPair,
};
pub use io::{read_instances, write_instances};

use serde::{Deserialize, Serialize};

use crate::error::{MispError, Result};
use crate::numeric::{log_sum_exp, sigmoid, softmax, softplus};
use crate::scalar::Scalar;

/// β-free `log(π_θ / π_ref)` for one (response, image) pair.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct LogRatio<T>(pub T);

impl<T: Scalar> LogRatio<T> {
    pub fn from_logprobs(policy: T, reference: T) -> Self {
        LogRatio(policy - reference)
    }

    pub fn value(self) -> T {
        self.0
    }
}

impl<T> From<T> for LogRatio<T> {
    fn from(v: T) -> Self {
        LogRatio(v)
    }
}

/// Log-ratios for one prompt: the positive image, each negative image, an
/// optional text pair, and optional proposal probabilities for the negatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceInstance<T> {
    pub pos_logratio: LogRatio<T>,
    pub neg_logratios: Vec<LogRatio<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_pos_logratio: Option<LogRatio<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_neg_logratio: Option<LogRatio<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<T>>,
}

impl<T: Scalar> PreferenceInstance<T> {
    pub fn new(pos: T, negs: &[T]) -> Self {
        PreferenceInstance {
            pos_logratio: LogRatio(pos),
            neg_logratios: negs.iter().copied().map(LogRatio).collect(),
            text_pos_logratio: None,
            text_neg_logratio: None,
            q: None,
        }
    }

    pub fn with_text(mut self, pos: T, neg: T) -> Self {
        self.text_pos_logratio = Some(LogRatio(pos));
        self.text_neg_logratio = Some(LogRatio(neg));
        self
    }

    pub fn with_q(mut self, q: Vec<T>) -> Self {
        self.q = Some(q);
        self
    }

    pub fn num_negatives(&self) -> usize {
        self.neg_logratios.len()
    }

    pub fn text_pair(&self) -> Option<(T, T)> {
        match (self.text_pos_logratio, self.text_neg_logratio) {
            (Some(p), Some(n)) => Some((p.0, n.0)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.neg_logratios.is_empty() {
            return Err(MispError::Empty("preference instance has no negatives".into()));
        }
        let finite = self.pos_logratio.0.is_finite()
            && self.neg_logratios.iter().all(|r| r.0.is_finite())
            && self.text_pos_logratio.is_none_or(|r| r.0.is_finite())
            && self.text_neg_logratio.is_none_or(|r| r.0.is_finite());
        if !finite {
            return Err(MispError::NonFinite("log-ratios must be finite".into()));
        }
        if self.text_pos_logratio.is_some() != self.text_neg_logratio.is_some() {
            return Err(MispError::Config("text log-ratios must be given as a pair".into()));
        }
        if let Some(q) = &self.q {
            if q.len() != self.neg_logratios.len() {
                return Err(MispError::dim("q must align with neg_logratios"));
            }
            if q.iter().any(|&v| !(v > T::zero() && v <= T::one())) {
                return Err(MispError::Domain("proposal probabilities must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoConfig<T> {
    /// Preference temperature β.
    pub beta: T,
    /// Weight λ of the text loss.
    pub lambda: T,
}

impl<T: Scalar> Default for DpoConfig<T> {
    /// β = 0.5, λ = 1.
    fn default() -> Self {
        DpoConfig {
            beta: T::lit(0.5),
            lambda: T::one(),
        }
    }
}

impl<T: Scalar> DpoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(MispError::Config("beta must be positive".into()));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(MispError::Config("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// The pieces of the softmax-weighted gradient decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct MnGradientReport<T> {
    /// `a_i = β (neg_i − pos)`
    pub advantages: Vec<T>,
    /// `p_i = softmax(a)_i`
    pub preference_weights: Vec<T>,
    /// `σ(log Σ exp a_i)`
    pub sigma_factor: T,
    /// `β · σ(log Σ exp a_i) · p_i`: the coefficient of
    /// `∇ log π(y|x,m_neg_i) − ∇ log π(y|x,m_pos)` in the loss gradient.
    pub per_negative_delta_weights: Vec<T>,
}

fn check_finite<T: Scalar>(vals: &[T]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MispError::NonFinite("log-ratios must be finite".into()))
    }
}

/// `−log σ(β (pos − neg))`.
pub fn pairwise_dpo_loss<T: Scalar>(pos_logratio: T, neg_logratio: T, beta: T) -> Result<T> {
    check_finite(&[pos_logratio, neg_logratio, beta])?;
    Ok(softplus(-beta * (pos_logratio - neg_logratio)))
}

pub fn advantages<T: Scalar>(instance: &PreferenceInstance<T>, beta: T) -> Vec<T> {
    let pos = instance.pos_logratio.0;
    instance.neg_logratios.iter().map(|n| beta * (n.0 - pos)).collect()
}

/// `−log σ(−log Σ_i exp a_i)`, evaluated as `softplus(lse(a))`.
pub fn mn_loss<T: Scalar>(instance: &PreferenceInstance<T>, beta: T) -> Result<T> {
    instance.validate()?;
    check_finite(&[beta])?;
    Ok(softplus(log_sum_exp(&advantages(instance, beta))))
}

pub fn mn_gradient_report<T: Scalar>(instance: &PreferenceInstance<T>, beta: T) -> Result<MnGradientReport<T>> {
    instance.validate()?;
    let a = advantages(instance, beta);
    let p = softmax(&a);
    let sigma_factor = sigmoid(log_sum_exp(&a));
    let per_negative_delta_weights = p.iter().map(|&pi| beta * sigma_factor * pi).collect();
    Ok(MnGradientReport {
        advantages: a,
        preference_weights: p,
        sigma_factor,
        per_negative_delta_weights,
    })
}

/// `−log σ(β (text_pos − text_neg))`.
pub fn text_loss<T: Scalar>(instance: &PreferenceInstance<T>, beta: T) -> Result<T> {
    let (pos, neg) = instance
        .text_pair()
        .ok_or_else(|| MispError::Config("instance has no text log-ratio pair".into()))?;
    pairwise_dpo_loss(pos, neg, beta)
}

/// Multi-negative image loss plus `λ` times the text loss. The text pair
/// may be absent only when `λ = 0`.
pub fn total_loss<T: Scalar>(instance: &PreferenceInstance<T>, config: &DpoConfig<T>) -> Result<T> {
    config.validate()?;
    let img = mn_loss(instance, config.beta)?;
    if config.lambda == T::zero() {
        return Ok(img);
    }
    Ok(img + config.lambda * text_loss(instance, config.beta)?)
}

/// Mean of [`total_loss`] in input order.
pub fn mean_total_loss<T: Scalar>(instances: &[PreferenceInstance<T>], config: &DpoConfig<T>) -> Result<T> {
    if instances.is_empty() {
        return Err(MispError::Empty("no preference instances".into()));
    }
    let mut acc = T::zero();
    for inst in instances {
        acc += total_loss(inst, config)?;
    }
    Ok(acc / T::from_usize_lossy(instances.len()))
}
