//! Parameter gradients of the preference losses for any policy that exposes
//! `log π_θ(y | context)` and its gradient.

use serde::{Deserialize, Serialize};

use super::{mn_gradient_report, DpoConfig, LogRatio, PreferenceInstance};
use crate::error::{MispError, Result};
use crate::numeric::{log_sum_exp, sigmoid, softmax};
use crate::scalar::Scalar;

/// Minimal interface the gradient assembly needs from a policy.
pub trait DifferentiablePolicy<T: Scalar> {
    /// A (prompt, image, response) triple the policy can score.
    type Context;

    fn num_params(&self) -> usize;

    fn log_prob(&self, ctx: &Self::Context) -> Result<T>;

    /// Gradient of [`log_prob`](Self::log_prob) w.r.t. the flattened parameters.
    fn log_prob_grad(&self, ctx: &Self::Context) -> Result<Vec<T>>;
}

/// Chosen and rejected responses, both under the positive image.
#[derive(Debug, Clone)]
pub struct TextPair<C, T> {
    pub chosen: C,
    pub rejected: C,
    pub ref_chosen: T,
    pub ref_rejected: T,
}

/// Contexts for one training instance: the preferred response under the
/// positive image and under each negative image, with frozen reference
/// log-probabilities for each.
#[derive(Debug, Clone)]
pub struct PolicyInstance<C, T> {
    pub positive: C,
    pub negatives: Vec<C>,
    pub ref_pos_logprob: T,
    pub ref_neg_logprobs: Vec<T>,
    pub text: Option<TextPair<C, T>>,
}

impl<C, T: Scalar> PolicyInstance<C, T> {
    /// Evaluates the policy on every context and returns the log-ratios.
    pub fn preference_instance<P>(&self, policy: &P) -> Result<PreferenceInstance<T>>
    where
        P: DifferentiablePolicy<T, Context = C>,
    {
        if self.negatives.len() != self.ref_neg_logprobs.len() {
            return Err(MispError::dim("reference log-probs must align with negatives"));
        }
        let pos = LogRatio::from_logprobs(policy.log_prob(&self.positive)?, self.ref_pos_logprob);
        let negs = self
            .negatives
            .iter()
            .zip(&self.ref_neg_logprobs)
            .map(|(c, &r)| Ok(LogRatio::from_logprobs(policy.log_prob(c)?, r)))
            .collect::<Result<Vec<_>>>()?;
        let mut inst = PreferenceInstance {
            pos_logratio: pos,
            neg_logratios: negs,
            text_pos_logratio: None,
            text_neg_logratio: None,
            q: None,
        };
        if let Some(t) = &self.text {
            inst.text_pos_logratio = Some(LogRatio::from_logprobs(policy.log_prob(&t.chosen)?, t.ref_chosen));
            inst.text_neg_logratio = Some(LogRatio::from_logprobs(policy.log_prob(&t.rejected)?, t.ref_rejected));
        }
        Ok(inst)
    }
}

fn axpy<T: Scalar>(acc: &mut [T], w: T, x: &[T]) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += w * v;
    }
}

/// `Σ_i w_i Δ_i` with `Δ_i = ∇log π(neg_i) − ∇log π(pos)`.
fn weighted_deltas<P, T>(policy: &P, instance: &PolicyInstance<P::Context, T>, weights: &[T]) -> Result<Vec<T>>
where
    T: Scalar,
    P: DifferentiablePolicy<T>,
{
    let n = policy.num_params();
    let grad_pos = policy.log_prob_grad(&instance.positive)?;
    let mut out = vec![T::zero(); n];
    let mut total = T::zero();
    for (ctx, &w) in instance.negatives.iter().zip(weights) {
        axpy(&mut out, w, &policy.log_prob_grad(ctx)?);
        total += w;
    }
    axpy(&mut out, -total, &grad_pos);
    Ok(out)
}

/// Exact gradient of the multi-negative image loss:
/// `β σ(log Σ exp a_i) Σ_i p_i Δ_i`.
pub fn mn_gradient_exact<P, T>(policy: &P, instance: &PolicyInstance<P::Context, T>, beta: T) -> Result<Vec<T>>
where
    T: Scalar,
    P: DifferentiablePolicy<T>,
{
    let pref = instance.preference_instance(policy)?;
    let report = mn_gradient_report(&pref, beta)?;
    weighted_deltas(policy, instance, &report.per_negative_delta_weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsMode {
    /// Per-sample weight `exp(a_i) / q_i`, no normalizer.
    Literal,
    /// Weights `exp(a_i) / q_i` divided by their sum over the sample.
    SelfNormalized,
}

/// Importance weights for sampled negatives with proposal probabilities `q`.
pub fn is_weights<T: Scalar>(advantages: &[T], q: &[T], mode: IsMode) -> Result<Vec<T>> {
    if advantages.len() != q.len() {
        return Err(MispError::dim("q must align with the sampled negatives"));
    }
    if advantages.is_empty() {
        return Err(MispError::Empty("importance sample is empty".into()));
    }
    if let Some(bad) = q.iter().find(|&&v| !(v > T::zero())) {
        return Err(MispError::Domain(format!("proposal probability {bad} is not positive")));
    }
    Ok(match mode {
        IsMode::Literal => advantages.iter().zip(q).map(|(&a, &qi)| a.exp() / qi).collect(),
        IsMode::SelfNormalized => {
            let logw: Vec<T> = advantages.iter().zip(q).map(|(&a, &qi)| a - qi.ln()).collect();
            softmax(&logw)
        }
    })
}

/// Importance-sampling estimate of the image-loss gradient over the sampled
/// negatives in `instance`:
/// `β σ(log Σ_{i∈S} exp a_i) Σ_{i∈S} w_i Δ_i` with `w` from [`is_weights`].
pub fn mn_gradient_is<P, T>(
    policy: &P,
    instance: &PolicyInstance<P::Context, T>,
    q: &[T],
    beta: T,
    mode: IsMode,
) -> Result<Vec<T>>
where
    T: Scalar,
    P: DifferentiablePolicy<T>,
{
    let pref = instance.preference_instance(policy)?;
    let a = super::advantages(&pref, beta);
    let w = is_weights(&a, q, mode)?;
    let scale = beta * sigmoid(log_sum_exp(&a));
    let scaled: Vec<T> = w.into_iter().map(|wi| scale * wi).collect();
    weighted_deltas(policy, instance, &scaled)
}

/// Gradient of the text loss `softplus(−β (r_chosen − r_rejected))`.
pub fn text_gradient<P, T>(policy: &P, pair: &TextPair<P::Context, T>, beta: T) -> Result<Vec<T>>
where
    T: Scalar,
    P: DifferentiablePolicy<T>,
{
    let rc = policy.log_prob(&pair.chosen)? - pair.ref_chosen;
    let rr = policy.log_prob(&pair.rejected)? - pair.ref_rejected;
    let coef = beta * sigmoid(-beta * (rc - rr));
    let mut out = vec![T::zero(); policy.num_params()];
    axpy(&mut out, -coef, &policy.log_prob_grad(&pair.chosen)?);
    axpy(&mut out, coef, &policy.log_prob_grad(&pair.rejected)?);
    Ok(out)
}

/// Gradient of the combined objective: exact image gradient plus `λ` times
/// the text gradient (text pair required when `λ > 0`).
pub fn total_loss_gradient<P, T>(
    policy: &P,
    instance: &PolicyInstance<P::Context, T>,
    config: &DpoConfig<T>,
) -> Result<Vec<T>>
where
    T: Scalar,
    P: DifferentiablePolicy<T>,
{
    config.validate()?;
    let mut g = mn_gradient_exact(policy, instance, config.beta)?;
    if config.lambda > T::zero() {
        let pair = instance
            .text
            .as_ref()
            .ok_or_else(|| MispError::Config("lambda > 0 requires a text pair".into()))?;
        axpy(&mut g, config.lambda, &text_gradient(policy, pair, config.beta)?);
    }
    Ok(g)
}
