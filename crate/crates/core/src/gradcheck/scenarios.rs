//! Seeded, self-contained gradient checks shared by the CLI and the test
//! suites. Each returns the worst relative error it saw.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{central_difference, max_relative_error, relative_error, FD_STEP};
use crate::error::Result;
use crate::pl_dpo::{
    mn_gradient_exact, mn_gradient_report, mn_loss, total_loss, total_loss_gradient, DifferentiablePolicy, DpoConfig,
    PolicyInstance, PreferenceInstance, TextPair,
};
use crate::sae::{SaeConfig, SaeModel};
use crate::toy::{toy_logprob, toy_logprob_grad, ToyContext, ToyPolicy};

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// SAE loss gradient over every parameter, for `γ ∈ {0, 1, 10}`.
pub fn sae_max_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, h, rows) = (6, 5, 7);
    let x = Array2::from_shape_vec((rows, n), uniform_vec(&mut rng, rows * n, 1.0)).expect("shape");
    let mut worst: f64 = 0.0;
    for gamma in [0.0, 1.0, 10.0] {
        let mut cfg = SaeConfig::<f64>::new(n);
        cfg.hidden_dim = h;
        cfg.sparsity_weight = gamma;
        cfg.target_activation = 0.1;
        let mut model = SaeModel::zeros(cfg)?;
        let theta = uniform_vec(&mut rng, model.num_params(), 0.7);
        model.set_params_flat(&theta)?;
        let analytic = model.grad_matrix(x.view())?.1.flat();
        let numeric = central_difference(&theta, FD_STEP, |p| {
            let mut probe = model.clone();
            probe.set_params_flat(p).expect("length");
            probe.loss_matrix(x.view()).expect("finite").total()
        });
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn toy_context(rng: &mut ChaCha8Rng, v: usize, f: usize, response: Option<&[usize]>) -> ToyContext<f64> {
    ToyContext {
        features: uniform_vec(rng, f, 1.0),
        response: match response {
            Some(r) => r.to_vec(),
            None => (0..4).map(|_| rng.random_range(0..v)).collect(),
        },
    }
}

fn toy_policy(rng: &mut ChaCha8Rng, v: usize, f: usize) -> ToyPolicy<f64> {
    ToyPolicy {
        weights: Array2::from_shape_vec((v, f), uniform_vec(rng, v * f, 1.0)).expect("shape"),
    }
}

/// Toy policy log-probability gradient.
pub fn toy_max_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v, f) = (6, 4);
    let policy = toy_policy(&mut rng, v, f);
    let ctx = toy_context(&mut rng, v, f, None);
    let analytic: Vec<f64> = toy_logprob_grad(&policy, &ctx)?.into_iter().collect();
    let numeric = central_difference(&policy.flat_params(), FD_STEP, |p| {
        let mut q = policy.clone();
        q.set_flat_params(p).expect("length");
        toy_logprob(&q, &ctx).expect("valid context")
    });
    Ok(max_relative_error(&analytic, &numeric))
}

/// Parameter gradients of the multi-negative image loss and of the combined
/// loss on a toy policy with three negatives and a text pair.
pub fn pl_dpo_max_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v, f) = (8, 5);
    let policy = toy_policy(&mut rng, v, f);
    let positive = toy_context(&mut rng, v, f, None);
    let response = positive.response.clone();
    let negatives: Vec<_> = (0..3).map(|_| toy_context(&mut rng, v, f, Some(&response))).collect();
    let mut rejected = toy_context(&mut rng, v, f, None);
    rejected.features = positive.features.clone();
    let inst = PolicyInstance {
        ref_pos_logprob: rng.random_range(-8.0..-4.0),
        ref_neg_logprobs: (0..3).map(|_| rng.random_range(-8.0..-4.0)).collect(),
        text: Some(TextPair {
            chosen: positive.clone(),
            rejected,
            ref_chosen: rng.random_range(-8.0..-4.0),
            ref_rejected: rng.random_range(-8.0..-4.0),
        }),
        positive,
        negatives,
    };
    let config = DpoConfig::default();
    let theta = policy.flat_params();
    let at = |p: &[f64]| {
        let mut q = policy.clone();
        q.set_flat_params(p).expect("length");
        q
    };

    let image = mn_gradient_exact(&policy, &inst, config.beta)?;
    let image_fd = central_difference(&theta, FD_STEP, |p| {
        mn_loss(&inst.preference_instance(&at(p)).expect("finite"), config.beta).expect("finite")
    });
    let total = total_loss_gradient(&policy, &inst, &config)?;
    let total_fd = central_difference(&theta, FD_STEP, |p| {
        total_loss(&inst.preference_instance(&at(p)).expect("finite"), &config).expect("finite")
    });
    debug_assert_eq!(policy.num_params(), theta.len());
    Ok(max_relative_error(&image, &image_fd).max(max_relative_error(&total, &total_fd)))
}

/// Derivatives of the multi-negative loss with respect to each log-ratio,
/// read off the gradient report: `∂/∂neg_i = w_i`, `∂/∂pos = −Σ w_i`.
pub fn logratio_max_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let beta = 0.5;
    let pos = rng.random_range(-3.0..3.0);
    let negs = uniform_vec(&mut rng, n, 3.0);
    let report = mn_gradient_report(&PreferenceInstance::new(pos, &negs), beta)?;
    let w = &report.per_negative_delta_weights;
    let mut analytic = vec![-w.iter().sum::<f64>()];
    analytic.extend_from_slice(w);
    let mut point = vec![pos];
    point.extend_from_slice(&negs);
    let numeric = central_difference(&point, FD_STEP, |p| {
        mn_loss(&PreferenceInstance::new(p[0], &p[1..]), beta).expect("finite")
    });
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &b)| relative_error(a, b))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_pass_their_thresholds() {
        for seed in 0..3 {
            assert!(sae_max_error(seed).unwrap() < 1e-5);
            assert!(toy_max_error(seed).unwrap() < 1e-6);
            assert!(pl_dpo_max_error(seed).unwrap() < 1e-5);
            assert!(logratio_max_error(seed).unwrap() < 1e-7);
        }
    }

    #[test]
    fn scenarios_are_deterministic() {
        assert_eq!(sae_max_error(9).unwrap(), sae_max_error(9).unwrap());
        assert_eq!(pl_dpo_max_error(9).unwrap(), pl_dpo_max_error(9).unwrap());
    }
}
