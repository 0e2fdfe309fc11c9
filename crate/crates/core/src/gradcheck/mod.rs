//! Central finite differences and the relative-error measure used by every
//! gradient check in the crate and the CLI.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

mod scenarios;

pub use scenarios::{logratio_max_error, pl_dpo_max_error, sae_max_error, toy_max_error};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of [`relative_error`]. Coordinates whose true derivative
/// is below this magnitude are compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, REL_ERR_FLOOR)`.
pub fn relative_error<T: Scalar>(a: T, b: T) -> f64 {
    let (a, b) = (a.as_f64(), b.as_f64());
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// Gradient of `f` at `theta` by central differences on every coordinate.
pub fn central_difference<T: Scalar>(theta: &[T], step: f64, f: impl Fn(&[T]) -> T) -> Vec<T> {
    let coords: Vec<usize> = (0..theta.len()).collect();
    central_difference_at(theta, &coords, step, f)
}

/// Central differences restricted to `coords`; output is aligned with `coords`.
pub fn central_difference_at<T: Scalar>(
    theta: &[T],
    coords: &[usize],
    step: f64,
    f: impl Fn(&[T]) -> T,
) -> Vec<T> {
    let h = T::lit(step);
    let mut x = theta.to_vec();
    coords
        .iter()
        .map(|&i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (h + h)
        })
        .collect()
}

/// Up to `count` distinct coordinates out of `len`, sorted, chosen by seed.
pub fn sample_coordinates(len: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= len {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, len, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Largest relative error between two aligned gradient vectors.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}
