use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embed::{dot, l2_norm};
use crate::error::{MispError, Result};
use crate::scalar::Scalar;

/// Synthetic pool whose members sit near mutually orthogonal factor directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFactorSpec {
    pub num_factors: usize,
    pub samples_per_factor: usize,
    /// Expected norm of the noise added to each unit centroid.
    pub factor_noise: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for PlantedFactorSpec {
    fn default() -> Self {
        PlantedFactorSpec {
            num_factors: 4,
            samples_per_factor: 3,
            factor_noise: 0.05,
            dim: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPool<T> {
    /// Unit, mutually orthogonal factor directions.
    pub centroids: Vec<Vec<T>>,
    /// Candidates grouped by factor: factor 0 first.
    pub vectors: Vec<Vec<T>>,
    /// Ground-truth factor of each candidate.
    pub labels: Vec<usize>,
}

pub(crate) fn orthonormal_directions(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for u in &out {
            let p = dot(&v, u);
            for (a, b) in v.iter_mut().zip(u) {
                *a -= p * b;
            }
        }
        let n = l2_norm(&v);
        if n > 1e-6 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Builds a pool of `num_factors * samples_per_factor` vectors: each is its
/// factor's unit centroid plus Gaussian noise with per-coordinate standard
/// deviation `factor_noise / sqrt(dim)`.
pub fn make_planted_pool<T: Scalar>(spec: &PlantedFactorSpec) -> Result<PlantedPool<T>> {
    if spec.num_factors < 2 {
        return Err(MispError::Config("planted pool needs at least 2 factors".into()));
    }
    if spec.samples_per_factor == 0 {
        return Err(MispError::Config("samples_per_factor must be positive".into()));
    }
    if spec.num_factors > spec.dim {
        return Err(MispError::dim(format!(
            "{} orthogonal factors do not fit in dimension {}",
            spec.num_factors, spec.dim
        )));
    }
    if !(spec.factor_noise >= 0.0 && spec.factor_noise.is_finite()) {
        return Err(MispError::Config("factor_noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centroids = orthonormal_directions(&mut rng, spec.num_factors, spec.dim);
    let sd = spec.factor_noise / (spec.dim as f64).sqrt();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (k, c) in centroids.iter().enumerate() {
        for _ in 0..spec.samples_per_factor {
            let v = c
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(x + sd * z)
                })
                .collect();
            vectors.push(v);
            labels.push(k);
        }
    }
    Ok(PlantedPool {
        centroids: centroids.into_iter().map(|c| c.into_iter().map(T::lit).collect()).collect(),
        vectors,
        labels,
    })
}

/// Number of distinct labels among `indices`.
pub fn coverage(labels: &[usize], indices: &[usize]) -> usize {
    let mut seen: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}
