use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MispError, Result};
use crate::scalar::Scalar;

/// Seeded random-sign projection `x -> R x / sqrt(k)` with `R ∈ {±1}^{k×n}`.
///
/// Used to cap the width of fused embeddings built from large encoder
/// outputs. The sign matrix is bit-packed and fully determined by the seed.
#[derive(Debug, Clone)]
pub struct RandomSignProjection {
    input_dim: usize,
    target_dim: usize,
    seed: u64,
    signs: Vec<u64>,
}

impl RandomSignProjection {
    pub fn new(input_dim: usize, target_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || target_dim == 0 {
            return Err(MispError::dim("projection dimensions must be positive"));
        }
        let bits = input_dim * target_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signs = (0..bits.div_ceil(64)).map(|_| rng.random::<u64>()).collect();
        Ok(RandomSignProjection {
            input_dim,
            target_dim,
            seed,
            signs,
        })
    }

    /// Projection only when `input_dim` exceeds `limit`.
    pub fn for_cap(input_dim: usize, limit: usize, target_dim: usize, seed: u64) -> Result<Option<Self>> {
        if input_dim <= limit {
            Ok(None)
        } else {
            Self::new(input_dim, target_dim, seed).map(Some)
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn positive(&self, row: usize, col: usize) -> bool {
        let bit = row * self.input_dim + col;
        (self.signs[bit / 64] >> (bit % 64)) & 1 == 1
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim {
            return Err(MispError::dim(format!(
                "projection expects length {}, got {}",
                self.input_dim,
                x.len()
            )));
        }
        let scale = T::one() / T::from_usize_lossy(self.target_dim).sqrt();
        Ok((0..self.target_dim)
            .map(|r| {
                let mut acc = T::zero();
                for (c, &v) in x.iter().enumerate() {
                    if self.positive(r, c) {
                        acc += v;
                    } else {
                        acc -= v;
                    }
                }
                acc * scale
            })
            .collect())
    }
}
