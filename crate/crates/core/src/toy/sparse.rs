use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::planted::orthonormal_directions;
use crate::embed::DifferenceVector;
use crate::error::{MispError, Result};
use crate::scalar::Scalar;

/// Rows built as sparse nonnegative combinations of a fixed dictionary of
/// orthonormal atoms: the kind of data a sparse autoencoder should compress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDatasetSpec {
    pub rows: usize,
    pub dim: usize,
    pub num_atoms: usize,
    pub active_atoms: usize,
    pub min_coef: f64,
    pub max_coef: f64,
    pub seed: u64,
}

impl Default for SparseDatasetSpec {
    fn default() -> Self {
        SparseDatasetSpec {
            rows: 2000,
            dim: 64,
            num_atoms: 32,
            active_atoms: 3,
            min_coef: 0.5,
            max_coef: 1.5,
            seed: 0,
        }
    }
}

/// Generates `rows` difference vectors with ids `row0`, `row1`, ...
pub fn make_sparse_dataset<T: Scalar>(spec: &SparseDatasetSpec) -> Result<Vec<DifferenceVector<T>>> {
    if spec.rows == 0 || spec.dim == 0 {
        return Err(MispError::Config("rows and dim must be positive".into()));
    }
    if spec.num_atoms > spec.dim {
        return Err(MispError::dim(format!(
            "{} orthonormal atoms do not fit in dimension {}",
            spec.num_atoms, spec.dim
        )));
    }
    if spec.active_atoms == 0 || spec.active_atoms > spec.num_atoms {
        return Err(MispError::Config("active_atoms must be in 1..=num_atoms".into()));
    }
    if !(spec.min_coef <= spec.max_coef && spec.min_coef.is_finite() && spec.max_coef.is_finite()) {
        return Err(MispError::Config("coefficient range is invalid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let atoms = orthonormal_directions(&mut rng, spec.num_atoms, spec.dim);
    let rows = (0..spec.rows)
        .map(|i| {
            let mut v = vec![0.0f64; spec.dim];
            for a in sample(&mut rng, spec.num_atoms, spec.active_atoms) {
                let c = spec.min_coef + (spec.max_coef - spec.min_coef) * rng.random::<f64>();
                for (x, u) in v.iter_mut().zip(&atoms[a]) {
                    *x += c * u;
                }
            }
            DifferenceVector::new(format!("row{i}"), v.into_iter().map(T::lit).collect())
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_have_expected_shape_and_norm_range() {
        let spec = SparseDatasetSpec { rows: 50, ..Default::default() };
        let rows = make_sparse_dataset::<f64>(&spec).unwrap();
        assert_eq!(rows.len(), 50);
        for r in &rows {
            assert_eq!(r.values.len(), 64);
            // Orthonormal atoms: squared norm is the sum of squared coefficients.
            let sq: f64 = r.values.iter().map(|x| x * x).sum();
            assert!((3.0 * 0.25 - 1e-9..=3.0 * 2.25 + 1e-9).contains(&sq));
        }
        assert_eq!(rows, make_sparse_dataset::<f64>(&spec).unwrap());
    }

    #[test]
    fn too_many_atoms_is_a_dimension_error() {
        let spec = SparseDatasetSpec { num_atoms: 65, ..Default::default() };
        assert!(matches!(make_sparse_dataset::<f64>(&spec), Err(MispError::Dimension(_))));
    }
}
