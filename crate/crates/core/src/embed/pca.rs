use ndarray::{Array1, Array2, Axis};

use crate::error::{MispError, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

/// Result of projecting a point set onto its two leading principal axes.
#[derive(Debug, Clone)]
pub struct Projection2d<T> {
    /// One `[x, y]` pair per input vector, in input order.
    pub points: Vec<[T; 2]>,
    /// Variances along the two axes (top-2 covariance eigenvalues).
    pub variances: [T; 2],
    /// Unit principal directions; a direction is all zeros when the data has
    /// rank below two.
    pub components: [Vec<T>; 2],
}

/// PCA onto the top-2 principal components.
///
/// Covariance uses the `1/(n-1)` normalization. Each component's
/// largest-magnitude loading is made positive, so the output is deterministic
/// for a given input order. The eigen-problem is solved on whichever of the
/// covariance (`d×d`) or Gram (`n×n`) matrix is smaller.
pub fn project_2d<T: Scalar>(vectors: &[Vec<T>]) -> Result<Projection2d<T>> {
    let n = vectors.len();
    if n < 2 {
        return Err(MispError::InsufficientData(format!(
            "PCA projection needs at least 2 vectors, got {n}"
        )));
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(MispError::dim("PCA inputs must share a positive dimension"));
    }
    let mut x = Array2::<T>::zeros((n, d));
    for (i, v) in vectors.iter().enumerate() {
        x.row_mut(i).assign(&Array1::from(v.clone()));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    x -= &mean;
    let denom = T::from_usize_lossy(n - 1);

    let mut components: [Vec<T>; 2] = [vec![T::zero(); d], vec![T::zero(); d]];
    let mut variances = [T::zero(); 2];
    let (eigvals, eigvecs) = if d <= n {
        symmetric_eigen(&(x.t().dot(&x) / denom))
    } else {
        symmetric_eigen(&(x.dot(&x.t()) / denom))
    };
    let scale: T = eigvals.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let floor = scale * T::epsilon() * T::from_usize_lossy(n.max(d)) * T::lit(16.0);

    for k in 0..2.min(eigvals.len()) {
        let lambda = eigvals[k].max(T::zero());
        let mut dir: Array1<T> = if d <= n {
            eigvecs.column(k).to_owned()
        } else {
            if lambda <= floor {
                continue;
            }
            let v = x.t().dot(&eigvecs.column(k));
            let norm = v.dot(&v).sqrt();
            v / norm
        };
        let mut best = T::zero();
        for &c in dir.iter() {
            if c.abs() > best.abs() {
                best = c;
            }
        }
        if best < T::zero() {
            dir.mapv_inplace(|c| -c);
        }
        variances[k] = if lambda <= floor { T::zero() } else { lambda };
        components[k] = dir.to_vec();
    }

    let points = (0..n)
        .map(|i| {
            let row = x.row(i);
            let px = components[0].iter().zip(row.iter()).map(|(&a, &b)| a * b).sum();
            let py = components[1].iter().zip(row.iter()).map(|(&a, &b)| a * b).sum();
            [px, py]
        })
        .collect();

    Ok(Projection2d {
        points,
        variances,
        components,
    })
}
