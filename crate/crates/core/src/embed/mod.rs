//! Fused prompt-image embeddings, difference vectors and similarity primitives.
//!
//! The fused embedding of an image embedding `h_v` (length `d_v`) and a text
//! embedding `h_t` (length `d_t`) is the outer product `h_v h_tᵀ` flattened in
//! row-major order: entry `i * d_t + j` holds `h_v[i] * h_t[j]`. Image index is
//! outer, text index inner. This order is fixed and is what the binary and
//! JSON-lines files store.

pub mod io;
mod pca;
mod projection;

pub use pca::{project_2d, Projection2d};
pub use projection::RandomSignProjection;

use crate::error::{MispError, Result};
use crate::numeric::all_finite;
use crate::scalar::Scalar;

/// A single encoder output (image or text side).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(MispError::dim("embedding must be non-empty"));
        }
        if !all_finite(&values) {
            return Err(MispError::NonFinite("embedding has non-finite entries".into()));
        }
        Ok(Embedding { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        l2_norm(&self.values)
    }

    /// Scales to unit L2 norm. A zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == T::zero() {
            return self.clone();
        }
        Embedding {
            values: self.values.iter().map(|&v| v / n).collect(),
        }
    }
}

/// Flattened outer product of an image and a text embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbedding<T> {
    values: Vec<T>,
}

impl<T: Scalar> FusedEmbedding<T> {
    /// Wraps already-fused values, e.g. a row read back from disk.
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(MispError::dim("fused embedding must be non-empty"));
        }
        if !all_finite(&values) {
            return Err(MispError::NonFinite("fused embedding has non-finite entries".into()));
        }
        Ok(FusedEmbedding { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// `fused(positive) - fused(candidate)` tagged with the candidate it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceVector<T> {
    pub candidate_id: String,
    pub values: Vec<T>,
}

impl<T: Scalar> DifferenceVector<T> {
    pub fn new(candidate_id: impl Into<String>, values: Vec<T>) -> Self {
        DifferenceVector {
            candidate_id: candidate_id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Row-major flattened outer product `vec(h_v h_tᵀ)`.
pub fn fuse<T: Scalar>(image_emb: &Embedding<T>, text_emb: &Embedding<T>) -> FusedEmbedding<T> {
    let img = image_emb.values();
    let txt = text_emb.values();
    let mut values = Vec::with_capacity(img.len() * txt.len());
    for &a in img {
        values.extend(txt.iter().map(|&b| a * b));
    }
    FusedEmbedding { values }
}

/// Fuses raw slices, validating them first.
pub fn fuse_slices<T: Scalar>(image: &[T], text: &[T]) -> Result<FusedEmbedding<T>> {
    let img = Embedding::new(image.to_vec())?;
    let txt = Embedding::new(text.to_vec())?;
    Ok(fuse(&img, &txt))
}

pub fn difference<T: Scalar>(
    positive: &FusedEmbedding<T>,
    candidate: &FusedEmbedding<T>,
    candidate_id: impl Into<String>,
) -> Result<DifferenceVector<T>> {
    if positive.len() != candidate.len() {
        return Err(MispError::dim(format!(
            "difference of fused embeddings with lengths {} and {}",
            positive.len(),
            candidate.len()
        )));
    }
    let values = positive
        .values()
        .iter()
        .zip(candidate.values())
        .map(|(&p, &c)| p - c)
        .collect();
    Ok(DifferenceVector::new(candidate_id, values))
}

pub fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

/// Cosine similarity, clamped into `[-1, 1]`.
///
/// Zero-norm arguments are rejected instead of mapped to a value.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(MispError::dim(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    let mut ids = Vec::new();
    if nu == T::zero() {
        ids.push("u".to_string());
    }
    if nv == T::zero() {
        ids.push("v".to_string());
    }
    if !ids.is_empty() {
        return Err(MispError::Degenerate { ids });
    }
    let c = dot(u, v) / (nu * nv);
    Ok(c.max(-T::one()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> Embedding<f64> {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fuse_small_example() {
        let f = fuse(&emb(&[1.0, 2.0]), &emb(&[3.0, 4.0]));
        assert_eq!(f.values(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn fuse_zero_image_annihilates() {
        let f = fuse(&emb(&[0.0; 3]), &emb(&[1.5, -2.0]));
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(f.len(), 6);
    }

    #[test]
    fn fuse_unit_vectors_has_unit_norm() {
        let a: Vec<f64> = (0..8).map(|i| ((i * 7 % 5) as f64) - 1.7).collect();
        let b: Vec<f64> = (0..8).map(|i| ((i * 3 % 7) as f64) * 0.3 - 0.4).collect();
        let f = fuse(&emb(&a).normalized(), &emb(&b).normalized());
        // Independent: sum of squares of every product.
        let mut sq = 0.0;
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &a {
            for y in &b {
                sq += (x / na * y / nb).powi(2);
            }
        }
        assert!((sq.sqrt() - 1.0).abs() < 1e-12);
        assert!((l2_norm(f.values()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fuse_rejects_empty_and_non_finite() {
        assert!(matches!(Embedding::<f64>::new(vec![]), Err(MispError::Dimension(_))));
        assert!(matches!(
            fuse_slices(&[1.0, f64::NAN], &[1.0]),
            Err(MispError::NonFinite(_))
        ));
    }

    #[test]
    fn difference_examples() {
        let p = FusedEmbedding::from_values(vec![3.0, 4.0, 6.0, 8.0]).unwrap();
        let c = FusedEmbedding::from_values(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(difference(&p, &c, "c").unwrap().values, vec![2.0, 3.0, 5.0, 7.0]);
        assert!(difference(&p, &p, "p").unwrap().values.iter().all(|&v| v == 0.0));
        let short = FusedEmbedding::from_values(vec![1.0]).unwrap();
        assert!(matches!(difference(&p, &short, "s"), Err(MispError::Dimension(_))));
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0f64).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0f64);
        assert!((cosine(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0f64).abs() < 1e-15);
        match cosine(&[0.0f64, 0.0], &[1.0, 0.0]) {
            Err(MispError::Degenerate { ids }) => assert_eq!(ids, vec!["u"]),
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn fuse_norm_is_product_of_norms(a in vec_strategy(6), b in vec_strategy(5)) {
            prop_assume!(a.iter().any(|&x| x != 0.0) && b.iter().any(|&x| x != 0.0));
            let ea = emb(&a);
            let eb = emb(&b);
            let f = fuse(&ea, &eb);
            let expected = ea.norm() * eb.norm();
            prop_assert!((l2_norm(f.values()) - expected).abs() <= 1e-12 * expected);
        }

        #[test]
        fn difference_is_antisymmetric(a in vec_strategy(7), b in vec_strategy(7)) {
            let fa = FusedEmbedding::from_values(a).unwrap();
            let fb = FusedEmbedding::from_values(b).unwrap();
            let ab = difference(&fa, &fb, "x").unwrap();
            let ba = difference(&fb, &fa, "y").unwrap();
            for (x, y) in ab.values.iter().zip(&ba.values) {
                prop_assert_eq!(*x, -*y);
            }
        }

        #[test]
        fn cosine_scale_invariant(u in vec_strategy(5), v in vec_strategy(5), s in 0.01f64..100.0, t in 0.01f64..100.0) {
            prop_assume!(l2_norm(&u) > 1e-3 && l2_norm(&v) > 1e-3);
            let c = cosine(&u, &v).unwrap();
            let us: Vec<f64> = u.iter().map(|x| x * s).collect();
            let vt: Vec<f64> = v.iter().map(|x| x * t).collect();
            prop_assert!((cosine(&us, &vt).unwrap() - c).abs() < 1e-12);
            prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
