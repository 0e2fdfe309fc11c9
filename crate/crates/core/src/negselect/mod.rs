//! Candidate scoring and greedy diversity-promoting selection of negatives.
//!
//! Each candidate's difference vector `d_i` is scored as
//!
//! ```text
//! s_i = ℓ_i / max_j ℓ_j + v_i / max_j v_j,   ℓ_i = ‖d_i − D(E(d_i))‖²,  v_i = ‖E(d_i)‖₁
//! ```
//!
//! with maxima over the candidate pool of one instance. Selection then picks,
//! one at a time, the unselected candidate maximizing
//! `s_i + β_div · min_{j selected} (1 − cos(E(d_i), E(d_j)))`; the bonus is 0
//! while nothing is selected, and ties go to the smallest index.

mod greedy;
mod reference;
mod score;

pub use greedy::greedy_select;
pub use reference::reference_select;
pub use score::{encode_codes, score_and_encode, score_candidates, CandidateScore};

use serde::{Deserialize, Serialize};

use crate::error::{MispError, Result};
use crate::scalar::Scalar;

pub const MANIFEST_FORMAT: &str = "misp-sel-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig<T> {
    /// Number of negatives to keep.
    pub k: usize,
    /// β_div, weight of the diversity bonus. Distinct from the DPO β.
    pub diversity_weight: T,
}

impl<T: Scalar> Default for SelectionConfig<T> {
    /// K = 3, β_div = 0.5.
    fn default() -> Self {
        SelectionConfig {
            k: 3,
            diversity_weight: T::lit(0.5),
        }
    }
}

impl<T: Scalar> SelectionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(MispError::Config("selection size K must be at least 1".into()));
        }
        if !(self.diversity_weight >= T::zero() && self.diversity_weight.is_finite()) {
            return Err(MispError::Config("diversity_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// One greedy pick.
#[derive(Debug, Clone, PartialEq)]
pub struct Pick<T> {
    /// Position in the candidate pool.
    pub index: usize,
    pub id: String,
    pub score: T,
    /// `β_div · min_j (1 − cos)` at the time of the pick.
    pub diversity_bonus: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedEntry<T> {
    pub id: String,
    pub score: T,
    pub diversity_bonus: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest<T> {
    pub format: String,
    pub prompt_id: String,
    pub positive_id: String,
    pub config: SelectionConfig<T>,
    pub selected: Vec<SelectedEntry<T>>,
}

impl<T: Scalar> SelectionManifest<T> {
    pub fn new(
        prompt_id: impl Into<String>,
        positive_id: impl Into<String>,
        config: SelectionConfig<T>,
        picks: &[Pick<T>],
    ) -> Self {
        SelectionManifest {
            format: MANIFEST_FORMAT.to_string(),
            prompt_id: prompt_id.into(),
            positive_id: positive_id.into(),
            config,
            selected: picks
                .iter()
                .map(|p| SelectedEntry {
                    id: p.id.clone(),
                    score: p.score,
                    diversity_bonus: p.diversity_bonus,
                })
                .collect(),
        }
    }

    pub fn selected_ids(&self) -> Vec<&str> {
        self.selected.iter().map(|e| e.id.as_str()).collect()
    }
}

/// Shared input validation for both selection implementations.
pub(crate) fn check_pool<T: Scalar>(
    scores: &[CandidateScore<T>],
    codes: &[Vec<T>],
    config: &SelectionConfig<T>,
) -> Result<()> {
    config.validate()?;
    if scores.is_empty() {
        return Err(MispError::Empty("candidate pool is empty".into()));
    }
    if scores.len() != codes.len() {
        return Err(MispError::dim(format!(
            "{} scores but {} codes",
            scores.len(),
            codes.len()
        )));
    }
    let h = codes[0].len();
    if codes.iter().any(|c| c.len() != h) {
        return Err(MispError::dim("codes must share a length"));
    }
    let zero: Vec<String> = scores
        .iter()
        .zip(codes)
        .filter(|(_, c)| c.iter().all(|&v| v == T::zero()))
        .map(|(s, _)| s.candidate_id.clone())
        .collect();
    if !zero.is_empty() {
        return Err(MispError::Degenerate { ids: zero });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_json_shape() {
        let picks = vec![Pick {
            index: 2,
            id: "c2".to_string(),
            score: 1.5f64,
            diversity_bonus: 0.0,
        }];
        let m = SelectionManifest::new("p", "img", SelectionConfig::default(), &picks);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(
            text,
            r#"{"format":"misp-sel-v1","prompt_id":"p","positive_id":"img","config":{"k":3,"diversity_weight":0.5},"selected":[{"id":"c2","score":1.5,"diversity_bonus":0.0}]}"#
        );
        let back: SelectionManifest<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn defaults() {
        let c = SelectionConfig::<f64>::default();
        assert_eq!(c.k, 3);
        assert_eq!(c.diversity_weight, 0.5);
        assert!(SelectionConfig { k: 0, diversity_weight: 0.5 }.validate().is_err());
    }

    fn pool(scores: &[f64]) -> Vec<CandidateScore<f64>> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| CandidateScore::from_score(format!("c{i}"), s))
            .collect()
    }

    #[test]
    fn zero_diversity_weight_is_top_k_with_index_ties() {
        let scores = pool(&[0.5, 1.2, 0.9, 1.2, 0.1]);
        let codes = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, -1.0]];
        let cfg = SelectionConfig { k: 3, diversity_weight: 0.0 };
        for picks in [
            greedy_select(&scores, &codes, &cfg).unwrap(),
            reference_select(&scores, &codes, &cfg).unwrap(),
        ] {
            let idx: Vec<usize> = picks.iter().map(|p| p.index).collect();
            assert_eq!(idx, vec![1, 3, 2]);
            assert!(picks.iter().all(|p| p.diversity_bonus == 0.0));
        }
    }

    #[test]
    fn k_at_least_pool_selects_everything() {
        let scores = pool(&[0.2, 0.4, 0.3]);
        let codes = vec![vec![1.0, 0.0], vec![1.0, 0.1], vec![0.0, 1.0]];
        let cfg = SelectionConfig { k: 10, diversity_weight: 1.0 };
        let picks = greedy_select(&scores, &codes, &cfg).unwrap();
        let idx: Vec<usize> = picks.iter().map(|p| p.index).collect();
        // 1 first; then 2 is orthogonal to 1 (0.3 + 1.0) vs 0 nearly parallel.
        assert_eq!(idx, vec![1, 2, 0]);
        assert_eq!(picks[0].diversity_bonus, 0.0);
        assert!((picks[1].diversity_bonus - (1.0 - 0.1 / 1.01f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn zero_code_is_degenerate() {
        let scores = pool(&[0.2, 0.4, 0.3]);
        let codes = vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]];
        let cfg = SelectionConfig::default();
        match greedy_select(&scores, &codes, &cfg) {
            Err(MispError::Degenerate { ids }) => assert_eq!(ids, vec!["c1", "c2"]),
            other => panic!("{other:?}"),
        }
        assert!(reference_select(&scores, &codes, &cfg).is_err());
    }

    #[test]
    fn misaligned_or_empty_pool_rejected() {
        let cfg = SelectionConfig::<f64>::default();
        assert!(matches!(greedy_select(&[], &[], &cfg), Err(MispError::Empty(_))));
        let scores = pool(&[0.2]);
        assert!(greedy_select(&scores, &[vec![1.0], vec![2.0]], &cfg).is_err());
    }
}
