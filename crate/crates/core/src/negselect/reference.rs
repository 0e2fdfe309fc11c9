use super::{check_pool, CandidateScore, Pick, SelectionConfig};
use crate::error::Result;
use crate::scalar::Scalar;

/// Straight-line restatement of the selection loop, recomputing every
/// cosine from scratch each round. Used to cross-check [`super::greedy_select`].
pub fn reference_select<T: Scalar>(
    scores: &[CandidateScore<T>],
    codes: &[Vec<T>],
    config: &SelectionConfig<T>,
) -> Result<Vec<Pick<T>>> {
    check_pool(scores, codes, config)?;
    let mut selected: Vec<usize> = Vec::new();
    let mut picks = Vec::new();
    while selected.len() < config.k && selected.len() < scores.len() {
        let mut best_i = usize::MAX;
        let mut best_val = T::neg_infinity();
        let mut best_bonus = T::zero();
        for i in 0..scores.len() {
            if selected.contains(&i) {
                continue;
            }
            let mut bonus = T::zero();
            if !selected.is_empty() {
                let mut m = T::infinity();
                for &j in &selected {
                    let d = T::one() - cosine_naive(&codes[i], &codes[j]);
                    if d < m {
                        m = d;
                    }
                }
                bonus = config.diversity_weight * m;
            }
            let val = scores[i].score + bonus;
            if best_i == usize::MAX || val > best_val {
                best_i = i;
                best_val = val;
                best_bonus = bonus;
            }
        }
        selected.push(best_i);
        picks.push(Pick {
            index: best_i,
            id: scores[best_i].candidate_id.clone(),
            score: scores[best_i].score,
            diversity_bonus: best_bonus,
        });
    }
    Ok(picks)
}

// Index loops on purpose: this is the independent, unoptimized oracle.
#[allow(clippy::needless_range_loop)]
fn cosine_naive<T: Scalar>(u: &[T], v: &[T]) -> T {
    let mut uv = T::zero();
    let mut uu = T::zero();
    let mut vv = T::zero();
    for i in 0..u.len() {
        uv += u[i] * v[i];
    }
    for i in 0..u.len() {
        uu += u[i] * u[i];
    }
    for i in 0..v.len() {
        vv += v[i] * v[i];
    }
    let c = uv / (uu.sqrt() * vv.sqrt());
    if c > T::one() {
        T::one()
    } else if c < -T::one() {
        -T::one()
    } else {
        c
    }
}
