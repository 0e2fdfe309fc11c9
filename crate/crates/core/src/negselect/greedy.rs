use super::{check_pool, CandidateScore, Pick, SelectionConfig};
use crate::embed::{dot, l2_norm};
use crate::error::Result;
use crate::scalar::Scalar;

/// Greedy diversity-promoting selection.
///
/// Keeps a running `min (1 − cos)` per candidate against the picks so far,
/// so each round is one pass over the pool. Codes must be non-zero.
pub fn greedy_select<T: Scalar>(
    scores: &[CandidateScore<T>],
    codes: &[Vec<T>],
    config: &SelectionConfig<T>,
) -> Result<Vec<Pick<T>>> {
    check_pool(scores, codes, config)?;
    let n = scores.len();
    let k = config.k.min(n);
    let beta = config.diversity_weight;
    let norms: Vec<T> = codes.iter().map(|c| l2_norm(c)).collect();

    let mut taken = vec![false; n];
    let mut min_dist: Vec<Option<T>> = vec![None; n];
    let mut picks = Vec::with_capacity(k);

    for _ in 0..k {
        let mut best: Option<(usize, T, T)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let bonus = min_dist[i].map_or(T::zero(), |d| beta * d);
            let value = scores[i].score + bonus;
            if best.is_none_or(|(_, v, _)| value > v) {
                best = Some((i, value, bonus));
            }
        }
        let (chosen, _, bonus) = best.expect("k <= pool size");
        taken[chosen] = true;
        picks.push(Pick {
            index: chosen,
            id: scores[chosen].candidate_id.clone(),
            score: scores[chosen].score,
            diversity_bonus: bonus,
        });
        for i in (0..n).filter(|&i| !taken[i]) {
            let c = dot(&codes[i], &codes[chosen]) / (norms[i] * norms[chosen]);
            let d = T::one() - c.max(-T::one()).min(T::one());
            min_dist[i] = Some(min_dist[i].map_or(d, |m| m.min(d)));
        }
    }
    Ok(picks)
}
