use misp_core::negselect::{greedy_select, reference_select, CandidateScore, SelectionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pool(rng: &mut ChaCha8Rng) -> (Vec<CandidateScore<f64>>, Vec<Vec<f64>>) {
    let n = rng.random_range(2..=64);
    let h = rng.random_range(2..=16);
    // Coarse score grid so ties actually happen.
    let coarse = rng.random_bool(0.3);
    let scores = (0..n)
        .map(|i| {
            let s = if coarse {
                f64::from(rng.random_range(0..4u8)) * 0.5
            } else {
                rng.random_range(0.0..2.0)
            };
            CandidateScore::from_score(format!("c{i}"), s)
        })
        .collect();
    let codes = (0..n)
        .map(|_| (0..h).map(|_| rng.random_range(0.01..1.0)).collect())
        .collect();
    (scores, codes)
}

#[test]
fn greedy_matches_reference_on_500_pools() {
    let mut mismatches = 0;
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scores, codes) = random_pool(&mut rng);
        let config = SelectionConfig {
            k: rng.random_range(1..=8),
            diversity_weight: [0.0, 0.5, 2.0][seed as usize % 3],
        };
        let fast: Vec<String> = greedy_select(&scores, &codes, &config).unwrap().into_iter().map(|p| p.id).collect();
        let slow: Vec<String> = reference_select(&scores, &codes, &config).unwrap().into_iter().map(|p| p.id).collect();
        if fast != slow {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn picks_are_distinct_and_bounded() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scores, codes) = random_pool(&mut rng);
        let k = rng.random_range(1..=80);
        let picks = greedy_select(&scores, &codes, &SelectionConfig { k, diversity_weight: 1.0 }).unwrap();
        assert_eq!(picks.len(), k.min(scores.len()));
        let mut idx: Vec<usize> = picks.iter().map(|p| p.index).collect();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), picks.len());
        assert_eq!(picks[0].diversity_bonus, 0.0);
        assert!(picks.iter().all(|p| (0.0..=2.0).contains(&p.diversity_bonus)));
    }
}
