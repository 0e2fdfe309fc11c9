use std::io::Write;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::planted::coverage;
use super::policy::{toy_logprob, ToyContext, ToyPolicy};
use crate::embed::DifferenceVector;
use crate::error::{MispError, Result};
use crate::negselect::{greedy_select, score_and_encode, SelectionConfig};
use crate::pl_dpo::{total_loss, total_loss_gradient, DpoConfig, PolicyInstance, TextPair};
use crate::sae::{self, SaeConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// SAE scores plus greedy diversity selection.
    Diverse,
    /// SAE scores only (diversity weight forced to 0).
    TopScore,
    /// Uniform without replacement.
    Random,
}

/// Everything that defines a toy run. Defaults: V = 16, F = 8 (4 factor
/// coordinates and 4 prompt coordinates), responses of 4 tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainConfig {
    pub dpo: DpoConfig<f64>,
    pub sampler: Sampler,
    pub num_negatives: usize,
    pub diversity_weight: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub vocab: usize,
    /// Number of planted factors; also the response length.
    pub num_factors: usize,
    pub prompt_dim: usize,
    pub train_instances: usize,
    pub heldout_instances: usize,
    pub candidates_per_factor: usize,
    pub context_noise: f64,
    pub init_scale: f64,
    pub sae_hidden: usize,
    pub sae_epochs: usize,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig {
            dpo: DpoConfig::default(),
            sampler: Sampler::Diverse,
            num_negatives: 3,
            diversity_weight: 0.5,
            steps: 500,
            learning_rate: 0.05,
            seed: 0,
            vocab: 16,
            num_factors: 4,
            prompt_dim: 4,
            train_instances: 32,
            heldout_instances: 32,
            candidates_per_factor: 2,
            context_noise: 0.1,
            init_scale: 0.1,
            sae_hidden: 16,
            sae_epochs: 40,
        }
    }
}

impl ToyTrainConfig {
    pub fn feature_dim(&self) -> usize {
        self.num_factors + self.prompt_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.dpo.validate()?;
        let bad = |m: &str| Err(MispError::Config(m.to_string()));
        if self.num_factors < 2 {
            return bad("num_factors must be at least 2");
        }
        if self.vocab < 2 * self.num_factors {
            return bad("vocab must be at least 2 * num_factors");
        }
        if self.num_negatives == 0 {
            return bad("num_negatives must be at least 1");
        }
        if self.train_instances == 0 || self.heldout_instances == 0 || self.candidates_per_factor == 0 {
            return bad("instance and candidate counts must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.context_noise >= 0.0 && self.init_scale >= 0.0 && self.diversity_weight >= 0.0) {
            return bad("noise, init scale and diversity weight must be >= 0");
        }
        Ok(())
    }
}

/// One step of the metric trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub loss: f64,
    pub margin: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone)]
pub struct ToyTrace<T> {
    pub records: Vec<TraceRecord>,
    pub policy: ToyPolicy<T>,
}

impl<T> ToyTrace<T> {
    pub fn final_margin(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.margin)
    }
}

struct RawInstance {
    positive: Vec<f64>,
    response: Vec<usize>,
    rejected: Vec<usize>,
    negatives: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

/// Generated task: training instances with their selected negatives, and
/// held-out instances with one negative per factor.
pub struct ToyTask<T> {
    pub initial: ToyPolicy<T>,
    pub train: Vec<PolicyInstance<ToyContext<T>, T>>,
    pub heldout: Vec<(ToyContext<T>, Vec<ToyContext<T>>)>,
    /// Mean number of distinct factors among each instance's selected negatives.
    pub coverage: f64,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn raw_instance(cfg: &ToyTrainConfig, rng: &mut ChaCha8Rng, per_factor: usize) -> RawInstance {
    let l = cfg.num_factors;
    let signs: Vec<f64> = (0..l).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut positive = signs.clone();
    positive.extend((0..cfg.prompt_dim).map(|_| gauss(rng)));
    let response: Vec<usize> = signs.iter().enumerate().map(|(t, &s)| 2 * t + usize::from(s > 0.0)).collect();
    let flip = rng.random_range(0..l);
    let mut rejected = response.clone();
    rejected[flip] ^= 1;
    let mut negatives = Vec::new();
    let mut labels = Vec::new();
    for k in 0..l {
        for _ in 0..per_factor {
            let mut x = positive.clone();
            x[k] = -x[k];
            for v in x.iter_mut() {
                *v += cfg.context_noise * gauss(rng);
            }
            negatives.push(x);
            labels.push(k);
        }
    }
    RawInstance {
        positive,
        response,
        rejected,
        negatives,
        labels,
    }
}

fn ctx<T: Scalar>(features: &[f64], response: &[usize]) -> ToyContext<T> {
    ToyContext {
        features: features.iter().map(|&v| T::lit(v)).collect(),
        response: response.to_vec(),
    }
}

/// Indices of the negatives each training instance uses.
fn select_negatives(cfg: &ToyTrainConfig, raws: &[RawInstance], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let pool = cfg.num_factors * cfg.candidates_per_factor;
    let k = cfg.num_negatives.min(pool);
    if cfg.sampler == Sampler::Random {
        return Ok(raws.iter().map(|_| sample(rng, pool, k).into_vec()).collect());
    }
    let diffs_of = |r: &RawInstance| -> Vec<DifferenceVector<f64>> {
        r.negatives
            .iter()
            .enumerate()
            .map(|(i, n)| DifferenceVector::new(i.to_string(), r.positive.iter().zip(n).map(|(p, q)| p - q).collect()))
            .collect()
    };
    let all: Vec<DifferenceVector<f64>> = raws.iter().flat_map(diffs_of).collect();
    let mut sae_cfg = SaeConfig::<f64>::new(cfg.feature_dim());
    sae_cfg.hidden_dim = cfg.sae_hidden;
    sae_cfg.learning_rate = 1e-2;
    sae_cfg.batch_size = 32;
    sae_cfg.epochs = cfg.sae_epochs;
    sae_cfg.seed = rng.random();
    let model = sae::train(sae_cfg, &all)?.model;
    let sel = SelectionConfig {
        k,
        diversity_weight: if cfg.sampler == Sampler::TopScore { 0.0 } else { cfg.diversity_weight },
    };
    raws.iter()
        .map(|r| {
            let (scores, codes) = score_and_encode(&model, &diffs_of(r))?;
            Ok(greedy_select(&scores, &codes, &sel)?.into_iter().map(|p| p.index).collect())
        })
        .collect()
}

/// Generates the planted task for `cfg` deterministically from its seed.
pub fn build_task<T: Scalar>(cfg: &ToyTrainConfig) -> Result<ToyTask<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = cfg.feature_dim();
    let initial = ToyPolicy {
        weights: Array2::from_shape_simple_fn((cfg.vocab, f), || T::lit(cfg.init_scale * gauss(&mut rng))),
    };
    let raws: Vec<RawInstance> = (0..cfg.train_instances)
        .map(|_| raw_instance(cfg, &mut rng, cfg.candidates_per_factor))
        .collect();
    let heldout_raw: Vec<RawInstance> = (0..cfg.heldout_instances).map(|_| raw_instance(cfg, &mut rng, 1)).collect();
    let chosen = select_negatives(cfg, &raws, &mut rng)?;

    let mut train = Vec::with_capacity(raws.len());
    let mut cover = 0.0;
    for (r, idx) in raws.iter().zip(&chosen) {
        cover += coverage(&r.labels, idx) as f64;
        let positive = ctx::<T>(&r.positive, &r.response);
        let negatives: Vec<ToyContext<T>> = idx.iter().map(|&i| ctx(&r.negatives[i], &r.response)).collect();
        let chosen_text = ctx::<T>(&r.positive, &r.response);
        let rejected_text = ctx::<T>(&r.positive, &r.rejected);
        train.push(PolicyInstance {
            ref_pos_logprob: toy_logprob(&initial, &positive)?,
            ref_neg_logprobs: negatives.iter().map(|c| toy_logprob(&initial, c)).collect::<Result<_>>()?,
            text: Some(TextPair {
                ref_chosen: toy_logprob(&initial, &chosen_text)?,
                ref_rejected: toy_logprob(&initial, &rejected_text)?,
                chosen: chosen_text,
                rejected: rejected_text,
            }),
            positive,
            negatives,
        });
    }
    let heldout = heldout_raw
        .iter()
        .map(|r| {
            let pos = ctx(&r.positive, &r.response);
            let negs = r.negatives.iter().map(|n| ctx(n, &r.response)).collect();
            (pos, negs)
        })
        .collect();
    Ok(ToyTask {
        initial,
        train,
        heldout,
        coverage: cover / raws.len() as f64,
    })
}

/// Mean over held-out instances of `log π(y|pos) − max_k log π(y|neg_k)`.
pub fn heldout_margin<T: Scalar>(
    policy: &ToyPolicy<T>,
    heldout: &[(ToyContext<T>, Vec<ToyContext<T>>)],
) -> Result<f64> {
    let mut acc = 0.0;
    for (pos, negs) in heldout {
        let lp = toy_logprob(policy, pos)?.as_f64();
        let worst = negs
            .iter()
            .map(|n| toy_logprob(policy, n).map(|v| v.as_f64()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        acc += lp - worst;
    }
    Ok(acc / heldout.len() as f64)
}

fn mean_loss<T: Scalar>(
    policy: &ToyPolicy<T>,
    train: &[PolicyInstance<ToyContext<T>, T>],
    dpo: &DpoConfig<T>,
) -> Result<f64> {
    let mut acc = 0.0;
    for inst in train {
        acc += total_loss(&inst.preference_instance(policy)?, dpo)?.as_f64();
    }
    Ok(acc / train.len() as f64)
}

/// Full-batch gradient descent on the mean combined loss of the task's
/// training instances, with the exact multi-negative gradient. Records
/// step 0 (the initial policy) and every step after.
pub fn run_toy_training<T: Scalar>(cfg: &ToyTrainConfig) -> Result<ToyTrace<T>> {
    let task = build_task::<T>(cfg)?;
    let dpo = DpoConfig {
        beta: T::lit(cfg.dpo.beta),
        lambda: T::lit(cfg.dpo.lambda),
    };
    let lr = T::lit(cfg.learning_rate);
    let scale = T::one() / T::from_usize_lossy(task.train.len());
    let mut policy = task.initial.clone();
    let mut records = Vec::with_capacity(cfg.steps + 1);
    let mut record = |step: usize, policy: &ToyPolicy<T>| -> Result<()> {
        let loss = mean_loss(policy, &task.train, &dpo)?;
        if !loss.is_finite() {
            return Err(MispError::Diverged { stage: "step", index: step });
        }
        records.push(TraceRecord {
            step,
            loss,
            margin: heldout_margin(policy, &task.heldout)?,
            coverage: task.coverage,
        });
        Ok(())
    };
    record(0, &policy)?;
    for step in 1..=cfg.steps {
        let mut grad = vec![T::zero(); policy.weights.len()];
        for inst in &task.train {
            for (g, v) in grad.iter_mut().zip(total_loss_gradient(&policy, inst, &dpo)?) {
                *g += v * scale;
            }
        }
        for (w, g) in policy.weights.iter_mut().zip(&grad) {
            *w -= lr * *g;
        }
        record(step, &policy)?;
    }
    Ok(ToyTrace { records, policy })
}

/// One JSON object per line: `{"step":..,"loss":..,"margin":..,"coverage":..}`.
pub fn write_trace<W: Write>(mut w: W, records: &[TraceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
