use std::fs;

use misp_core::embed::io::EmbeddingTable;
use misp_core::toy::{make_planted_pool, make_sparse_dataset, PlantedFactorSpec, SparseDatasetSpec};
use serde_json::json;

use super::{write_table, write_text};
use crate::cli::{SynthArgs, SynthKind};
use crate::config::{plain_seed, FileConfig};
use crate::error::{CliError, CliResult};
use crate::record::RunClock;

/// Per-prompt pool seeds: distinct and stable for a given base seed.
fn pool_seeds(base: u64, count: usize) -> impl Iterator<Item = u64> {
    (0..count as u64).map(move |i| base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i))
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let clock = RunClock::start();
    match args.kind {
        SynthKind::Sparse { output, rows, dim, num_atoms, active_atoms, seed } => {
            let spec = SparseDatasetSpec {
                rows,
                dim,
                num_atoms,
                active_atoms,
                seed: plain_seed(seed, &FileConfig::default())?,
                ..Default::default()
            };
            let data = make_sparse_dataset::<f64>(&spec)?;
            let table = EmbeddingTable::from_rows(
                data.iter().map(|d| d.candidate_id.clone()).collect(),
                data.into_iter().map(|d| d.values).collect(),
            )?;
            write_table(&table, &output)?;
            println!("wrote {rows} rows of width {dim} to {}", output.display());
            clock.finish("synth sparse", &spec, &[], &[&output])
        }
        SynthKind::Planted { output_dir, prompts, num_factors, samples_per_factor, factor_noise, dim, seed } => {
            let seed = plain_seed(seed, &FileConfig::default())?;
            fs::create_dir_all(&output_dir).map_err(CliError::io(&output_dir))?;
            let mut positives = EmbeddingTable::new(dim);
            let mut candidates = EmbeddingTable::new(dim);
            let mut diffs = EmbeddingTable::new(dim);
            let mut labels = String::new();
            for (p, pool_seed) in pool_seeds(seed, prompts).enumerate() {
                let spec = PlantedFactorSpec { num_factors, samples_per_factor, factor_noise, dim, seed: pool_seed };
                let pool = make_planted_pool::<f64>(&spec)?;
                // The positive is an arbitrary point; candidates sit so that
                // positive − candidate is exactly the planted vector.
                let positive: Vec<f64> = (0..dim).map(|j| ((j + p) % 3) as f64 - 1.0).collect();
                let pid = format!("p{p}");
                positives.push(&pid, &positive)?;
                for (i, (v, &k)) in pool.vectors.iter().zip(&pool.labels).enumerate() {
                    let cid = format!("{pid}:f{k}s{}", i % samples_per_factor);
                    let cand: Vec<f64> = positive.iter().zip(v).map(|(a, b)| a - b).collect();
                    candidates.push(&cid, &cand)?;
                    diffs.push(&cid, v)?;
                    labels += &format!("{}\n", json!({ "id": cid, "factor": k }));
                }
            }
            let pos_path = output_dir.join("positives.jsonl");
            let cand_path = output_dir.join("candidates.jsonl");
            let diff_path = output_dir.join("diffs.jsonl");
            let label_path = output_dir.join("labels.jsonl");
            positives.write_jsonl(&pos_path)?;
            candidates.write_jsonl(&cand_path)?;
            diffs.write_jsonl(&diff_path)?;
            write_text(&label_path, &labels)?;
            println!("wrote {prompts} planted pools to {}", output_dir.display());
            clock.finish(
                "synth planted",
                json!({
                    "prompts": prompts, "num_factors": num_factors, "samples_per_factor": samples_per_factor,
                    "factor_noise": factor_noise, "dim": dim, "seed": seed,
                }),
                &[],
                &[&cand_path, &pos_path, &diff_path, &label_path],
            )
        }
    }
}
