use misp_core::embed::DifferenceVector;
use misp_core::negselect::{greedy_select, score_and_encode, SelectionConfig, SelectionManifest};
use misp_core::sae::SaeModel;
use misp_core::MispError;
use serde_json::json;

use super::{load_table, pool_for, write_text};
use crate::cli::{DiversitySpace, SelectArgs};
use crate::config::{resolve, FileConfig};
use crate::error::{CliError, CliResult};
use crate::record::RunClock;

pub fn run(args: SelectArgs) -> CliResult<()> {
    let clock = RunClock::start();
    let file = FileConfig::load(args.config.as_deref())?;
    let positives_path = file.path(args.positives, "positives")?;
    let candidates_path = file.path(args.candidates, "candidates")?;
    let checkpoint = file.path(args.checkpoint, "checkpoint")?;
    let output = file.path(args.output, "output")?;
    let selection: SelectionConfig<f64> =
        resolve(&file, "selection", &SelectionConfig::default(), &args.selection, false)?;
    selection.validate()?;

    let positives = load_table(&positives_path)?;
    let candidates = load_table(&candidates_path)?;
    if !checkpoint.exists() {
        return Err(CliError::Data(format!("input not found: {}", checkpoint.display())));
    }
    let model = SaeModel::<f64>::load(&checkpoint)?;
    if positives.is_empty() {
        return Err(MispError::Empty("no positives".into()).into());
    }
    for (name, dim) in [("positives", positives.dim()), ("candidates", candidates.dim())] {
        if dim != model.input_dim() {
            return Err(MispError::Dimension(format!(
                "{name} have width {dim} but the checkpoint expects {}",
                model.input_dim()
            ))
            .into());
        }
    }

    let mut out = String::new();
    for (pid, prow) in positives.rows() {
        let pool = pool_for(&candidates, pid);
        if pool.is_empty() {
            return Err(MispError::Empty(format!("positive {pid} has an empty candidate pool")).into());
        }
        let diffs: Vec<DifferenceVector<f64>> = pool
            .iter()
            .map(|&j| {
                let values = prow.iter().zip(candidates.row(j)).map(|(p, c)| p - c).collect();
                DifferenceVector::new(candidates.ids()[j].clone(), values)
            })
            .collect();
        let (scores, codes) = score_and_encode(&model, &diffs)?;
        let codes = match args.diversity_space {
            DiversitySpace::Code => codes,
            DiversitySpace::Difference => diffs.iter().map(|d| d.values.clone()).collect(),
        };
        let picks = greedy_select(&scores, &codes, &selection)?;
        let manifest = SelectionManifest::new(pid, pid, selection, &picks);
        out += &serde_json::to_string(&manifest).map_err(MispError::from)?;
        out.push('\n');
    }
    write_text(&output, &out)?;
    println!("wrote {} manifests to {}", positives.len(), output.display());
    clock.finish(
        "select",
        json!({ "selection": selection, "diversity_space": args.diversity_space }),
        &[&positives_path, &candidates_path, &checkpoint],
        &[&output],
    )
}
