use std::path::PathBuf;

use misp_core::embed::DifferenceVector;
use misp_core::sae::{train, SaeConfig};
use serde_json::json;

use super::{load_table, write_text};
use crate::cli::TrainSaeArgs;
use crate::config::{resolve, FileConfig};
use crate::error::CliResult;
use crate::record::RunClock;

pub fn run(args: TrainSaeArgs) -> CliResult<()> {
    let clock = RunClock::start();
    let file = FileConfig::load(args.config.as_deref())?;
    let diffs_path = file.path(args.diffs, "diffs")?;
    let checkpoint = file.path(args.checkpoint, "checkpoint")?;
    let history_path = match args.history {
        Some(p) => p,
        None => {
            let mut s = checkpoint.as_os_str().to_owned();
            s.push(".history.json");
            PathBuf::from(s)
        }
    };

    let table = load_table(&diffs_path)?;
    let mut config: SaeConfig<f64> = resolve(&file, "sae", &SaeConfig::new(table.dim()), &args.sae, true)?;
    config.input_dim = table.dim();
    let data: Vec<DifferenceVector<f64>> =
        table.rows().map(|(id, row)| DifferenceVector::new(id, row.to_vec())).collect();

    let outcome = train(config.clone(), &data)?;
    outcome.model.save(&checkpoint)?;
    let final_loss = outcome.history.last().copied().unwrap_or(outcome.initial_loss);
    let history = json!({
        "initial_loss": outcome.initial_loss,
        "epoch_losses": outcome.history,
        "final_loss": final_loss,
    });
    write_text(&history_path, &format!("{history}\n"))?;
    println!(
        "trained {} epochs on {} rows: loss {:.6} -> {:.6}",
        config.epochs,
        data.len(),
        outcome.initial_loss,
        final_loss
    );
    clock.finish("train-sae", &config, &[&diffs_path], &[&checkpoint, &history_path])
}
