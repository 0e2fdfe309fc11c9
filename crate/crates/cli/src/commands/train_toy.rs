use std::fs::File;
use std::io::BufWriter;

use misp_core::pl_dpo::DpoConfig;
use misp_core::toy::{run_toy_training, write_trace, ToyTrainConfig};

use crate::cli::TrainToyArgs;
use crate::config::{resolve, FileConfig};
use crate::error::{CliError, CliResult};
use crate::record::RunClock;

pub fn run(args: TrainToyArgs) -> CliResult<()> {
    let clock = RunClock::start();
    let file = FileConfig::load(args.config.as_deref())?;
    let trace_path = file.path(args.trace, "trace")?;
    // A top-level [dpo] section seeds the toy defaults; [toy.dpo] and flags win.
    let defaults = ToyTrainConfig {
        dpo: resolve(&file, "dpo", &DpoConfig::default(), &args.toy.dpo, false)?,
        ..Default::default()
    };
    let config: ToyTrainConfig = resolve(&file, "toy", &defaults, &args.toy, true)?;

    let trace = run_toy_training::<f64>(&config)?;
    let out = File::create(&trace_path).map_err(CliError::io(&trace_path))?;
    write_trace(BufWriter::new(out), &trace.records)?;
    let last = trace.records.last().expect("step 0 is always recorded");
    println!(
        "step {}: loss {:.6}, held-out margin {:.6}, coverage {:.3}",
        last.step, last.loss, last.margin, last.coverage
    );
    clock.finish("train-toy", &config, &[], &[&trace_path])
}
