mod cli;
mod commands;
mod config;
mod error;
mod record;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use commands::*;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::EXIT_CONFIG } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fuse(a) => fuse::run(a),
        Command::TrainSae(a) => train_sae::run(a),
        Command::Select(a) => select::run(a),
        Command::TrainToy(a) => train_toy::run(a),
        Command::GradCheck(a) => gradcheck::run(a),
        Command::ExportViz(a) => viz::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
