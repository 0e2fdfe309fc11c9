use misp_core::gradcheck::{logratio_max_error, pl_dpo_max_error, sae_max_error, toy_max_error};

use crate::cli::{GradCheckArgs, Scope};
use crate::config::{plain_seed, FileConfig};
use crate::error::{CliError, CliResult};

pub const THRESHOLD: f64 = 1e-5;

pub fn run(args: GradCheckArgs) -> CliResult<()> {
    let seed = plain_seed(args.seed, &FileConfig::default())?;
    let (name, err) = match args.scope {
        Scope::Sae => ("sae", sae_max_error(seed)?),
        Scope::PlDpo => ("pl_dpo", pl_dpo_max_error(seed)?.max(logratio_max_error(seed)?)),
        Scope::Toy => ("toy", toy_max_error(seed)?),
    };
    let ok = err < THRESHOLD;
    println!(
        "{name}: max relative error {err:.3e} (threshold {THRESHOLD:.0e}) {}",
        if ok { "ok" } else { "FAILED" }
    );
    if ok {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("{name} gradient check failed: {err:.3e} >= {THRESHOLD:.0e}")))
    }
}
