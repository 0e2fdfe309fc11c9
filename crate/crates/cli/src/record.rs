use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Audit record written next to a command's primary output as
/// `<output>.run.json`. The timestamp and duration are the only fields that
/// change between identical runs.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub tool_version: String,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub started_at_unix: u64,
    pub duration_ms: u128,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn record_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

pub struct RunClock {
    started: SystemTime,
    timer: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        RunClock {
            started: SystemTime::now(),
            timer: Instant::now(),
        }
    }

    /// Writes the record for a finished run beside `outputs[0]`.
    pub fn finish(
        self,
        command: &str,
        config: impl Serialize,
        inputs: &[&Path],
        outputs: &[&Path],
    ) -> CliResult<()> {
        let record = RunRecord {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
            inputs: inputs
                .iter()
                .map(|p| {
                    Ok(InputDigest {
                        path: p.display().to_string(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect::<CliResult<_>>()?,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            started_at_unix: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            duration_ms: self.timer.elapsed().as_millis(),
        };
        let Some(primary) = outputs.first() else {
            return Ok(());
        };
        let path = record_path(primary);
        let text = serde_json::to_string_pretty(&record).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(CliError::io(path))
    }
}
