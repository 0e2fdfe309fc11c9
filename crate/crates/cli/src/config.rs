//! Layered configuration: built-in defaults, then the TOML file, then flags.
//!
//! The file mirrors the library types:
//!
//! ```toml
//! seed = 7
//! [paths]
//! diffs = "diffs.jsonl"
//! [sae]
//! hidden_dim = 128
//! [selection]
//! k = 3
//! [dpo]
//! beta = 0.5
//! [toy]
//! steps = 500
//! ```
//!
//! Seeds resolve as: `MISP_SEED`, then the file's top-level `seed`, then the
//! section's own `seed`, then `--seed`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "MISP_SEED";

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    root: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let root: Map<String, Value> =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(FileConfig { root })
    }

    pub fn section(&self, name: &str) -> Value {
        self.root.get(name).cloned().unwrap_or(Value::Object(Map::new()))
    }

    fn seed(&self) -> Option<Value> {
        self.root.get("seed").cloned()
    }

    /// `[paths] <name>` when the flag was omitted.
    pub fn path(&self, flag: Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
        if let Some(p) = flag {
            return Ok(p);
        }
        match self.root.get("paths").and_then(|p| p.get(name)) {
            Some(Value::String(s)) => Ok(PathBuf::from(s)),
            Some(_) => Err(CliError::Config(format!("paths.{name} must be a string"))),
            None => Err(CliError::Config(format!(
                "missing --{} (or paths.{name} in the config file)",
                name.replace('_', "-")
            ))),
        }
    }
}

fn env_seed() -> CliResult<Option<Value>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(|v| Some(Value::from(v)))
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Seed for commands without a typed config section: `--seed`, then the
/// file's `seed`, then `MISP_SEED`, then 0.
pub fn plain_seed(flag: Option<u64>, file: &FileConfig) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(v) = file.seed() {
        return v
            .as_u64()
            .ok_or_else(|| CliError::Config("seed must be an unsigned integer".into()));
    }
    Ok(env_seed()?.and_then(|v| v.as_u64()).unwrap_or(0))
}

/// Recursive object merge; non-object values in `patch` replace `base`.
pub fn overlay(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Resolves one typed section: `defaults` < env seed < file seed < file
/// section < `flags` (a struct whose unset options serialize to nothing).
pub fn resolve<T, F>(file: &FileConfig, section: &str, defaults: &T, flags: &F, seeded: bool) -> CliResult<T>
where
    T: Serialize + DeserializeOwned,
    F: Serialize,
{
    let mut value = serde_json::to_value(defaults).map_err(|e| CliError::Config(e.to_string()))?;
    if seeded {
        for seed in [env_seed()?, file.seed()].into_iter().flatten() {
            overlay(&mut value, serde_json::json!({ "seed": seed }));
        }
    }
    overlay(&mut value, file.section(section));
    overlay(&mut value, serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?);
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("[{section}]: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Demo {
        seed: u64,
        k: usize,
        nested: Inner,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Inner {
        beta: f64,
    }

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = FileConfig {
            root: toml::from_str("seed = 4\n[demo]\nk = 9\n[demo.nested]\nbeta = 2.0\n").unwrap(),
        };
        let defaults = Demo { seed: 0, k: 1, nested: Inner { beta: 0.5 } };
        let got: Demo = resolve(&file, "demo", &defaults, &Flags { k: None }, true).unwrap();
        assert_eq!(got, Demo { seed: 4, k: 9, nested: Inner { beta: 2.0 } });
        let got: Demo = resolve(&file, "demo", &defaults, &Flags { k: Some(3) }, true).unwrap();
        assert_eq!(got.k, 3);
    }

    #[test]
    fn unknown_types_are_config_errors() {
        let file = FileConfig {
            root: toml::from_str("[demo]\nk = \"three\"\n").unwrap(),
        };
        let defaults = Demo { seed: 0, k: 1, nested: Inner { beta: 0.5 } };
        let err = resolve(&file, "demo", &defaults, &Flags { k: None }, false).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn paths_fall_back_to_file() {
        let file = FileConfig {
            root: toml::from_str("[paths]\ndiffs = \"d.jsonl\"\n").unwrap(),
        };
        assert_eq!(file.path(None, "diffs").unwrap(), PathBuf::from("d.jsonl"));
        assert_eq!(file.path(Some("x".into()), "diffs").unwrap(), PathBuf::from("x"));
        assert!(matches!(file.path(None, "checkpoint"), Err(CliError::Config(_))));
    }
}
