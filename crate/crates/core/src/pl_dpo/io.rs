use std::io::{BufRead, Write};

use super::PreferenceInstance;
use crate::error::{MispError, Result};
use crate::scalar::Scalar;

/// Reads one JSON object per non-blank line and validates it.
pub fn read_instances<R: BufRead, T>(reader: R) -> Result<Vec<PreferenceInstance<T>>>
where
    T: Scalar + serde::de::DeserializeOwned,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: PreferenceInstance<T> =
            serde_json::from_str(&line).map_err(|e| MispError::Format(format!("line {}: {e}", i + 1)))?;
        inst.validate()?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_instances<W: Write, T>(mut w: W, instances: &[PreferenceInstance<T>]) -> Result<()>
where
    T: Scalar + serde::Serialize,
{
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
