pub mod fuse;
pub mod gradcheck;
pub mod select;
pub mod synth;
pub mod train_sae;
pub mod train_toy;
pub mod viz;

use std::fs;
use std::path::Path;

use misp_core::embed::io::EmbeddingTable;

use crate::error::{CliError, CliResult};

pub(crate) fn load_table(path: &Path) -> CliResult<EmbeddingTable> {
    if !path.exists() {
        return Err(CliError::Data(format!("input not found: {}", path.display())));
    }
    Ok(EmbeddingTable::load(path)?)
}

/// Candidate rows belonging to `positive_id`. When any candidate id has the
/// form `<positive>:<name>`, pools are grouped by that prefix; otherwise the
/// whole table is one shared pool.
pub(crate) fn pool_for(candidates: &EmbeddingTable, positive_id: &str) -> Vec<usize> {
    let grouped = candidates.ids().iter().any(|id| id.contains(':'));
    let prefix = format!("{positive_id}:");
    (0..candidates.len())
        .filter(|&i| !grouped || candidates.ids()[i].starts_with(&prefix))
        .collect()
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(CliError::io(path))
}

/// JSONL unless the path ends in `.bin`.
pub(crate) fn write_table(table: &EmbeddingTable, path: &Path) -> CliResult<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        table.write_binary(path)?;
    } else {
        table.write_jsonl(path)?;
    }
    Ok(())
}
