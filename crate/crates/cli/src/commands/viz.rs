use std::fs;

use misp_core::embed::project_2d;
use misp_core::negselect::SelectionManifest;
use misp_core::MispError;
use serde_json::json;

use super::{load_table, pool_for};
use crate::cli::ExportVizArgs;
use crate::config::FileConfig;
use crate::error::{CliError, CliResult};
use crate::record::RunClock;

pub fn run(args: ExportVizArgs) -> CliResult<()> {
    let clock = RunClock::start();
    let file = FileConfig::load(args.config.as_deref())?;
    let manifest_path = file.path(args.manifest, "manifest")?;
    let candidates_path = file.path(args.candidates, "candidates")?;
    let output = file.path(args.output, "output")?;

    if !manifest_path.exists() {
        return Err(CliError::Data(format!("input not found: {}", manifest_path.display())));
    }
    let text = fs::read_to_string(&manifest_path).map_err(CliError::io(&manifest_path))?;
    let mut manifests = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let m: SelectionManifest<f64> = serde_json::from_str(line)
            .map_err(|e| MispError::Format(format!("manifest line {}: {e}", i + 1)))?;
        manifests.push(m);
    }
    let manifest = match &args.positive_id {
        Some(id) => manifests
            .into_iter()
            .find(|m| &m.positive_id == id)
            .ok_or_else(|| CliError::Data(format!("no manifest for positive {id}")))?,
        None => manifests
            .into_iter()
            .next()
            .ok_or_else(|| MispError::Empty("manifest file has no entries".into()))?,
    };

    let candidates = load_table(&candidates_path)?;
    let pool = pool_for(&candidates, &manifest.positive_id);
    let selected = manifest.selected_ids();
    if let Some(missing) = selected.iter().find(|id| !pool.iter().any(|&j| candidates.ids()[j] == **id)) {
        return Err(CliError::Data(format!("selected id {missing} is not in the candidate pool")));
    }
    let vectors: Vec<Vec<f64>> = pool.iter().map(|&j| candidates.row(j).to_vec()).collect();
    let proj = project_2d(&vectors)?;

    let mut w = csv::Writer::from_path(&output).map_err(|e| CliError::Data(e.to_string()))?;
    let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", output.display()));
    w.write_record(["id", "x", "y", "label"]).map_err(csv_err)?;
    for (&j, p) in pool.iter().zip(&proj.points) {
        let id = &candidates.ids()[j];
        let label = if selected.contains(&id.as_str()) { "selected" } else { "unselected" };
        w.write_record([id.as_str(), &p[0].to_string(), &p[1].to_string(), label])
            .map_err(csv_err)?;
    }
    w.flush().map_err(CliError::io(&output))?;
    println!("wrote {} points ({} selected) to {}", pool.len(), selected.len(), output.display());
    clock.finish(
        "export-viz",
        json!({ "positive_id": manifest.positive_id }),
        &[&manifest_path, &candidates_path],
        &[&output],
    )
}
