use misp_core::embed::io::EmbeddingTable;
use misp_core::embed::{fuse_slices, RandomSignProjection};
use serde_json::json;

use super::load_table;
use crate::cli::FuseArgs;
use crate::config::{plain_seed, FileConfig};
use crate::error::{CliError, CliResult};
use crate::record::RunClock;

fn summarize(ids: &[&str]) -> String {
    let shown: Vec<&str> = ids.iter().take(5).copied().collect();
    let more = if ids.len() > 5 { format!(" (+{} more)", ids.len() - 5) } else { String::new() };
    format!("{}{more}", shown.join(", "))
}

pub fn run(args: FuseArgs) -> CliResult<()> {
    let clock = RunClock::start();
    let file = FileConfig::load(args.config.as_deref())?;
    let image_path = file.path(args.image, "image")?;
    let text_path = file.path(args.text, "text")?;
    let output = file.path(args.output, "output")?;
    let max_dim = match args.max_dim {
        Some(m) => Some(m),
        None => file.section("fuse").get("max_dim").map(|v| {
            v.as_u64()
                .map(|m| m as usize)
                .ok_or_else(|| CliError::Config("fuse.max_dim must be an unsigned integer".into()))
        }).transpose()?,
    };
    let seed = plain_seed(args.seed, &file)?;

    let image = load_table(&image_path)?;
    let text = load_table(&text_path)?;
    let unmatched_image: Vec<&str> =
        image.ids().iter().filter(|id| text.index_of(id).is_none()).map(String::as_str).collect();
    let unmatched_text: Vec<&str> =
        text.ids().iter().filter(|id| image.index_of(id).is_none()).map(String::as_str).collect();
    if !unmatched_image.is_empty() || !unmatched_text.is_empty() {
        let mut msg = String::from("id mismatch between image and text embeddings:");
        if !unmatched_image.is_empty() {
            msg += &format!(" {} image-only [{}];", unmatched_image.len(), summarize(&unmatched_image));
        }
        if !unmatched_text.is_empty() {
            msg += &format!(" {} text-only [{}];", unmatched_text.len(), summarize(&unmatched_text));
        }
        return Err(CliError::Data(msg.trim_end_matches(';').to_string()));
    }
    if image.is_empty() {
        return Err(CliError::Data("no rows to fuse".into()));
    }

    let fused_dim = image.dim() * text.dim();
    let projection = match max_dim {
        Some(cap) => RandomSignProjection::for_cap(fused_dim, cap, cap, seed)?,
        None => None,
    };
    let mut out = EmbeddingTable::new(projection.as_ref().map_or(fused_dim, |p| p.target_dim()));
    for (id, row) in image.rows() {
        let t = text.row(text.index_of(id).expect("checked above"));
        let fused = fuse_slices(row, t)?.into_values();
        let fused = match &projection {
            Some(p) => p.apply(&fused)?,
            None => fused,
        };
        out.push(id, &fused)?;
    }
    out.write_binary(&output)?;
    println!("fused {} rows of width {} into {}", out.len(), out.dim(), output.display());
    clock.finish(
        "fuse",
        json!({ "max_dim": max_dim, "seed": seed }),
        &[&image_path, &text_path],
        &[&output],
    )
}
