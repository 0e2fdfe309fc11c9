use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use misp_core::embed::io::{EmbeddingTable, HEADER_LEN};
use misp_core::negselect::SelectionManifest;
use misp_core::sae::{SaeConfig, SaeModel};
use misp_core::toy::TraceRecord;
use serde_json::Value;

fn misp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_misp"))
        .current_dir(dir)
        .env_remove("MISP_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn manifests(path: &Path) -> Vec<SelectionManifest<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write_rows(path: &Path, rows: &[(String, Vec<f64>)]) {
    let (ids, vecs) = rows.iter().cloned().unzip();
    EmbeddingTable::from_rows(ids, vecs).unwrap().write_jsonl(path).unwrap();
}

/// Planted pools plus a small SAE checkpoint trained on their differences.
fn planted_setup(dir: &Path, prompts: &str) {
    ok(misp(dir, &["synth", "planted", "--output-dir", "pl", "--prompts", prompts, "--seed", "11"]));
    ok(misp(
        dir,
        &["train-sae", "--diffs", "pl/diffs.jsonl", "--checkpoint", "sae.json", "--hidden-dim", "16", "--epochs", "30", "--learning-rate", "0.01"],
    ));
}

#[test]
fn fuse_single_matching_row() {
    let dir = tempfile::tempdir().unwrap();
    write_rows(&dir.path().join("i.jsonl"), &[("x".into(), vec![1.0, 2.0])]);
    write_rows(&dir.path().join("t.jsonl"), &[("x".into(), vec![3.0, 4.0, 5.0])]);
    ok(misp(dir.path(), &["fuse", "--image", "i.jsonl", "--text", "t.jsonl", "--output", "f.bin"]));
    let table = EmbeddingTable::load(&dir.path().join("f.bin")).unwrap();
    assert_eq!(table.ids(), ["x"]);
    assert_eq!(table.row(0), [3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    let record: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("f.bin.run.json")).unwrap()).unwrap();
    assert_eq!(record["command"], "fuse");
    assert_eq!(record["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(record["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn fuse_hundred_pairs_has_expected_byte_length() {
    let dir = tempfile::tempdir().unwrap();
    let (dv, dt) = (4, 3);
    let img: Vec<_> = (0..100).map(|i| (format!("r{i}"), (0..dv).map(|j| (i * j) as f64 / 50.0).collect())).collect();
    // Reverse order: pairing is by id, not position.
    let txt: Vec<_> = (0..100).rev().map(|i| (format!("r{i}"), (0..dt).map(|j| (i + j) as f64).collect())).collect();
    write_rows(&dir.path().join("i.jsonl"), &img);
    write_rows(&dir.path().join("t.jsonl"), &txt);
    ok(misp(dir.path(), &["fuse", "--image", "i.jsonl", "--text", "t.jsonl", "--output", "f.bin"]));
    let bytes = fs::read(dir.path().join("f.bin")).unwrap();
    assert_eq!(bytes.len(), HEADER_LEN + 100 * dv * dt * 4);
    let table = EmbeddingTable::load(&dir.path().join("f.bin")).unwrap();
    assert_eq!(table.len(), 100);
    // Stored as f32.
    assert_eq!(table.row(7)[dt + 1], f64::from((7.0f64 / 50.0 * 8.0) as f32));
}

#[test]
fn fuse_disjoint_ids_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    write_rows(&dir.path().join("i.jsonl"), &[("a".into(), vec![1.0])]);
    write_rows(&dir.path().join("t.jsonl"), &[("b".into(), vec![1.0])]);
    let o = misp(dir.path(), &["fuse", "--image", "i.jsonl", "--text", "t.jsonl", "--output", "f.bin"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("image-only [a]"));
    assert!(!dir.path().join("f.bin").exists());
}

#[test]
fn fuse_dimension_cap_projects() {
    let dir = tempfile::tempdir().unwrap();
    write_rows(&dir.path().join("i.jsonl"), &[("a".into(), vec![1.0; 8])]);
    write_rows(&dir.path().join("t.jsonl"), &[("a".into(), vec![0.5; 8])]);
    ok(misp(dir.path(), &["fuse", "--image", "i.jsonl", "--text", "t.jsonl", "--output", "f.bin", "--max-dim", "16"]));
    assert_eq!(EmbeddingTable::load(&dir.path().join("f.bin")).unwrap().dim(), 16);
}

#[test]
fn train_sae_zero_epochs_is_seeded_init() {
    let dir = tempfile::tempdir().unwrap();
    ok(misp(dir.path(), &["synth", "sparse", "--output", "d.jsonl", "--rows", "40", "--dim", "8", "--num-atoms", "4"]));
    ok(misp(dir.path(), &["train-sae", "--diffs", "d.jsonl", "--checkpoint", "c.json", "--epochs", "0", "--seed", "9"]));
    let loaded = SaeModel::<f64>::load(&dir.path().join("c.json")).unwrap();
    let mut cfg = SaeConfig::new(8);
    cfg.epochs = 0;
    cfg.seed = 9;
    assert_eq!(loaded, SaeModel::init(cfg).unwrap());
}

#[test]
fn train_sae_default_config_reduces_loss() {
    let dir = tempfile::tempdir().unwrap();
    ok(misp(dir.path(), &["synth", "sparse", "--output", "d.bin"]));
    ok(misp(dir.path(), &["train-sae", "--diffs", "d.bin", "--checkpoint", "c.json"]));
    let h: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c.json.history.json")).unwrap()).unwrap();
    assert_eq!(h["epoch_losses"].as_array().unwrap().len(), 50);
    assert!(h["final_loss"].as_f64().unwrap() < h["initial_loss"].as_f64().unwrap());
    assert_eq!(SaeModel::<f64>::load(&dir.path().join("c.json")).unwrap().hidden_dim(), 128);
}

#[test]
fn train_sae_divergence_reports_epoch() {
    let dir = tempfile::tempdir().unwrap();
    ok(misp(dir.path(), &["synth", "sparse", "--output", "d.jsonl", "--rows", "40", "--dim", "8", "--num-atoms", "4"]));
    let o = misp(
        dir.path(),
        &["train-sae", "--diffs", "d.jsonl", "--checkpoint", "c.json", "--optimizer", "sgd", "--learning-rate", "1e6", "--sparsity-weight", "0"],
    );
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("epoch"));
}

#[test]
fn select_with_k_above_pool_returns_whole_pool() {
    let dir = tempfile::tempdir().unwrap();
    planted_setup(dir.path(), "2");
    ok(misp(
        dir.path(),
        &["select", "--positives", "pl/positives.jsonl", "--candidates", "pl/candidates.jsonl", "--checkpoint", "sae.json", "--output", "s.jsonl", "--k", "50"],
    ));
    let ms = manifests(&dir.path().join("s.jsonl"));
    assert_eq!(ms.len(), 2);
    for m in &ms {
        assert_eq!(m.selected.len(), 12);
        assert!(m.selected.iter().all(|e| e.id.starts_with(&format!("{}:", m.positive_id))));
    }
}

#[test]
fn select_without_diversity_is_top_k_by_score() {
    let dir = tempfile::tempdir().unwrap();
    planted_setup(dir.path(), "3");
    let args = |k: &str, out: &'static str| {
        vec![
            "select", "--positives", "pl/positives.jsonl", "--candidates", "pl/candidates.jsonl", "--checkpoint",
            "sae.json", "--output", out, "--diversity-weight", "0", "--k", k,
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    let run = |a: Vec<String>| ok(misp(dir.path(), &a.iter().map(String::as_str).collect::<Vec<_>>()));
    run(args("4", "top.jsonl"));
    run(args("12", "all.jsonl"));
    for (top, all) in manifests(&dir.path().join("top.jsonl")).iter().zip(manifests(&dir.path().join("all.jsonl"))) {
        let mut ranked = all.selected.clone();
        ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
        let want: Vec<&str> = ranked.iter().take(4).map(|e| e.id.as_str()).collect();
        assert_eq!(top.selected_ids(), want);
        assert!(top.selected.iter().all(|e| e.diversity_bonus == 0.0));
    }
}

#[test]
fn select_on_planted_pools_covers_factors() {
    let dir = tempfile::tempdir().unwrap();
    planted_setup(dir.path(), "100");
    ok(misp(
        dir.path(),
        &[
            "select", "--positives", "pl/positives.jsonl", "--candidates", "pl/candidates.jsonl", "--checkpoint",
            "sae.json", "--output", "s.jsonl", "--diversity-weight", "1", "--diversity-space", "difference",
        ],
    ));
    let covered = manifests(&dir.path().join("s.jsonl"))
        .iter()
        .filter(|m| {
            let mut factors: Vec<&str> = m.selected.iter().map(|e| e.id.split(':').nth(1).unwrap().split('s').next().unwrap()).collect();
            factors.sort_unstable();
            factors.dedup();
            factors.len() >= 3
        })
        .count();
    assert!(covered >= 95, "{covered}/100");
}

#[test]
fn select_rejects_checkpoint_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    planted_setup(dir.path(), "1");
    write_rows(&dir.path().join("p.jsonl"), &[("p0".into(), vec![0.0; 5])]);
    write_rows(&dir.path().join("c.jsonl"), &[("p0:x".into(), vec![1.0; 5])]);
    let o = misp(
        dir.path(),
        &["select", "--positives", "p.jsonl", "--candidates", "c.jsonl", "--checkpoint", "sae.json", "--output", "s.jsonl"],
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension"));
}

#[test]
fn select_rejects_empty_pool() {
    let dir = tempfile::tempdir().unwrap();
    planted_setup(dir.path(), "1");
    write_rows(&dir.path().join("p.jsonl"), &[("zz".into(), vec![0.0; 16])]);
    let o = misp(
        dir.path(),
        &["select", "--positives", "p.jsonl", "--candidates", "pl/candidates.jsonl", "--checkpoint", "sae.json", "--output", "s.jsonl"],
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty candidate pool"));
}

#[test]
fn export_viz_flags_selected_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(misp(dir.path(), &["synth", "planted", "--output-dir", "pl", "--samples-per-factor", "5", "--seed", "3"]));
    ok(misp(dir.path(), &["train-sae", "--diffs", "pl/diffs.jsonl", "--checkpoint", "sae.json", "--hidden-dim", "8", "--epochs", "5"]));
    ok(misp(
        dir.path(),
        &["select", "--positives", "pl/positives.jsonl", "--candidates", "pl/candidates.jsonl", "--checkpoint", "sae.json", "--output", "s.jsonl"],
    ));
    ok(misp(dir.path(), &["export-viz", "--manifest", "s.jsonl", "--candidates", "pl/candidates.jsonl", "--output", "v.csv"]));
    let mut reader = csv::Reader::from_path(dir.path().join("v.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["id", "x", "y", "label"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows.iter().filter(|r| &r[3] == "selected").count(), 3);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().is_ok() && r[2].parse::<f64>().is_ok()));
}

#[test]
fn train_toy_zero_steps_writes_initial_metrics_only() {
    let dir = tempfile::tempdir().unwrap();
    ok(misp(dir.path(), &["train-toy", "--trace", "t.jsonl", "--steps", "0"]));
    let text = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let rec: TraceRecord = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(rec.step, 0);
    assert!((rec.loss - (4f64.ln() + 2f64.ln())).abs() < 1e-12);
    let at = |k: &str| lines[0].find(&format!("\"{k}\":")).unwrap();
    assert!(at("step") < at("loss") && at("loss") < at("margin") && at("margin") < at("coverage"));
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "seed = 3\n[paths]\ntrace = \"t.jsonl\"\n[toy]\nsteps = 3\n").unwrap();
    ok(misp(dir.path(), &["train-toy", "--config", "run.toml"]));
    assert_eq!(fs::read_to_string(dir.path().join("t.jsonl")).unwrap().lines().count(), 4);
    ok(misp(dir.path(), &["train-toy", "--config", "run.toml", "--steps", "1"]));
    assert_eq!(fs::read_to_string(dir.path().join("t.jsonl")).unwrap().lines().count(), 2);
    let record: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.jsonl.run.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["seed"], 3);
    assert_eq!(record["config"]["steps"], 1);
}

#[test]
fn seed_env_is_default_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_misp"));
        cmd.current_dir(dir.path()).env_remove("MISP_SEED");
        if let Some(s) = env {
            cmd.env("MISP_SEED", s);
        }
        let o = cmd.args(["train-toy", "--steps", "0", "--trace", out]).args(extra).output().unwrap();
        assert!(o.status.success());
        fs::read(dir.path().join(out)).unwrap()
    };
    let env7 = run(Some("7"), &[], "a.jsonl");
    let flag7 = run(None, &["--seed", "7"], "b.jsonl");
    let env_then_flag = run(Some("1"), &["--seed", "7"], "c.jsonl");
    let default = run(None, &[], "d.jsonl");
    assert_eq!(env7, flag7);
    assert_eq!(env7, env_then_flag);
    assert_ne!(env7, default);
    let bad = Command::new(env!("CARGO_BIN_EXE_misp"))
        .current_dir(dir.path())
        .env("MISP_SEED", "seven")
        .args(["train-toy", "--steps", "0", "--trace", "e.jsonl"])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn grad_check_scopes() {
    let dir = tempfile::tempdir().unwrap();
    for scope in ["sae", "pl_dpo", "toy"] {
        let o = ok(misp(dir.path(), &["grad-check", scope, "--seed", "5"]));
        let line = String::from_utf8_lossy(&o.stdout).to_string();
        assert!(line.starts_with(scope) && line.contains("ok"), "{line}");
    }
    assert_eq!(code(&misp(dir.path(), &["grad-check", "everything"])), 2);
}

#[test]
fn missing_inputs_and_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&misp(dir.path(), &["train-sae", "--diffs", "nope.jsonl", "--checkpoint", "c.json"])), 3);
    assert_eq!(code(&misp(dir.path(), &["train-sae", "--checkpoint", "c.json"])), 2);
    fs::write(dir.path().join("bad.toml"), "[selection]\nk = 0\n").unwrap();
    planted_setup(dir.path(), "1");
    let o = misp(
        dir.path(),
        &["select", "--config", "bad.toml", "--positives", "pl/positives.jsonl", "--candidates", "pl/candidates.jsonl", "--checkpoint", "sae.json", "--output", "s.jsonl"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn help_documents_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(misp(dir.path(), &["--help"]));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("4 numeric divergence") && text.contains("MISP_SEED"));
}
