//! End-to-end runs of the `jsr` binary on small synthetic and file corpora.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsr::cli::{Checkpoint, CURVES_HEADER};

const SMALL: &str = r#"
[data]
source = "synthetic"

[data.synthetic]
n_categories = 6
items_per_category = 5
n_users = 30
purchases_per_user = 5
vocab_size = 60
doc_len = 10

[corpus]
min_count = 1

[training]
max_steps = 12
eval_every = 4
ir_batch = 8
rs_batch = 8

[training.model]
embed_dim = 4
user_dim = 4
repr_dim = 4
tower_hidden = 8
match_hidden = 4
"#;

fn jsr(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jsr"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", "1"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(output: Output) -> String {
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    String::from_utf8(output.stdout).unwrap()
}

fn setup(body: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, body).unwrap();
    let out = dir.path().join("run");
    (dir, config, out)
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn prepare_train_eval_round_trip() {
    let (_dir, config, out) = setup(SMALL);
    let manifest: serde_json::Value = serde_json::from_str(&ok(jsr(&config, &out, &["prepare"]))).unwrap();
    assert_eq!(manifest["items"], 30);
    assert_eq!(manifest["users"], 30);
    assert_eq!(manifest, serde_json::from_str::<serde_json::Value>(&read(out.join("manifest.json"))).unwrap());

    let summary: serde_json::Value = serde_json::from_str(&ok(jsr(&config, &out, &["train", "--mode", "joint"]))).unwrap();
    assert_eq!(summary["mode"], "joint");
    let trace = read(out.join("joint/trace.tsv"));
    let train_rows = trace.lines().filter(|l| l.ends_with("\ttrain")).count();
    assert_eq!(train_rows, 12);

    let text = ok(jsr(&config, &out, &["eval", "--checkpoint", out.join("joint/best.ckpt").to_str().unwrap(), "--side", "retrieval"]));
    assert!(text.starts_with("# side: retrieval"));
    assert_eq!(read(out.join("eval/joint_best.retrieval.tsv")), text);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (_dir, config, out) = setup(SMALL);
    let files = ["manifest.json", "corpus.json", "rs_only/trace.tsv", "rs_only/best.ckpt", "rs_only/last.ckpt"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        ok(jsr(&config, &out, &["prepare"]));
        ok(jsr(&config, &out, &["train", "--mode", "rs_only"]));
        runs.push(files.map(|f| std::fs::read(out.join(f)).unwrap()));
    }
    for (k, file) in files.iter().enumerate() {
        assert!(runs[0][k] == runs[1][k], "{file} differs between runs");
    }
}

#[test]
fn seed_flag_changes_the_corpus() {
    let (_a, config, out) = setup(SMALL);
    let other = out.with_file_name("seeded");
    ok(jsr(&config, &out, &["prepare"]));
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jsr"));
    cmd.arg("--config").arg(&config).arg("--out").arg(&other).args(["--seed", "9", "prepare"]);
    ok(cmd.output().unwrap());
    assert_ne!(read(out.join("corpus.json")), read(other.join("corpus.json")));
}

#[test]
fn ir_only_checkpoint_flags_recommendation_report() {
    let (_dir, config, out) = setup(SMALL);
    ok(jsr(&config, &out, &["prepare"]));
    ok(jsr(&config, &out, &["train", "--mode", "ir_only"]));
    let report = out.join("rec.tsv");
    let text = ok(jsr(
        &config,
        &out,
        &["eval", "--checkpoint", out.join("ir_only/best.ckpt").to_str().unwrap(), "--side", "recommendation", "--report", report.to_str().unwrap()],
    ));
    assert!(text.contains("# note: untrained recommendation path: checkpoint was trained in mode ir_only"));
    assert_eq!(read(&report), text);
}

#[test]
fn compare_writes_table_and_curves() {
    let (_dir, config, out) = setup(SMALL);
    ok(jsr(&config, &out, &["prepare"]));
    let table = ok(jsr(&config, &out, &["compare"]));
    assert!(table.contains("Retrieval") && table.contains("Recommendation"));
    let dir = out.join("compare");
    assert_eq!(read(dir.join("table.txt")), table);
    let curves = read(dir.join("curves.tsv"));
    let mut lines = curves.lines();
    assert_eq!(lines.next(), Some(CURVES_HEADER));
    for mode in ["joint", "ir_only", "rs_only"] {
        let steps: Vec<usize> = curves
            .lines()
            .filter(|l| l.starts_with(&format!("{mode}\t")))
            .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(steps, (1..=12).collect::<Vec<_>>(), "{mode}");
    }
    for file in ["joint.retrieval.tsv", "joint.recommendation.tsv", "ir_only.retrieval.tsv", "rs_only.recommendation.tsv"] {
        assert!(dir.join(file).is_file(), "{file}");
    }
    assert!(!dir.join("ir_only.recommendation.tsv").exists());
    let json: serde_json::Value = serde_json::from_str(&read(dir.join("comparison.json"))).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_input_fails_without_outputs() {
    let (dir, config, out) = setup(
        "[data]\nsource = \"files\"\nreviews = \"absent.json\"\nmetadata = \"absent_meta.json\"\n",
    );
    let output = jsr(&config, &out, &["prepare"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).starts_with("error:"));
    assert!(!out.exists());
    drop(dir);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let (_dir, config, out) = setup("[training]\nlearning_rte = 0.1\n");
    assert_eq!(jsr(&config, &out, &["prepare"]).status.code(), Some(1));
}

#[test]
fn damaged_checkpoint_is_rejected() {
    let (_dir, config, out) = setup(SMALL);
    ok(jsr(&config, &out, &["prepare"]));
    ok(jsr(&config, &out, &["train", "--mode", "rs_only"]));
    let good = std::fs::read(out.join("rs_only/best.ckpt")).unwrap();
    let bad = out.join("bad.ckpt");
    for bytes in [b"nope".to_vec(), good[..good.len() / 2].to_vec()] {
        std::fs::write(&bad, bytes).unwrap();
        let output = jsr(&config, &out, &["eval", "--checkpoint", bad.to_str().unwrap(), "--side", "recommendation"]);
        assert_eq!(output.status.code(), Some(2));
    }
    assert!(!out.join("eval").exists());
}

#[test]
fn vocabulary_mismatch_is_rejected() {
    let (_dir, config, out) = setup(SMALL);
    ok(jsr(&config, &out, &["prepare"]));
    ok(jsr(&config, &out, &["train", "--mode", "rs_only"]));
    let path = out.join("rs_only/best.ckpt");
    let mut ckpt = Checkpoint::<f32>::load(&path).unwrap();
    ckpt.vocabulary.swap(0, 1);
    ckpt.save(&path).unwrap();
    let output = jsr(&config, &out, &["eval", "--checkpoint", path.to_str().unwrap(), "--side", "recommendation"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("vocabulary mismatch"));
}

/// Four leaf categories of six items; each user buys within one category.
fn write_review_files(dir: &Path) -> (PathBuf, PathBuf) {
    let themes = [["alpha", "amber"], ["bravo", "birch"], ["charlie", "cedar"], ["delta", "dune"]];
    let mut meta = String::new();
    let mut reviews = String::new();
    for (c, words) in themes.iter().enumerate() {
        for i in 0..6 {
            let asin = format!("B{c}{i}");
            let path = serde_json::json!([["Store", format!("{} goods", words[0])]]);
            meta.push_str(&format!("{}\n", serde_json::json!({"asin": asin, "categories": path})));
        }
        for u in 0..6 {
            for i in 0..4 {
                let asin = format!("B{c}{}", (u + i) % 6);
                let text = format!("solid {} item with {} finish number {}", words[0], words[1], (u * 7 + i) % 5);
                reviews.push_str(&format!(
                    "{}\n",
                    serde_json::json!({"reviewerID": format!("U{c}{u}"), "asin": asin, "reviewText": text})
                ));
            }
        }
    }
    reviews.push_str("{not json\n");
    let (r, m) = (dir.join("reviews.json"), dir.join("meta.json"));
    std::fs::write(&r, reviews).unwrap();
    std::fs::write(&m, meta).unwrap();
    (r, m)
}

#[test]
fn file_corpus_prepares_and_trains() {
    let dir = tempfile::tempdir().unwrap();
    let (reviews, meta) = write_review_files(dir.path());
    let body = SMALL.replace(
        "source = \"synthetic\"",
        &format!("source = \"files\"\nreviews = {:?}\nmetadata = {:?}", reviews, meta),
    );
    let config = dir.path().join("files.toml");
    std::fs::write(&config, body).unwrap();
    let out = dir.path().join("run");
    let manifest: serde_json::Value = serde_json::from_str(&ok(jsr(&config, &out, &["prepare"]))).unwrap();
    assert_eq!(manifest["users"], 24);
    assert_eq!(manifest["items"], 24);
    assert_eq!(manifest["malformed_lines"], 1);
    ok(jsr(&config, &out, &["train"]));
    assert!(out.join("joint/best.ckpt").is_file());
}
