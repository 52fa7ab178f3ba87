//! The binary end to end on a small synthetic dataset.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

mod common;

fn fairrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairrank")).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pipeline_subcommands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_synthetic(&data, 10);
    let bundle = tmp.path().join("bundle");
    let model = tmp.path().join("model.json");
    let scores = tmp.path().join("scores.tsv");
    let dense = tmp.path().join("scores.bin");
    let fair = tmp.path().join("fair.tsv");
    let base = tmp.path().join("base.tsv");

    ok(&fairrank(&["ingest", "--data-dir", p(&data), "--format", "tsv", "--out", p(&bundle)]));
    ok(&fairrank(&["train", "--bundle", p(&bundle), "--dim", "4", "--epochs", "5", "--out", p(&model)]));
    ok(&fairrank(&["score", "--bundle", p(&bundle), "--model", p(&model), "--top-n", "40", "--k", "10", "--out", p(&scores)]));
    ok(&fairrank(&["export-scores", "--bundle", p(&bundle), "--model", p(&model), "--out", p(&dense)]));

    let rerank = |scores: &Path, beta: &str, out: &Path| {
        ok(&fairrank(&[
            "rerank", "--bundle", p(&bundle), "--scores", p(scores), "--attribute", "gender",
            "--beta", beta, "--k", "10", "--top-n", "40", "--out", p(out),
        ]));
    };
    rerank(&scores, "0", &base);
    rerank(&scores, "0.5", &fair);
    let dense_fair = tmp.path().join("fair_dense.tsv");
    rerank(&dense, "0.5", &dense_fair);
    assert_eq!(fs::read(&fair).unwrap(), fs::read(&dense_fair).unwrap());
    assert_ne!(fs::read(&fair).unwrap(), fs::read(&base).unwrap());

    let eval = fairrank(&["evaluate", "--bundle", p(&bundle), "--lists", p(&fair), "--k", "10"]);
    ok(&eval);
    let json: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert!(json.to_string().contains("gender"), "{json}");
}

#[test]
fn run_then_report_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_synthetic(&data, 11);
    let run = tmp.path().join("run");
    let config = tmp.path().join("exp.json");
    let mut cfg = common::experiment(&data, &run);
    cfg.output = run.clone();
    fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();

    ok(&fairrank(&["run", "--config", p(&config), "--out", p(&run), "--threads", "2"]));
    let md = fs::read(run.join("report.md")).unwrap();
    ok(&fairrank(&["report", p(&run)]));
    assert_eq!(fs::read(run.join("report.md")).unwrap(), md);

    let sweep = tmp.path().join("sweep.csv");
    ok(&fairrank(&["sweep", "--config", p(&config), "--grid", "0,0.5", "--attribute", "gender", "--out", p(&sweep)]));
    let text = fs::read_to_string(&sweep).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn failures_are_stage_tagged() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fairrank(&["run", "--out", p(&tmp.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]"));

    let out = fairrank(&["ingest", "--data-dir", p(tmp.path()), "--out", p(&tmp.path().join("b"))]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error[ingest]") && stderr.contains("u.data"), "{stderr}");

    let out = fairrank(&["run", "--data-dir", p(tmp.path()), "--beta", "2", "--out", p(&tmp.path().join("r"))]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]"));
}
