//! File formats: bundles, score files, ranked lists and run reports.

use std::fs;

use fairrank::bundle::{read_bundle, write_bundle};
use fairrank::harness::{prepare, run_experiment, run_prepared};
use fairrank::ingest::{ingest, IngestError};
use fairrank::io::{
    read_dense_scores, read_lists, read_scores_tsv, write_dense_scores, write_lists, write_scores_tsv, Dtype,
};
use fairrank::report::{emit_report, REPORT_CSV, REPORT_MD};
use fairrank::core::recommenders::{top_n_candidates, train_wmf, TrainConfig};
use fairrank::core::Split;

mod common;

#[test]
fn bundle_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_synthetic(tmp.path(), 1);
    let (dataset, summary) = ingest(&common::ingest_config(tmp.path())).unwrap();
    assert_eq!(dataset.catalog().num_categories(), common::GENRES.len());
    let out = tmp.path().join("bundle");
    write_bundle(&out, &dataset, &common::ingest_config(tmp.path()), &summary).unwrap();
    let (back, manifest) = read_bundle(&out).unwrap();
    assert_eq!(back, dataset);
    assert_eq!(manifest.summary, summary);
}

#[test]
fn missing_files_name_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let err = ingest(&common::ingest_config(&tmp.path().join("nowhere"))).unwrap_err();
    assert!(matches!(err, IngestError::Io { .. }));
    assert!(err.to_string().contains("interactions.tsv"), "{err}");
}

#[test]
fn scores_round_trip_through_tsv_and_dense_files() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_synthetic(tmp.path(), 2);
    let (dataset, _) = ingest(&common::ingest_config(tmp.path())).unwrap();
    let train: Vec<_> = dataset.interactions_in(Split::Train).copied().collect();
    let cfg = TrainConfig {
        dim: 4,
        epochs: 5,
        ..TrainConfig::default()
    };
    let (model, _) = train_wmf(dataset.num_users(), dataset.num_items(), &train, &cfg).unwrap();
    let train_items = dataset.item_sets(Split::Train);
    let scores = top_n_candidates(&model, &train_items, 30, 10).unwrap();

    let tsv = tmp.path().join("scores.tsv");
    write_scores_tsv(&tsv, &scores, &dataset).unwrap();
    assert_eq!(read_scores_tsv(&tsv, &dataset, 30).unwrap(), scores);

    let dense = tmp.path().join("scores.bin");
    write_dense_scores(&dense, &model, &dataset, Dtype::F64).unwrap();
    assert_eq!(read_dense_scores(&dense, &dataset, 30).unwrap(), scores);

    write_dense_scores(&dense, &model, &dataset, Dtype::F32).unwrap();
    let narrow = read_dense_scores(&dense, &dataset, 30).unwrap();
    for (a, b) in narrow.lists().iter().zip(scores.lists()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x.score - y.score).abs() <= 1e-6 * y.score.abs().max(1.0));
        }
    }

    let lists = scores.top_k(10);
    let path = tmp.path().join("lists.tsv");
    write_lists(&path, &lists, &scores, &dataset).unwrap();
    assert_eq!(read_lists(&path, &dataset).unwrap(), lists);
}

#[test]
fn bad_score_rows_are_reported_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_synthetic(tmp.path(), 3);
    let (dataset, _) = ingest(&common::ingest_config(tmp.path())).unwrap();
    let user = dataset.users().original(0).unwrap().to_string();
    let path = tmp.path().join("bad.tsv");

    fs::write(&path, format!("user\titem\tscore\n{user}\tnope\t0.5\n")).unwrap();
    let err = format!("{:#}", read_scores_tsv(&path, &dataset, 10).unwrap_err());
    assert!(err.contains("bad.tsv:2") && err.contains("unknown item nope"), "{err}");

    let item = dataset.items().original(0).unwrap();
    fs::write(&path, format!("{user}\t{item}\tNaN\n")).unwrap();
    assert!(read_scores_tsv(&path, &dataset, 10).is_err());
}

#[test]
fn reports_regenerate_identically() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_synthetic(tmp.path(), 4);
    let out = tmp.path().join("run");
    let outcome = run_experiment(&common::experiment(tmp.path(), &out)).unwrap();
    assert_eq!(outcome.bias.len(), 2);
    let md = fs::read(out.join(REPORT_MD)).unwrap();
    let csv = fs::read(out.join(REPORT_CSV)).unwrap();
    emit_report(&out).unwrap();
    assert_eq!(fs::read(out.join(REPORT_MD)).unwrap(), md);
    assert_eq!(fs::read(out.join(REPORT_CSV)).unwrap(), csv);
    let text = String::from_utf8(md).unwrap();
    assert!(text.contains("| gender | Fair |"), "{text}");
}

#[test]
fn beta_zero_run_keeps_baseline_lists() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_synthetic(tmp.path(), 5);
    let mut cfg = common::experiment(tmp.path(), &tmp.path().join("run"));
    cfg.rerank.beta = 0.0;
    let prepared = prepare(&cfg).unwrap();
    let outcome = run_prepared(&prepared, &cfg.output).unwrap();
    for lists in outcome.fair_lists.values() {
        assert_eq!(lists, &outcome.original_lists);
    }
    let baseline = fs::read(cfg.output.join("baseline.tsv")).unwrap();
    assert_eq!(fs::read(cfg.output.join("reranked_gender.tsv")).unwrap(), baseline);
}

#[test]
fn failed_run_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    common::write_synthetic(tmp.path(), 6);
    let mut cfg = common::experiment(tmp.path(), &tmp.path().join("run"));
    cfg.attributes = vec!["shoe_size".into()];
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.stage.to_string(), "profile");
    assert!(!cfg.output.exists());
}
