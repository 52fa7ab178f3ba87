//! Human-readable and plot-ready summaries of a run directory.
//!
//! Everything here is a pure function of the JSON files in the run
//! directory, so regenerating a report is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::harness::{
    AccuracyFile, AttributeBias, RunManifest, ACCURACY_REPORT, BIAS_REPORT, RUN_MANIFEST,
};
use crate::io::read_json;

pub const REPORT_MD: &str = "report.md";
pub const REPORT_CSV: &str = "report.csv";
pub const PROPORTIONS_CSV: &str = "proportions.csv";

pub fn emit_report(dir: &Path) -> Result<()> {
    let manifest: RunManifest = read_json(&dir.join(RUN_MANIFEST)).context("incomplete run directory")?;
    let bias: BTreeMap<String, AttributeBias> =
        read_json(&dir.join(BIAS_REPORT)).context("incomplete run directory")?;
    let accuracy: AccuracyFile = read_json(&dir.join(ACCURACY_REPORT)).context("incomplete run directory")?;

    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write(REPORT_MD, markdown(&manifest, &bias, &accuracy)?)?;
    write(REPORT_CSV, summary_csv(&manifest, &bias, &accuracy)?)?;
    write(PROPORTIONS_CSV, proportions_csv(&manifest, &bias)?)?;
    Ok(())
}

fn ordered<'a>(manifest: &'a RunManifest, bias: &'a BTreeMap<String, AttributeBias>) -> Result<Vec<(&'a str, &'a AttributeBias)>> {
    manifest
        .attributes
        .iter()
        .map(|a| {
            bias.get(a)
                .map(|b| (a.as_str(), b))
                .with_context(|| format!("bias report has no entry for `{a}`"))
        })
        .collect()
}

fn markdown(manifest: &RunManifest, bias: &BTreeMap<String, AttributeBias>, acc: &AccuracyFile) -> Result<String> {
    let c = &manifest.config;
    let s = &manifest.ingest;
    let k = acc.k;
    let mut out = String::new();
    writeln!(out, "# Fair re-ranking report\n")?;
    writeln!(
        out,
        "Dataset: {} users, {} items, {} interactions, {} categories ({}-core, {} train / {} test rows).",
        s.users, s.items, s.interactions, s.categories, c.dataset.k_core, s.train_interactions, s.test_interactions
    )?;
    writeln!(out, "Model: {:?}.", manifest.model.kind)?;
    writeln!(
        out,
        "Re-ranking: beta = {}, gamma = {}, alpha = {}, k = {}, N = {}.\n",
        c.rerank.beta,
        c.rerank.gamma,
        c.rerank.alpha,
        c.rerank.k,
        c.rerank.top_n.map_or("all".to_string(), |n| n.to_string())
    )?;

    writeln!(out, "## Performance and bias\n")?;
    writeln!(out, "| Attribute | List | NDCG@{k} | HitRatio@{k} | CC | CDCG |")?;
    writeln!(out, "|---|---|---|---|---|---|")?;
    for (name, b) in ordered(manifest, bias)? {
        let fair = acc.fair.get(name).with_context(|| format!("accuracy report has no entry for `{name}`"))?;
        writeln!(
            out,
            "| {name} | Original | {:.4} | {:.4} | {:.4} | {:.4} |",
            acc.original.ndcg,
            acc.original.hit_ratio,
            b.original.cc_total(),
            b.original.cdcg_total()
        )?;
        writeln!(
            out,
            "| {name} | Fair | {:.4} | {:.4} | {:.4} | {:.4} |",
            fair.ndcg,
            fair.hit_ratio,
            b.fair.cc_total(),
            b.fair.cdcg_total()
        )?;
    }

    for (name, b) in ordered(manifest, bias)? {
        writeln!(out, "\n## Category proportions by {name}\n")?;
        for (class, train, orig, fair) in class_rows(b) {
            writeln!(out, "### {class}\n")?;
            writeln!(out, "| Category | Training | Original | Fair |")?;
            writeln!(out, "|---|---|---|---|")?;
            for (c, cat) in b.original.categories.iter().enumerate() {
                writeln!(
                    out,
                    "| {cat} | {} | {} | {} |",
                    cell(train.map(|v| v[c])),
                    cell(orig.map(|v| v[c])),
                    cell(fair.map(|v| v[c]))
                )?;
            }
            writeln!(out)?;
        }
        let excluded = &b.original.cc.excluded_classes;
        if !excluded.is_empty() {
            writeln!(out, "Classes without evaluated users: {}.\n", excluded.join(", "))?;
        }
    }
    Ok(out.trim_end().to_string() + "\n")
}

fn cell(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |v| format!("{v:.4}"))
}

type ClassRow<'a> = (&'a str, Option<&'a [f64]>, Option<&'a [f64]>, Option<&'a [f64]>);

/// Per class: training, original and fair category proportions (CC values).
fn class_rows<'a>(b: &'a AttributeBias) -> Vec<ClassRow<'a>> {
    let row = |classes: &[String], values: &'a [Vec<f64>], class: &str| -> Option<&'a [f64]> {
        classes.iter().position(|c| c == class).map(|i| values[i].as_slice())
    };
    let mut classes: Vec<&str> = b.training.classes.iter().map(String::as_str).collect();
    for c in b.original.cc.classes.iter().chain(&b.fair.cc.classes) {
        if !classes.contains(&c.as_str()) {
            classes.push(c);
        }
    }
    classes
        .into_iter()
        .map(|class| {
            (
                class,
                row(&b.training.classes, &b.training.values, class),
                row(&b.original.cc.classes, &b.original.cc.values, class),
                row(&b.fair.cc.classes, &b.fair.cc.values, class),
            )
        })
        .collect()
}

fn summary_csv(manifest: &RunManifest, bias: &BTreeMap<String, AttributeBias>, acc: &AccuracyFile) -> Result<String> {
    let mut out = String::from("attribute,list,ndcg,hit_ratio,cc_bias,cdcg_bias\n");
    for (name, b) in ordered(manifest, bias)? {
        let fair = acc.fair.get(name).with_context(|| format!("accuracy report has no entry for `{name}`"))?;
        writeln!(
            out,
            "{name},original,{},{},{},{}",
            acc.original.ndcg,
            acc.original.hit_ratio,
            b.original.cc_total(),
            b.original.cdcg_total()
        )?;
        writeln!(
            out,
            "{name},fair,{},{},{},{}",
            fair.ndcg,
            fair.hit_ratio,
            b.fair.cc_total(),
            b.fair.cdcg_total()
        )?;
    }
    Ok(out)
}

fn proportions_csv(manifest: &RunManifest, bias: &BTreeMap<String, AttributeBias>) -> Result<String> {
    let mut out = String::from("attribute,class,category,training,original,fair\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for (name, b) in ordered(manifest, bias)? {
        for (class, train, orig, fair) in class_rows(b) {
            for (c, cat) in b.original.categories.iter().enumerate() {
                writeln!(
                    out,
                    "{name},{},{},{},{},{}",
                    csv_field(class),
                    csv_field(cat),
                    opt(train.map(|v| v[c])),
                    opt(orig.map(|v| v[c])),
                    opt(fair.map(|v| v[c]))
                )?;
            }
        }
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
