//! Score matrices, ranked lists and profiles on disk.
//!
//! Scores come as sparse `user\titem\tscore` TSV or as a dense binary
//! matrix: one JSON header line (shape, dtype, id maps) followed by
//! row-major little-endian values. Ids in every file are the dataset's
//! original identifiers.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use fairrank_core::fairness::CounterfactualProfile;
use fairrank_core::recommenders::{candidates_from_scores, FactorModel};
use fairrank_core::{Candidate, Dataset, ItemId, RankedList, ScoreSet, Split, UserId};
use serde::{Deserialize, Serialize};

fn ids(dataset: &Dataset) -> (&fairrank_core::IdIndex, &fairrank_core::IdIndex) {
    (dataset.users(), dataset.items())
}

pub fn write_scores_tsv(path: &Path, scores: &ScoreSet, dataset: &Dataset) -> Result<()> {
    let (users, items) = ids(dataset);
    let mut out = String::from("user\titem\tscore\n");
    for (u, list) in scores.lists().iter().enumerate() {
        let user = users.original(u as u32).context("score set larger than the user index")?;
        for c in list {
            writeln!(out, "{user}\t{}\t{}", items.original(c.item.0).unwrap(), c.score)?;
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Loads `user\titem\tscore` rows (an optional header line is skipped),
/// drops training items and keeps the best `n` per user.
pub fn read_scores_tsv(path: &Path, dataset: &Dataset, n: usize) -> Result<ScoreSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (users, items) = ids(dataset);
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || (line_no == 1 && line.starts_with("user\t")) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        ensure!(f.len() == 3, "{}:{line_no}: expected 3 fields, found {}", path.display(), f.len());
        let user = users
            .get(f[0])
            .with_context(|| format!("{}:{line_no}: unknown user {}", path.display(), f[0]))?;
        let item = items
            .get(f[1])
            .with_context(|| format!("{}:{line_no}: unknown item {}", path.display(), f[1]))?;
        let score: f64 = f[2]
            .trim()
            .parse()
            .with_context(|| format!("{}:{line_no}: bad score `{}`", path.display(), f[2]))?;
        ensure!(score.is_finite(), "{}:{line_no}: non-finite score", path.display());
        rows.push((UserId(user), ItemId(item), score));
    }
    Ok(candidates_from_scores(&rows, &dataset.item_sets(Split::Train), n)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: Dtype,
    pub users: Vec<String>,
    pub items: Vec<String>,
}

/// Writes the full `users x items` prediction matrix of `model`.
pub fn write_dense_scores(path: &Path, model: &FactorModel, dataset: &Dataset, dtype: Dtype) -> Result<()> {
    let header = DenseHeader {
        rows: model.num_users(),
        cols: model.num_items(),
        dtype,
        users: dataset.users().originals().to_vec(),
        items: dataset.items().originals().to_vec(),
    };
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for u in 0..header.rows {
        for i in 0..header.cols {
            let s = model.predict(UserId(u as u32), ItemId(i as u32));
            match dtype {
                Dtype::F32 => w.write_all(&(s as f32).to_le_bytes())?,
                Dtype::F64 => w.write_all(&s.to_le_bytes())?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dense score file. NaN entries mean "not scored" and are skipped.
pub fn read_dense_scores(path: &Path, dataset: &Dataset, n: usize) -> Result<ScoreSet> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: DenseHeader =
        serde_json::from_str(&line).with_context(|| format!("{}: bad JSON header", path.display()))?;
    ensure!(
        header.users.len() == header.rows && header.items.len() == header.cols,
        "{}: header id maps do not match the shape",
        path.display()
    );
    let (users, items) = ids(dataset);
    let user_map = header
        .users
        .iter()
        .map(|u| users.get(u).with_context(|| format!("{}: unknown user {u}", path.display())))
        .collect::<Result<Vec<_>>>()?;
    let item_map = header
        .items
        .iter()
        .map(|i| items.get(i).with_context(|| format!("{}: unknown item {i}", path.display())))
        .collect::<Result<Vec<_>>>()?;
    let width = match header.dtype {
        Dtype::F32 => 4,
        Dtype::F64 => 8,
    };
    let mut buf = vec![0u8; header.cols * width];
    let mut rows = Vec::new();
    for &user in &user_map {
        r.read_exact(&mut buf)
            .with_context(|| format!("{}: truncated matrix", path.display()))?;
        for (j, chunk) in buf.chunks_exact(width).enumerate() {
            let s = match header.dtype {
                Dtype::F32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
                Dtype::F64 => f64::from_le_bytes(chunk.try_into().unwrap()),
            };
            if s.is_nan() {
                continue;
            }
            rows.push((UserId(user), ItemId(item_map[j]), s));
        }
    }
    if r.read(&mut [0u8])? != 0 {
        bail!("{}: trailing bytes after the matrix", path.display());
    }
    Ok(candidates_from_scores(&rows, &dataset.item_sets(Split::Train), n)?)
}

/// `user\trank\titem\tscore` rows, rank starting at 1. `scores` supplies the
/// raw baseline score of every listed item.
pub fn write_lists(path: &Path, lists: &[RankedList], scores: &ScoreSet, dataset: &Dataset) -> Result<()> {
    fs::write(path, format_lists(lists, scores, dataset)?).with_context(|| format!("writing {}", path.display()))
}

pub fn format_lists(lists: &[RankedList], scores: &ScoreSet, dataset: &Dataset) -> Result<String> {
    let (users, items) = ids(dataset);
    let mut out = String::from("user\trank\titem\tscore\n");
    for list in lists {
        let candidates: &[Candidate] = scores.for_user(list.user);
        for (j, item) in list.items.iter().enumerate() {
            let score = candidates
                .iter()
                .find(|c| c.item == *item)
                .map(|c| c.score)
                .with_context(|| format!("item {item} is not a candidate of user {}", list.user))?;
            writeln!(
                out,
                "{}\t{}\t{}\t{score}",
                users.original(list.user.0).unwrap(),
                j + 1,
                items.original(item.0).unwrap()
            )?;
        }
    }
    Ok(out)
}

pub fn read_lists(path: &Path, dataset: &Dataset) -> Result<Vec<RankedList>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (users, items) = ids(dataset);
    let mut by_user: std::collections::BTreeMap<u32, Vec<(usize, ItemId)>> = Default::default();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        ensure!(f.len() >= 3, "{}:{}: expected user, rank, item", path.display(), i + 1);
        let user = users
            .get(f[0])
            .with_context(|| format!("{}:{}: unknown user {}", path.display(), i + 1, f[0]))?;
        let rank: usize = f[1].parse().with_context(|| format!("{}:{}: bad rank", path.display(), i + 1))?;
        let item = items
            .get(f[2])
            .with_context(|| format!("{}:{}: unknown item {}", path.display(), i + 1, f[2]))?;
        by_user.entry(user).or_default().push((rank, ItemId(item)));
    }
    by_user
        .into_iter()
        .map(|(u, mut ranked)| {
            ranked.sort_by_key(|r| r.0);
            Ok(RankedList::new(UserId(u), ranked.into_iter().map(|r| r.1).collect())?)
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_profile(path: &Path, profile: &CounterfactualProfile) -> Result<()> {
    write_json(path, profile)
}

pub fn read_profile(path: &Path) -> Result<CounterfactualProfile> {
    read_json(path)
}
