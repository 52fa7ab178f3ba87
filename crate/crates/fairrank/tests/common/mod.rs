#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fairrank::harness::ExperimentConfig;
use fairrank::ingest::{Format, IngestConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GENRES: [&str; 4] = ["drama", "comedy", "action", "horror"];

/// Writes a small generic-TSV dataset: 40 users with gender and age
/// attributes, 60 items with 1 or 2 genres, about 20 interactions each.
pub fn write_synthetic(dir: &Path, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fs::create_dir_all(dir).unwrap();
    let mut users = String::from("user\tgender\tage_group\n");
    for u in 0..40 {
        let g = if u % 2 == 0 { "F" } else { "M" };
        writeln!(users, "u{u}\t{g}\t{}", ["young", "mid", "old"][u % 3]).unwrap();
    }
    let mut items = String::from("item\tcategories\n");
    for i in 0..60 {
        let n = rng.gen_range(1..=2);
        let cats: Vec<&str> = GENRES.choose_multiple(&mut rng, n).copied().collect();
        writeln!(items, "i{i}\t{}", cats.join("|")).unwrap();
    }
    let mut rows = String::from("user\titem\trating\ttimestamp\n");
    let all: Vec<usize> = (0..60).collect();
    for u in 0..40 {
        // women lean towards the first half of the catalogue
        let pool: Vec<usize> = if u % 2 == 0 { all[..40].to_vec() } else { all[20..].to_vec() };
        let n = rng.gen_range(15..25);
        for (t, i) in pool.choose_multiple(&mut rng, n).enumerate() {
            writeln!(rows, "u{u}\ti{i}\t{}\t{}", rng.gen_range(1..=5), 1000 + t * 7 + u).unwrap();
        }
    }
    fs::write(dir.join("users.tsv"), users).unwrap();
    fs::write(dir.join("item_categories.tsv"), items).unwrap();
    fs::write(dir.join("interactions.tsv"), rows).unwrap();
}

pub fn ingest_config(dir: &Path) -> IngestConfig {
    IngestConfig {
        format: Format::GenericTsv,
        dir: Some(dir.to_path_buf()),
        ..IngestConfig::default()
    }
}

pub fn experiment(data: &Path, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        dataset: ingest_config(data),
        output: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    c.model.train.dim = 8;
    c.model.train.epochs = 10;
    c.rerank.k = 10;
    c
}
