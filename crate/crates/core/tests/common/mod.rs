#![allow(dead_code)]

use fairrank_core::domain::FractionTable;
use fairrank_core::fairness::CategoryDistribution;
use fairrank_core::{Candidate, CategoryCatalog, CategoryId, ItemId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Items with 1 to 3 random categories each.
pub fn catalog(rng: &mut impl Rng, items: usize, categories: usize) -> CategoryCatalog {
    let names = (0..categories).map(|c| format!("c{c}")).collect();
    let all: Vec<u32> = (0..categories as u32).collect();
    let membership = (0..items)
        .map(|_| {
            let n = rng.gen_range(1..=categories.min(3));
            let mut cats: Vec<CategoryId> = all.choose_multiple(rng, n).map(|&c| CategoryId(c)).collect();
            cats.sort();
            cats
        })
        .collect();
    CategoryCatalog::new(names, membership).unwrap()
}

pub fn fractions(rng: &mut impl Rng, items: usize, categories: usize) -> FractionTable {
    catalog(rng, items, categories).fraction_table()
}

/// A strictly positive distribution.
pub fn distribution(rng: &mut impl Rng, n: usize) -> CategoryDistribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    CategoryDistribution(raw).smoothed(1e-6)
}

/// Candidates over items `0..n` with distinct random scores, in canonical
/// order (score descending).
pub fn candidates(rng: &mut impl Rng, n: usize) -> Vec<Candidate> {
    let mut c: Vec<Candidate> = (0..n as u32)
        .map(|i| Candidate {
            item: ItemId(i),
            score: rng.gen_range(0.0..1.0),
        })
        .collect();
    c.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.item.cmp(&b.item)));
    c
}
