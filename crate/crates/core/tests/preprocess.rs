//! k-core and split properties against brute-force references.

use std::collections::BTreeMap;

use fairrank_core::preprocess::{k_core_filter, temporal_split, train_count};
use fairrank_core::{Error, Interaction, ItemId, UserId};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

mod common;

fn random_interactions(seed: u64, users: u32, items: u32, rows: usize) -> Vec<Interaction> {
    let mut rng = common::rng(seed);
    (0..rows)
        .map(|_| Interaction {
            user: UserId(rng.gen_range(0..users)),
            item: ItemId(rng.gen_range(0..items)),
            rating: None,
            timestamp: rng.gen_range(0..50),
        })
        .collect()
}

/// Repeatedly deletes every row touching a low-degree vertex until nothing
/// changes.
fn brute_force_core(rows: &[Interaction], k: usize) -> Vec<Interaction> {
    let mut alive = rows.to_vec();
    loop {
        let mut ud: BTreeMap<UserId, usize> = BTreeMap::new();
        let mut id: BTreeMap<ItemId, usize> = BTreeMap::new();
        for x in &alive {
            *ud.entry(x.user).or_default() += 1;
            *id.entry(x.item).or_default() += 1;
        }
        let next: Vec<Interaction> = alive
            .iter()
            .filter(|x| ud[&x.user] >= k && id[&x.item] >= k)
            .copied()
            .collect();
        if next.len() == alive.len() {
            return next;
        }
        alive = next;
    }
}

fn sorted(mut rows: Vec<Interaction>) -> Vec<(u32, u32, u64)> {
    let mut v: Vec<_> = rows.drain(..).map(|x| (x.user.0, x.item.0, x.timestamp)).collect();
    v.sort();
    v
}

#[test]
fn chain_graph_matches_brute_force() {
    let x = |u, i| Interaction {
        user: UserId(u),
        item: ItemId(i),
        rating: None,
        timestamp: 0,
    };
    let rows = vec![x(0, 0), x(1, 0), x(1, 1)];
    assert!(brute_force_core(&rows, 2).is_empty());
    assert!(matches!(k_core_filter(&rows, 2), Err(Error::Empty(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn k_core_matches_iterative_deletion(seed in any::<u64>(), k in 1usize..6, rows in 20usize..300) {
        let input = random_interactions(seed, 25, 30, rows);
        let expected = brute_force_core(&input, k);
        match k_core_filter(&input, k) {
            Ok(core) => {
                prop_assert_eq!(sorted(core.clone()), sorted(expected));
                let mut ud: BTreeMap<UserId, usize> = BTreeMap::new();
                let mut id: BTreeMap<ItemId, usize> = BTreeMap::new();
                for x in &core {
                    *ud.entry(x.user).or_default() += 1;
                    *id.entry(x.item).or_default() += 1;
                }
                prop_assert!(ud.values().chain(id.values()).all(|&d| d >= k));
            }
            Err(Error::Empty(_)) => prop_assert!(expected.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn k_core_is_order_independent(seed in any::<u64>(), k in 2usize..5) {
        let input = random_interactions(seed, 20, 20, 250);
        let mut shuffled = input.clone();
        shuffled.shuffle(&mut common::rng(seed ^ 0x5eed));
        let a = k_core_filter(&input, k).map(sorted).ok();
        let b = k_core_filter(&shuffled, k).map(sorted).ok();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn split_preserves_multiset(seed in any::<u64>(), f in 0.05f64..0.95) {
        let input = random_interactions(seed, 15, 40, 200);
        let s = temporal_split(&input, f).unwrap();
        let mut both = s.train.clone();
        both.extend(&s.test);
        prop_assert_eq!(sorted(both), sorted(input.clone()));

        let mut per_user: BTreeMap<UserId, usize> = BTreeMap::new();
        for x in &input {
            *per_user.entry(x.user).or_default() += 1;
        }
        let expected: usize = per_user.values().map(|&n| train_count(n, f)).sum();
        prop_assert_eq!(s.train.len(), expected);

        // every test row is no earlier than the same user's train rows
        for t in &s.test {
            for r in s.train.iter().filter(|r| r.user == t.user) {
                prop_assert!((r.timestamp, r.item) <= (t.timestamp, t.item));
            }
        }
    }
}
