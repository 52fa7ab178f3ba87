//! k-core filtering and per-user temporal train/test splitting.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{Interaction, ItemId, UserId};
use crate::error::{Error, Result};
use crate::math::ceil;

/// Iteratively drops users and items with fewer than `k` interactions until
/// every survivor has degree >= `k`.
///
/// The maximal k-core is unique, so the result does not depend on the order
/// in which vertices are peeled; surviving rows keep their input order.
/// Degrees count rows, so repeated (user, item) events each count.
pub fn k_core_filter(interactions: &[Interaction], k: usize) -> Result<Vec<Interaction>> {
    if k == 0 {
        return Ok(interactions.to_vec());
    }
    let n_users = interactions.iter().map(|x| x.user.index() + 1).max().unwrap_or(0);
    let n_items = interactions.iter().map(|x| x.item.index() + 1).max().unwrap_or(0);

    let mut user_rows: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    let mut item_rows: Vec<Vec<usize>> = vec![Vec::new(); n_items];
    for (row, x) in interactions.iter().enumerate() {
        user_rows[x.user.index()].push(row);
        item_rows[x.item.index()].push(row);
    }
    let mut user_deg: Vec<usize> = user_rows.iter().map(Vec::len).collect();
    let mut item_deg: Vec<usize> = item_rows.iter().map(Vec::len).collect();
    let mut alive = vec![true; interactions.len()];
    let mut user_gone = vec![false; n_users];
    let mut item_gone = vec![false; n_items];

    // Peel queue: (is_user, index)
    let mut queue: Vec<(bool, usize)> = Vec::new();
    for (u, &d) in user_deg.iter().enumerate() {
        if d > 0 && d < k {
            queue.push((true, u));
        }
    }
    for (i, &d) in item_deg.iter().enumerate() {
        if d > 0 && d < k {
            queue.push((false, i));
        }
    }
    while let Some((is_user, v)) = queue.pop() {
        let (gone, rows) = if is_user {
            (&mut user_gone[v], &user_rows[v])
        } else {
            (&mut item_gone[v], &item_rows[v])
        };
        if *gone {
            continue;
        }
        *gone = true;
        for &row in rows {
            if !alive[row] {
                continue;
            }
            alive[row] = false;
            let x = &interactions[row];
            if is_user {
                let i = x.item.index();
                item_deg[i] -= 1;
                if item_deg[i] < k && !item_gone[i] {
                    queue.push((false, i));
                }
            } else {
                let u = x.user.index();
                user_deg[u] -= 1;
                if user_deg[u] < k && !user_gone[u] {
                    queue.push((true, u));
                }
            }
        }
    }

    let out: Vec<Interaction> = interactions
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(x, _)| *x)
        .collect();
    if out.is_empty() && !interactions.is_empty() {
        return Err(Error::Empty(alloc::format!("the {k}-core is empty")));
    }
    Ok(out)
}

/// Result of [`temporal_split`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemporalSplit {
    pub train: Vec<Interaction>,
    pub test: Vec<Interaction>,
    /// Users whose whole history landed in train (no test interactions).
    pub train_only_users: Vec<UserId>,
}

/// Number of training rows for a user with `n` interactions: `ceil(f * n)`,
/// clamped to `[1, n]`.
pub fn train_count(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    // The epsilon guards against products like 0.8 * 5 landing a hair above 4.
    let raw = ceil(fraction * n as f64 - 1e-9) as usize;
    raw.clamp(1, n)
}

/// Per-user temporal split: each user's interactions are sorted by
/// timestamp (ties by item id) and the earliest `ceil(f * n_u)` go to train.
///
/// Output rows are grouped by user id and time-ordered within a user.
pub fn temporal_split(interactions: &[Interaction], fraction: f64) -> Result<TemporalSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(alloc::format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut by_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    for x in interactions {
        by_user.entry(x.user).or_default().push(*x);
    }
    let mut out = TemporalSplit::default();
    for (user, mut rows) in by_user {
        rows.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then(a.item.cmp(&b.item))
        });
        let n_train = train_count(rows.len(), fraction);
        if n_train == rows.len() {
            out.train_only_users.push(user);
        }
        let test = rows.split_off(n_train);
        out.train.extend(rows);
        out.test.extend(test);
    }
    Ok(out)
}

/// Collapses repeated (user, item) pairs to the latest-timestamp row, which
/// is what the factor models train on. Returns rows sorted by (user, item).
pub fn latest_per_pair(interactions: &[Interaction]) -> Vec<Interaction> {
    let mut latest: BTreeMap<(UserId, ItemId), Interaction> = BTreeMap::new();
    for x in interactions {
        latest
            .entry((x.user, x.item))
            .and_modify(|prev| {
                if x.timestamp >= prev.timestamp {
                    *prev = *x;
                }
            })
            .or_insert(*x);
    }
    latest.into_values().collect()
}

/// Counts repeated (user, item) pairs. Returns `((user, item), count)`
/// sorted by key.
pub fn pair_counts(interactions: &[Interaction]) -> Vec<((UserId, ItemId), u32)> {
    let mut counts: BTreeMap<(UserId, ItemId), u32> = BTreeMap::new();
    for x in interactions {
        *counts.entry((x.user, x.item)).or_default() += 1;
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(u: u32, i: u32, t: u64) -> Interaction {
        Interaction {
            user: UserId(u),
            item: ItemId(i),
            rating: None,
            timestamp: t,
        }
    }

    #[test]
    fn zero_core_is_identity() {
        let rows = vec![x(0, 0, 1), x(1, 2, 3)];
        assert_eq!(k_core_filter(&rows, 0).unwrap(), rows);
    }

    #[test]
    fn chain_graph_two_core_is_empty() {
        // u0-i0, u1-i0, u1-i1: u0 and i1 have degree 1, peeling them leaves
        // u1-i0 with degree 1 on both sides, which is peeled too.
        let rows = vec![x(0, 0, 1), x(1, 0, 2), x(1, 1, 3)];
        assert!(matches!(k_core_filter(&rows, 2), Err(Error::Empty(_))));
    }

    #[test]
    fn complete_bipartite_survives() {
        let mut rows = Vec::new();
        for u in 0..3 {
            for i in 0..3 {
                rows.push(x(u, i, 0));
            }
        }
        rows.push(x(3, 0, 0));
        let core = k_core_filter(&rows, 3).unwrap();
        assert_eq!(core.len(), 9);
        assert!(core.iter().all(|r| r.user.0 < 3));
    }

    #[test]
    fn split_takes_earliest_fraction() {
        let rows: Vec<_> = [30, 10, 50, 20, 40].iter().map(|&t| x(0, t as u32, t)).collect();
        let s = temporal_split(&rows, 0.8).unwrap();
        let train: Vec<u64> = s.train.iter().map(|r| r.timestamp).collect();
        assert_eq!(train, vec![10, 20, 30, 40]);
        assert_eq!(s.test.len(), 1);
        assert_eq!(s.test[0].timestamp, 50);
    }

    #[test]
    fn equal_timestamps_split_by_item_order() {
        let rows = vec![x(0, 4, 7), x(0, 1, 7), x(0, 3, 7), x(0, 2, 7), x(0, 0, 7)];
        let s = temporal_split(&rows, 0.6).unwrap();
        let train: Vec<u32> = s.train.iter().map(|r| r.item.0).collect();
        assert_eq!(train, vec![0, 1, 2]);
        let test: Vec<u32> = s.test.iter().map(|r| r.item.0).collect();
        assert_eq!(test, vec![3, 4]);
    }

    #[test]
    fn single_interaction_user_stays_in_train() {
        let s = temporal_split(&[x(5, 0, 1)], 0.8).unwrap();
        assert_eq!(s.train.len(), 1);
        assert!(s.test.is_empty());
        assert_eq!(s.train_only_users, vec![UserId(5)]);
    }

    #[test]
    fn fraction_out_of_range_is_rejected() {
        assert!(temporal_split(&[], 1.0).is_err());
        assert!(temporal_split(&[], 0.0).is_err());
    }

    #[test]
    fn train_count_matches_integer_ceiling() {
        for n in 1..500usize {
            assert_eq!(train_count(n, 0.8), (4 * n + 4) / 5, "n = {n}");
        }
    }

    #[test]
    fn latest_row_wins_for_duplicates() {
        let rows = vec![x(0, 0, 5), x(0, 0, 9), x(0, 0, 2)];
        let d = latest_per_pair(&rows);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].timestamp, 9);
        assert_eq!(pair_counts(&rows), vec![((UserId(0), ItemId(0)), 3)]);
    }
}
