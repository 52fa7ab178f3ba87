//! Weighted matrix factorisation for implicit feedback, trained by
//! alternating least squares.
//!
//! Every observed (user, item) pair has preference 1 and confidence
//! `1 + alpha * count`; unobserved pairs have preference 0 and confidence 1.
//! The objective is
//!
//! ```text
//! sum_{u,i} c_ui (p_ui - x_u . y_i)^2 + lambda (sum |x_u|^2 + sum |y_i|^2)
//! ```
//!
//! Each half-step solves its ridge subproblem exactly, so the objective never
//! increases from one sweep to the next.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{cholesky_solve, gram};
use super::{FactorModel, TrainConfig, TrainReport, ILL_CONDITIONED};
use crate::domain::Interaction;
use crate::error::{Error, Result};
use crate::math::dot;
use crate::preprocess::pair_counts;

/// Sparse confidence matrix in both orientations.
struct Observations {
    /// `by_user[u] = [(item, confidence)]`
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
}

impl Observations {
    fn new(
        num_users: usize,
        num_items: usize,
        train: &[Interaction],
        alpha: f64,
    ) -> Result<Self> {
        let mut by_user = vec![Vec::new(); num_users];
        let mut by_item = vec![Vec::new(); num_items];
        for ((user, item), count) in pair_counts(train) {
            if user.index() >= num_users {
                return Err(Error::UnknownUser(user.0));
            }
            if item.index() >= num_items {
                return Err(Error::UnknownItem(item.0));
            }
            let c = 1.0 + alpha * count as f64;
            by_user[user.index()].push((item.index(), c));
            by_item[item.index()].push((user.index(), c));
        }
        Ok(Self { by_user, by_item })
    }
}

/// Trains WMF; `report.losses[s]` is the objective after sweep `s`.
pub fn train_wmf(
    num_users: usize,
    num_items: usize,
    train: &[Interaction],
    config: &TrainConfig,
) -> Result<(FactorModel, TrainReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("WMF needs at least one interaction".into()));
    }
    let obs = Observations::new(num_users, num_items, train, config.confidence_alpha)?;
    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut init = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| rng.gen_range(-config.init_scale..config.init_scale))
            .collect()
    };
    let mut users = init(num_users * d);
    let mut items = init(num_items * d);

    let mut report = TrainReport::default();
    for _ in 0..config.epochs {
        let (u, bad_u) = half_step(&items, &obs.by_user, d, config.regularization);
        users = u;
        let (i, bad_i) = half_step(&users, &obs.by_item, d, config.regularization);
        items = i;
        report.ill_conditioned_solves += bad_u + bad_i;
        report
            .losses
            .push(objective(&users, &items, &obs.by_user, d, config.regularization));
    }
    let model = FactorModel {
        dim: d,
        user_factors: users,
        item_factors: items,
        user_bias: vec![0.0; num_users],
        item_bias: vec![0.0; num_items],
        global_mean: 0.0,
    };
    Ok((model, report))
}

/// Re-solves every row of the "free" side given the fixed side.
fn half_step(
    fixed: &[f64],
    rows: &[Vec<(usize, f64)>],
    d: usize,
    reg: f64,
) -> (Vec<f64>, usize) {
    let base = gram(fixed, d);
    let solved = crate::par::map_indices(rows.len(), |r| {
        let mut a = base.clone();
        let mut b = vec![0.0; d];
        for &(j, c) in &rows[r] {
            let y = &fixed[j * d..(j + 1) * d];
            let extra = c - 1.0;
            for p in 0..d {
                b[p] += c * y[p];
                let yp = extra * y[p];
                for q in 0..d {
                    a[p * d + q] += yp * y[q];
                }
            }
        }
        for p in 0..d {
            a[p * d + p] += reg;
        }
        // reg > 0 keeps `a` positive definite
        let ratio = cholesky_solve(&mut a, &mut b, d).unwrap_or(f64::INFINITY);
        (b, ratio > ILL_CONDITIONED)
    });
    let mut out = Vec::with_capacity(rows.len() * d);
    let mut bad = 0;
    for (row, ill) in solved {
        out.extend_from_slice(&row);
        bad += usize::from(ill);
    }
    (out, bad)
}

fn objective(
    users: &[f64],
    items: &[f64],
    by_user: &[Vec<(usize, f64)>],
    d: usize,
    reg: f64,
) -> f64 {
    // sum over all pairs of (x.y)^2 = sum_u x_u^T (Y^T Y) x_u
    let g = gram(items, d);
    let mut total = 0.0;
    for (u, obs) in by_user.iter().enumerate() {
        let x = &users[u * d..(u + 1) * d];
        let mut quad = 0.0;
        for p in 0..d {
            quad += x[p] * dot(&g[p * d..(p + 1) * d], x);
        }
        total += quad;
        for &(i, c) in obs {
            let s = dot(x, &items[i * d..(i + 1) * d]);
            total += c * (1.0 - s) * (1.0 - s) - s * s;
        }
    }
    let norm: f64 = users.iter().chain(items).map(|v| v * v).sum();
    total + reg * norm
}

/// Objective of an already trained model on `train` (same weighting as
/// [`train_wmf`]).
pub fn wmf_objective(model: &FactorModel, train: &[Interaction], config: &TrainConfig) -> Result<f64> {
    let obs = Observations::new(
        model.num_users(),
        model.num_items(),
        train,
        config.confidence_alpha,
    )?;
    Ok(objective(
        &model.user_factors,
        &model.item_factors,
        &obs.by_user,
        model.dim,
        config.regularization,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ItemId, UserId};

    fn seen(u: u32, i: u32) -> Interaction {
        Interaction {
            user: UserId(u),
            item: ItemId(i),
            rating: None,
            timestamp: 0,
        }
    }

    fn small_config(dim: usize, epochs: usize) -> TrainConfig {
        TrainConfig {
            dim,
            epochs,
            regularization: 0.1,
            confidence_alpha: 10.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn objective_is_non_increasing() {
        let mut rows = Vec::new();
        for u in 0..12u32 {
            for i in 0..15u32 {
                if (u * 7 + i * 3) % 5 < 2 {
                    rows.push(seen(u, i));
                }
            }
        }
        let (_, report) = train_wmf(12, 15, &rows, &small_config(4, 10)).unwrap();
        assert_eq!(report.losses.len(), 10);
        for w in report.losses.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn seen_pair_beats_unseen_pair() {
        // two users, two items; user 0 saw item 0 only
        let rows = vec![seen(0, 0), seen(1, 1)];
        let (m, _) = train_wmf(2, 2, &rows, &small_config(2, 10)).unwrap();
        assert!(m.predict(UserId(0), ItemId(0)) > m.predict(UserId(0), ItemId(1)));
    }

    #[test]
    fn trained_objective_matches_final_loss() {
        let rows = vec![seen(0, 0), seen(1, 1), seen(1, 0)];
        let cfg = small_config(2, 3);
        let (m, report) = train_wmf(2, 2, &rows, &cfg).unwrap();
        let obj = wmf_objective(&m, &rows, &cfg).unwrap();
        assert!((obj - report.losses[2]).abs() < 1e-9);
    }
}
