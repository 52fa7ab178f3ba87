//! Biased matrix factorisation trained by stochastic gradient descent on
//! observed ratings.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FactorModel, TrainConfig, TrainReport};
use crate::domain::Interaction;
use crate::error::{Error, Result};
use crate::math::dot;
use crate::preprocess::latest_per_pair;

/// Minimises `sum (r - mu - b_u - b_i - p_u.q_i)^2 + lambda (|b|^2 + |p|^2 + |q|^2)`
/// over the observed ratings with plain SGD. Repeated (user, item) pairs are
/// collapsed to their latest rating. Deterministic given `config.seed`.
pub fn train_biased_mf(
    num_users: usize,
    num_items: usize,
    train: &[Interaction],
    config: &TrainConfig,
) -> Result<(FactorModel, TrainReport)> {
    config.validate()?;
    let rows = latest_per_pair(train);
    if rows.is_empty() {
        return Err(Error::Empty("biased MF needs at least one rating".into()));
    }
    let mut ratings = Vec::with_capacity(rows.len());
    for x in &rows {
        if x.user.index() >= num_users {
            return Err(Error::UnknownUser(x.user.0));
        }
        if x.item.index() >= num_items {
            return Err(Error::UnknownItem(x.item.0));
        }
        let r = x.rating.ok_or_else(|| {
            Error::Invariant(format!(
                "interaction ({}, {}) has no rating",
                x.user, x.item
            ))
        })?;
        ratings.push((x.user.index(), x.item.index(), r));
    }
    let global_mean = ratings.iter().map(|r| r.2).sum::<f64>() / ratings.len() as f64;

    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut init = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| rng.gen_range(-config.init_scale..config.init_scale))
            .collect()
    };
    let mut model = FactorModel {
        dim: d,
        user_factors: init(num_users * d),
        item_factors: init(num_items * d),
        user_bias: alloc::vec![0.0; num_users],
        item_bias: alloc::vec![0.0; num_items],
        global_mean,
    };

    let lr = config.learning_rate;
    let reg = config.regularization;
    let mut order: Vec<usize> = (0..ratings.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let (u, i, r) = ratings[idx];
            let pu = &model.user_factors[u * d..(u + 1) * d];
            let qi = &model.item_factors[i * d..(i + 1) * d];
            let err = r - (global_mean + model.user_bias[u] + model.item_bias[i] + dot(pu, qi));
            model.user_bias[u] += lr * (err - reg * model.user_bias[u]);
            model.item_bias[i] += lr * (err - reg * model.item_bias[i]);
            for f in 0..d {
                let p = model.user_factors[u * d + f];
                let q = model.item_factors[i * d + f];
                model.user_factors[u * d + f] += lr * (err * q - reg * p);
                model.item_factors[i * d + f] += lr * (err * p - reg * q);
            }
        }
        let loss = regularized_loss(&model, &ratings, reg);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.losses.push(loss);
    }
    Ok((model, report))
}

fn regularized_loss(model: &FactorModel, ratings: &[(usize, usize, f64)], reg: f64) -> f64 {
    let d = model.dim;
    let sq: f64 = ratings
        .iter()
        .map(|&(u, i, r)| {
            let p = &model.user_factors[u * d..(u + 1) * d];
            let q = &model.item_factors[i * d..(i + 1) * d];
            let e = r - (model.global_mean + model.user_bias[u] + model.item_bias[i] + dot(p, q));
            e * e
        })
        .sum();
    let norm: f64 = model
        .user_factors
        .iter()
        .chain(&model.item_factors)
        .chain(&model.user_bias)
        .chain(&model.item_bias)
        .map(|v| v * v)
        .sum();
    sq + reg * norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ItemId, UserId};
    use alloc::vec;

    fn rated(u: u32, i: u32, r: f64) -> Interaction {
        Interaction {
            user: UserId(u),
            item: ItemId(i),
            rating: Some(r),
            timestamp: 0,
        }
    }

    fn two_by_two() -> Vec<Interaction> {
        vec![rated(0, 0, 5.0), rated(0, 1, 1.0), rated(1, 0, 1.0), rated(1, 1, 5.0)]
    }

    #[test]
    fn fits_a_two_by_two_matrix() {
        let cfg = TrainConfig {
            dim: 2,
            epochs: 200,
            learning_rate: 0.05,
            regularization: 0.001,
            init_scale: 0.5,
            ..TrainConfig::default()
        };
        let (model, _) = train_biased_mf(2, 2, &two_by_two(), &cfg).unwrap();
        let mse: f64 = two_by_two()
            .iter()
            .map(|x| (x.rating.unwrap() - model.predict(x.user, x.item)).powi(2))
            .sum::<f64>()
            / 4.0;
        assert!(mse.sqrt() < 0.5, "rmse = {}", mse.sqrt());
    }

    #[test]
    fn heavy_regularisation_collapses_to_global_mean() {
        let cfg = TrainConfig {
            dim: 2,
            epochs: 200,
            learning_rate: 0.01,
            regularization: 50.0,
            ..TrainConfig::default()
        };
        let (model, _) = train_biased_mf(2, 2, &two_by_two(), &cfg).unwrap();
        assert!(model.user_factors.iter().all(|v| v.abs() < 1e-6));
        assert!(model.item_factors.iter().all(|v| v.abs() < 1e-6));
        for x in two_by_two() {
            let base = model.global_mean
                + model.user_bias[x.user.index()]
                + model.item_bias[x.item.index()];
            assert!((model.predict(x.user, x.item) - base).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = TrainConfig {
            dim: 3,
            epochs: 5,
            ..TrainConfig::default()
        };
        let a = train_biased_mf(2, 2, &two_by_two(), &cfg).unwrap();
        let b = train_biased_mf(2, 2, &two_by_two(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig {
            dim: 2,
            epochs: 200,
            learning_rate: 10.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_biased_mf(2, 2, &two_by_two(), &cfg),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn missing_rating_is_rejected() {
        let mut rows = two_by_two();
        rows[0].rating = None;
        assert!(train_biased_mf(2, 2, &rows, &TrainConfig::default()).is_err());
    }
}
