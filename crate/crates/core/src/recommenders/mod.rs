//! Baseline recommenders that produce the candidate pools for re-ranking:
//! biased matrix factorisation (explicit ratings, SGD) and weighted matrix
//! factorisation (implicit feedback, ALS), plus top-N candidate extraction.

mod linalg;
mod mf;
mod wmf;

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{candidate_order, Candidate, ItemId, ScoreSet, UserId};
use crate::error::{Error, Result};
use crate::math::dot;

pub use mf::train_biased_mf;
pub use wmf::{train_wmf, wmf_objective};

/// Latent-factor model. `user_factors` and `item_factors` are row-major
/// `n x dim` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub dim: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub global_mean: f64,
}

impl FactorModel {
    pub fn num_users(&self) -> usize {
        self.user_bias.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_bias.len()
    }

    pub fn user_vector(&self, user: UserId) -> &[f64] {
        let s = user.index() * self.dim;
        &self.user_factors[s..s + self.dim]
    }

    pub fn item_vector(&self, item: ItemId) -> &[f64] {
        let s = item.index() * self.dim;
        &self.item_factors[s..s + self.dim]
    }

    /// `mu + b_u + b_i + p_u . q_i`
    pub fn predict(&self, user: UserId, item: ItemId) -> f64 {
        self.global_mean
            + self.user_bias[user.index()]
            + self.item_bias[item.index()]
            + dot(self.user_vector(user), self.item_vector(item))
    }

    pub fn is_finite(&self) -> bool {
        self.user_factors
            .iter()
            .chain(&self.item_factors)
            .chain(&self.user_bias)
            .chain(&self.item_bias)
            .all(|v| v.is_finite())
            && self.global_mean.is_finite()
    }
}

/// Hyper-parameters shared by both trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    /// SGD epochs for MF, ALS sweeps for WMF.
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// WMF confidence slope: `c = 1 + alpha * count`.
    pub confidence_alpha: f64,
    /// Half-width scale of the uniform factor initialisation.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            epochs: 50,
            learning_rate: 0.005,
            regularization: 0.05,
            confidence_alpha: 40.0,
            init_scale: 0.1,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("regularization", self.regularization),
            ("confidence_alpha", self.confidence_alpha),
            ("init_scale", self.init_scale),
        ];
        if self.dim == 0 || self.epochs == 0 {
            return Err(Error::Config("dim and epochs must be at least 1".into()));
        }
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// What a training run produced besides the model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Objective after each epoch / sweep.
    pub losses: Vec<f64>,
    /// Row solves whose pivot ratio exceeded [`ILL_CONDITIONED`].
    pub ill_conditioned_solves: usize,
}

/// Pivot ratio above which an ALS normal-equation solve is reported.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Scores every item not in `exclude` (sorted ascending) for `user`,
/// returned in canonical candidate order.
pub fn score_candidates(model: &FactorModel, user: UserId, exclude: &[ItemId]) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = (0..model.num_items() as u32)
        .map(ItemId)
        .filter(|i| exclude.binary_search(i).is_err())
        .map(|item| Candidate {
            item,
            score: model.predict(user, item),
        })
        .collect();
    out.sort_by(candidate_order);
    out
}

/// `TopN_u` for every user: scores of unseen items truncated to the best
/// `n`. `train_items[u]` must be sorted. Users who have seen every item get
/// an empty list.
pub fn top_n_candidates(
    model: &FactorModel,
    train_items: &[Vec<ItemId>],
    n: usize,
    k: usize,
) -> Result<ScoreSet> {
    if n < k {
        return Err(Error::Config(format!("top-N ({n}) must be at least k ({k})")));
    }
    if train_items.len() != model.num_users() {
        return Err(Error::DimensionMismatch {
            expected: model.num_users(),
            actual: train_items.len(),
        });
    }
    let lists = crate::par::map_indices(model.num_users(), |u| {
        let mut c = score_candidates(model, UserId(u as u32), &train_items[u]);
        c.truncate(n);
        c
    });
    ScoreSet::new(lists)
}

/// Turns externally produced `(user, item, score)` rows into a [`ScoreSet`]:
/// drops training items, orders canonically and truncates to `n`.
pub fn candidates_from_scores(
    rows: &[(UserId, ItemId, f64)],
    train_items: &[Vec<ItemId>],
    n: usize,
) -> Result<ScoreSet> {
    let mut lists: Vec<Vec<Candidate>> = alloc::vec![Vec::new(); train_items.len()];
    for &(user, item, score) in rows {
        if !score.is_finite() {
            return Err(Error::Invariant(format!(
                "non-finite score for user {user}, item {item}"
            )));
        }
        let seen = train_items
            .get(user.index())
            .ok_or(Error::UnknownUser(user.0))?;
        if seen.binary_search(&item).is_ok() {
            continue;
        }
        lists[user.index()].push(Candidate { item, score });
    }
    for list in &mut lists {
        list.sort_by(candidate_order);
        if let Some(w) = list.windows(2).find(|w| w[0].item == w[1].item) {
            return Err(Error::Invariant(format!("duplicate score for item {}", w[0].item)));
        }
        list.truncate(n);
    }
    ScoreSet::new(lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn model() -> FactorModel {
        FactorModel {
            dim: 1,
            user_factors: vec![1.0],
            item_factors: vec![0.5, 0.5, 0.9, 0.1],
            user_bias: vec![0.0],
            item_bias: vec![0.0; 4],
            global_mean: 0.0,
        }
    }

    #[test]
    fn equal_scores_order_by_item_id() {
        let c = score_candidates(&model(), UserId(0), &[]);
        let items: Vec<u32> = c.iter().map(|c| c.item.0).collect();
        assert_eq!(items, vec![2, 0, 1, 3]);
    }

    #[test]
    fn training_items_are_excluded() {
        let s = top_n_candidates(&model(), &[vec![ItemId(2)]], 4, 2).unwrap();
        let items: Vec<u32> = s.for_user(UserId(0)).iter().map(|c| c.item.0).collect();
        assert_eq!(items, vec![0, 1, 3]);
    }

    #[test]
    fn full_n_returns_every_unseen_item() {
        let s = top_n_candidates(&model(), &[vec![]], 4, 1).unwrap();
        assert_eq!(s.for_user(UserId(0)).len(), 4);
    }

    #[test]
    fn user_who_saw_everything_gets_no_candidates() {
        let all = vec![ItemId(0), ItemId(1), ItemId(2), ItemId(3)];
        let s = top_n_candidates(&model(), &[all], 4, 1).unwrap();
        assert!(s.for_user(UserId(0)).is_empty());
        assert!(s.top_k(1).is_empty());
    }

    #[test]
    fn n_below_k_is_config_error() {
        assert!(matches!(
            top_n_candidates(&model(), &[vec![]], 2, 3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn external_rows_are_filtered_and_truncated() {
        let rows = [
            (UserId(0), ItemId(0), 0.1),
            (UserId(0), ItemId(1), 0.9),
            (UserId(0), ItemId(2), 0.5),
        ];
        let s = candidates_from_scores(&rows, &[vec![ItemId(1)]], 3).unwrap();
        let items: Vec<u32> = s.for_user(UserId(0)).iter().map(|c| c.item.0).collect();
        assert_eq!(items, vec![2, 0]);
        let bad = [(UserId(0), ItemId(0), f64::NAN)];
        assert!(candidates_from_scores(&bad, &[vec![]], 3).is_err());
    }
}
