use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::CategoryDistribution;
use crate::domain::{FractionTable, Interaction, ItemId};
use crate::error::{Error, Result};
use crate::math::{ln, rank_weight};

/// How interaction timestamps become weights in a user's history
/// distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum TimestampWeighting {
    /// The raw timestamp is the weight.
    #[default]
    Raw,
    /// Each user's timestamps rescaled linearly onto `[floor, 1]`, oldest
    /// to newest. A user whose events share one timestamp gets weight 1.
    MinMaxRecency { floor: f64 },
}

impl TimestampWeighting {
    fn weights(&self, history: &[Interaction]) -> Vec<f64> {
        match *self {
            TimestampWeighting::Raw => history.iter().map(|x| x.timestamp as f64).collect(),
            TimestampWeighting::MinMaxRecency { floor } => {
                let lo = history.iter().map(|x| x.timestamp).min().unwrap_or(0);
                let hi = history.iter().map(|x| x.timestamp).max().unwrap_or(0);
                if hi == lo {
                    return vec![1.0; history.len()];
                }
                let span = (hi - lo) as f64;
                history
                    .iter()
                    .map(|x| floor + (1.0 - floor) * (x.timestamp - lo) as f64 / span)
                    .collect()
            }
        }
    }
}

/// `m(c|u)`: timestamp-weighted mean of the category fractions of the
/// items in a user's history. The second value is `true` when all weights
/// were zero and uniform weights were used instead.
pub fn history_distribution(
    history: &[Interaction],
    fractions: &FractionTable,
    weighting: TimestampWeighting,
) -> Result<(CategoryDistribution, bool)> {
    if history.is_empty() {
        return Err(Error::Empty("user has no training interactions".into()));
    }
    let mut weights = weighting.weights(history);
    let mut total: f64 = weights.iter().sum();
    let fallback = !(total > 0.0);
    if fallback {
        weights.iter_mut().for_each(|w| *w = 1.0);
        total = weights.len() as f64;
    }
    let mut out = vec![0.0; fractions.num_categories()];
    for (x, w) in history.iter().zip(&weights) {
        fractions.check_item(x.item)?;
        let share = w / fractions.members(x.item).len() as f64;
        for c in fractions.members(x.item) {
            out[c.index()] += share;
        }
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok((CategoryDistribution(out), fallback))
}

/// `r(c|u,I)`: rank-discounted category proportion of an ordered list,
/// with rank `j` (1-based) weighted by `j^{-gamma}`.
pub fn recommended_category_proportion(
    items: &[ItemId],
    fractions: &FractionTable,
    gamma: f64,
) -> Result<CategoryDistribution> {
    if items.is_empty() {
        return Err(Error::Empty("recommendation list is empty".into()));
    }
    let mut out = vec![0.0; fractions.num_categories()];
    let mut total = 0.0;
    for (j, &item) in items.iter().enumerate() {
        fractions.check_item(item)?;
        let w = rank_weight(j + 1, gamma);
        total += w;
        for (o, f) in out.iter_mut().zip(fractions.row(item)) {
            *o += w * f;
        }
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok(CategoryDistribution(out))
}

/// `KL(o || r~)` with `r~ = (1 - alpha) r + alpha o`, natural log.
/// Categories with `o(c) = 0` contribute nothing.
pub fn kl_divergence(
    target: &CategoryDistribution,
    recommended: &CategoryDistribution,
    alpha: f64,
) -> Result<f64> {
    if target.len() != recommended.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: recommended.len(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(alloc::format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut kl = 0.0;
    for (&o, &r) in target.0.iter().zip(&recommended.0) {
        if o > 0.0 {
            let mixed = (1.0 - alpha) * r + alpha * o;
            kl += o * ln(o / mixed);
        }
    }
    // Rounding can leave identical inputs a few ulps below zero.
    Ok(kl.max(0.0))
}
