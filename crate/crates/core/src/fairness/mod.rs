//! Counterfactual category proportions, the KL disparity, the surrogate
//! submodular objective and the greedy fair re-ranker.
//!
//! The re-ranker steers each user's top-k list toward the category
//! distribution of users who do *not* share the user's sensitive attribute
//! value (the counterfactual target `o(.|s_u)`), trading relevance against
//! the log-sum fairness reward with weight `beta`.

mod distribution;
mod exhaustive;
mod objective;
mod profile;
mod rerank;

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use distribution::{
    history_distribution, kl_divergence, recommended_category_proportion, TimestampWeighting,
};
pub use exhaustive::{exhaustive_rerank, feasible_ranges, ExhaustiveOutcome, DEFAULT_BUDGET};
pub use objective::{fairness_term, objective_terms, objective_value, ObjectiveTerms};
pub use profile::{build_counterfactual_profile, CounterfactualProfile, DEFAULT_SMOOTHING};
pub use rerank::{greedy_rerank, rerank_all};

/// A (possibly unnormalised) distribution over the category list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryDistribution(pub Vec<f64>);

impl CategoryDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Non-negative and summing to one within `1e-9`.
    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0) && (self.sum() - 1.0).abs() <= 1e-9
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }

    /// Adds `epsilon` to every entry and renormalises.
    pub fn smoothed(&self, epsilon: f64) -> Self {
        let total = self.sum() + epsilon * self.0.len() as f64;
        Self(self.0.iter().map(|v| (v + epsilon) / total).collect())
    }
}

/// Linear rescaling `(x - offset) / span` applied to one objective term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub offset: f64,
    pub span: f64,
}

impl Scale {
    pub const IDENTITY: Scale = Scale {
        offset: 0.0,
        span: 1.0,
    };

    /// Min-max scale for the range `[lo, hi]`; a degenerate range maps
    /// everything to 0.5.
    pub fn min_max(lo: f64, hi: f64) -> Self {
        let span = hi - lo;
        if span > 0.0 {
            Scale { offset: lo, span }
        } else {
            Scale {
                offset: lo - 0.5,
                span: 1.0,
            }
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.offset) / self.span
    }
}

/// How the relevance and fairness terms are put on a common scale before
/// mixing with `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Normalization {
    /// Min-max over the remaining candidates at every greedy step.
    #[default]
    PerStep,
    /// Min-max once over the candidate pool (scores, and the fairness term
    /// of each candidate on its own).
    Global,
    /// Raw terms.
    None,
    /// Fixed affine maps, e.g. ranges measured over every feasible list.
    Fixed { relevance: Scale, fairness: Scale },
}

/// Parameters of the fair re-ranker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankConfig {
    /// Relevance/fairness trade-off, `[0, 1]`.
    pub beta: f64,
    /// Rank-discount exponent, `[0, 1]`.
    pub gamma: f64,
    /// Mixing weight of the target in the smoothed proportion, `(0, 1)`.
    pub alpha: f64,
    /// Final list length.
    pub k: usize,
    /// Candidate pool size; `None` uses every candidate.
    pub top_n: Option<usize>,
    pub normalization: Normalization,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            gamma: 0.1,
            alpha: 0.01,
            k: 20,
            top_n: None,
            normalization: Normalization::PerStep,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if let Some(n) = self.top_n {
            if n < self.k {
                return Err(Error::Config(format!("top-N ({n}) must be at least k ({})", self.k)));
            }
        }
        if let Normalization::Fixed { relevance, fairness } = self.normalization {
            if !(relevance.span > 0.0 && fairness.span > 0.0) {
                return Err(Error::Config("fixed normalization spans must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn pool_len(&self, available: usize) -> usize {
        self.top_n.map_or(available, |n| n.min(available))
    }
}
