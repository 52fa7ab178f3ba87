use alloc::vec;
use alloc::vec::Vec;

use super::{CategoryDistribution, Normalization, RerankConfig, Scale};
use crate::domain::{Candidate, FractionTable, ItemId};
use crate::error::{Error, Result};
use crate::math::{ln, rank_weight};

/// The two raw components of the surrogate objective for one ordered list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// Sum of the candidates' scores.
    pub relevance: f64,
    /// `sum_c o(c) ln sum_j j^{-gamma} r~(c|v_j)`.
    pub fairness: f64,
}

pub(crate) fn check_dims(target: &CategoryDistribution, fractions: &FractionTable) -> Result<()> {
    if target.len() != fractions.num_categories() {
        return Err(Error::DimensionMismatch {
            expected: fractions.num_categories(),
            actual: target.len(),
        });
    }
    Ok(())
}

/// Fairness reward of an ordered list; `-inf` for the empty list.
///
/// `r~(c|v) = (1 - alpha) C_{v,c}/|C_v| + alpha o(c)`; categories with a
/// zero target weight contribute nothing.
pub fn fairness_term(
    items: &[ItemId],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    gamma: f64,
    alpha: f64,
) -> Result<f64> {
    check_dims(target, fractions)?;
    if items.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let mut acc = vec![0.0; target.len()];
    for (j, &item) in items.iter().enumerate() {
        fractions.check_item(item)?;
        let w = rank_weight(j + 1, gamma);
        for ((a, f), o) in acc.iter_mut().zip(fractions.row(item)).zip(&target.0) {
            *a += w * ((1.0 - alpha) * f + alpha * o);
        }
    }
    Ok(target
        .0
        .iter()
        .zip(&acc)
        .filter(|(o, _)| **o > 0.0)
        .map(|(o, a)| o * ln(*a))
        .sum())
}

/// Relevance and fairness of `items` (in list order). Every item must be
/// among `candidates`.
pub fn objective_terms(
    items: &[ItemId],
    candidates: &[Candidate],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    config: &RerankConfig,
) -> Result<ObjectiveTerms> {
    let mut relevance = 0.0;
    for item in items {
        let c = candidates
            .iter()
            .find(|c| c.item == *item)
            .ok_or(Error::UnknownItem(item.0))?;
        relevance += c.score;
    }
    let fairness = fairness_term(items, target, fractions, config.gamma, config.alpha)?;
    Ok(ObjectiveTerms {
        relevance,
        fairness,
    })
}

/// Per-item relevance scale and fairness scale measured once over the
/// candidate pool (each candidate evaluated alone at rank 1).
pub(crate) fn pool_scales(
    pool: &[Candidate],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    config: &RerankConfig,
) -> Result<(Scale, Scale)> {
    let (mut slo, mut shi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut flo, mut fhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in pool {
        slo = slo.min(c.score);
        shi = shi.max(c.score);
        let f = fairness_term(&[c.item], target, fractions, config.gamma, config.alpha)?;
        flo = flo.min(f);
        fhi = fhi.max(f);
    }
    Ok((Scale::min_max(slo, shi), Scale::min_max(flo, fhi)))
}

/// The mixed objective `(1 - beta) rel + beta fair` of an ordered list after
/// the configured normalization.
///
/// Whole-list values under `PerStep` use the pool-wide scales of `Global`,
/// since a per-step pool only exists inside the greedy loop.
pub fn objective_value(
    items: &[ItemId],
    candidates: &[Candidate],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    config: &RerankConfig,
) -> Result<f64> {
    let t = objective_terms(items, candidates, target, fractions, config)?;
    let beta = config.beta;
    let (rel, fair) = match config.normalization {
        Normalization::None => (t.relevance, t.fairness),
        Normalization::Fixed {
            relevance,
            fairness,
        } => (relevance.apply(t.relevance), fairness.apply(t.fairness)),
        Normalization::Global | Normalization::PerStep => {
            let pool = &candidates[..config.pool_len(candidates.len())];
            let (rs, fs) = pool_scales(pool, target, fractions, config)?;
            let m = items.len() as f64;
            ((t.relevance - m * rs.offset) / rs.span, fs.apply(t.fairness))
        }
    };
    Ok(mix(beta, rel, fair))
}

/// `(1 - beta) rel + beta fair`, with a disabled term dropped entirely so an
/// infinite value on that side cannot leak in.
#[inline]
pub(crate) fn mix(beta: f64, rel: f64, fair: f64) -> f64 {
    if beta == 0.0 {
        rel
    } else if beta == 1.0 {
        fair
    } else {
        (1.0 - beta) * rel + beta * fair
    }
}

/// Helper for tests and the exhaustive search: item ids of pool positions.
pub(crate) fn items_at(pool: &[Candidate], positions: &[usize]) -> Vec<ItemId> {
    positions.iter().map(|&p| pool[p].item).collect()
}
