//! Brute-force maximiser of the surrogate objective over every k-subset of
//! the candidate pool. Only practical for tiny pools; used to check the
//! greedy re-ranker.

use alloc::vec::Vec;

use super::objective::{items_at, mix, pool_scales};
use super::{fairness_term, CategoryDistribution, Normalization, RerankConfig, Scale};
use crate::domain::{Candidate, FractionTable, ItemId};
use crate::error::{Error, Result};

/// Default cap on the number of subsets evaluated.
pub const DEFAULT_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOutcome {
    /// The maximising subset, ordered by descending score.
    pub items: Vec<ItemId>,
    pub value: f64,
    pub evaluated: u128,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `visit` with every k-combination of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    if k > n {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx)?;
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return Ok(());
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn prepare<'a>(
    candidates: &'a [Candidate],
    config: &RerankConfig,
    budget: u128,
) -> Result<(&'a [Candidate], usize)> {
    config.validate()?;
    let pool = &candidates[..config.pool_len(candidates.len())];
    if pool.is_empty() {
        return Err(Error::Empty("no candidates to re-rank".into()));
    }
    let k = config.k.min(pool.len());
    let required = binomial(pool.len(), k);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok((pool, k))
}

/// Raw relevance and fairness of a subset given as pool positions; the
/// subset is ranked in pool (descending score) order.
fn subset_terms(
    pool: &[Candidate],
    positions: &[usize],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    config: &RerankConfig,
) -> Result<(f64, f64)> {
    let rel = positions.iter().map(|&p| pool[p].score).sum();
    let fair = fairness_term(
        &items_at(pool, positions),
        target,
        fractions,
        config.gamma,
        config.alpha,
    )?;
    Ok((rel, fair))
}

/// Range `(min, max)` of the relevance and of the fairness term over every
/// feasible list (each k-subset ranked by descending score), returned as
/// min-max [`Scale`]s. Plugging them into [`Normalization::Fixed`] maps the
/// objective of every feasible list onto `[0, 1]`.
pub fn feasible_ranges(
    candidates: &[Candidate],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    config: &RerankConfig,
    budget: u128,
) -> Result<(Scale, Scale)> {
    let (pool, k) = prepare(candidates, config, budget)?;
    let (mut rlo, mut rhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut flo, mut fhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for_each_combination(pool.len(), k, |pos| {
        let (r, f) = subset_terms(pool, pos, target, fractions, config)?;
        rlo = rlo.min(r);
        rhi = rhi.max(r);
        flo = flo.min(f);
        fhi = fhi.max(f);
        Ok(())
    })?;
    Ok((Scale::min_max(rlo, rhi), Scale::min_max(flo, fhi)))
}

/// Evaluates every k-subset of the pool (ranked by descending score) and
/// returns the maximiser of the configured objective. The first maximiser
/// in lexicographic order of pool positions wins ties.
pub fn exhaustive_rerank(
    candidates: &[Candidate],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    config: &RerankConfig,
    budget: u128,
) -> Result<ExhaustiveOutcome> {
    let (pool, k) = prepare(candidates, config, budget)?;
    let (rel_scale, fair_scale, per_item_offset) = match config.normalization {
        Normalization::None => (Scale::IDENTITY, Scale::IDENTITY, false),
        Normalization::Fixed {
            relevance,
            fairness,
        } => (relevance, fairness, false),
        Normalization::Global | Normalization::PerStep => {
            let (r, f) = pool_scales(pool, target, fractions, config)?;
            (r, f, true)
        }
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut evaluated = 0u128;
    for_each_combination(pool.len(), k, |pos| {
        evaluated += 1;
        let (r, f) = subset_terms(pool, pos, target, fractions, config)?;
        let rel = if per_item_offset {
            (r - pos.len() as f64 * rel_scale.offset) / rel_scale.span
        } else {
            rel_scale.apply(r)
        };
        let value = mix(config.beta, rel, fair_scale.apply(f));
        if best.as_ref().map_or(true, |(_, v)| value > *v) {
            best = Some((pos.to_vec(), value));
        }
        Ok(())
    })?;
    let (pos, value) = best.ok_or_else(|| Error::Empty("no feasible subset".into()))?;
    Ok(ExhaustiveOutcome {
        items: items_at(pool, &pos),
        value,
        evaluated,
    })
}
