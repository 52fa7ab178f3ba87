use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::objective::{check_dims, mix, pool_scales};
use super::{CategoryDistribution, CounterfactualProfile, Normalization, RerankConfig, Scale};
use crate::domain::{Attribute, Candidate, FractionTable, ItemId, RankedList, ScoreSet, UserId};
use crate::error::{Error, Result};
use crate::math::{ln, rank_weight};

/// Greedy maximisation of the surrogate objective for one user.
///
/// At each of `k` steps every remaining candidate `i` is scored on
/// `R ∪ {i}` with `i` at the next free rank:
///
/// ```text
/// (1 - beta) rel(R ∪ {i}) + beta sum_c o(c) ln sum_j j^{-gamma} r~(c|v_j)
/// ```
///
/// after normalising each term as configured, and the best is appended.
/// Ties go to the higher raw score, then to the lower item id. If fewer than
/// `k` candidates exist all of them are returned, ranked.
pub fn greedy_rerank(
    candidates: &[Candidate],
    target: &CategoryDistribution,
    fractions: &FractionTable,
    config: &RerankConfig,
) -> Result<Vec<ItemId>> {
    config.validate()?;
    check_dims(target, fractions)?;
    let pool = &candidates[..config.pool_len(candidates.len())];
    if pool.is_empty() {
        return Err(Error::Empty("no candidates to re-rank".into()));
    }
    for c in pool {
        fractions.check_item(c.item)?;
    }
    let global = match config.normalization {
        Normalization::Global => Some(pool_scales(pool, target, fractions, config)?),
        Normalization::Fixed {
            relevance,
            fairness,
        } => Some((relevance, fairness)),
        Normalization::None => Some((Scale::IDENTITY, Scale::IDENTITY)),
        Normalization::PerStep => None,
    };

    let o = target.as_slice();
    let alpha = config.alpha;
    let beta = config.beta;
    let k = config.k.min(pool.len());

    // acc[c] = sum over selected ranks j of j^{-gamma} r~(c|v_j)
    let mut acc = vec![0.0; o.len()];
    let mut base = vec![0.0; o.len()];
    let mut remaining: Vec<Candidate> = pool.to_vec();
    let mut fair = vec![0.0; remaining.len()];
    let mut selected = Vec::with_capacity(k);

    for step in 0..k {
        let w = rank_weight(step + 1, config.gamma);
        // Contribution of categories the candidate does not touch.
        let mut base_sum = 0.0;
        for c in 0..o.len() {
            base[c] = if o[c] > 0.0 {
                o[c] * ln(acc[c] + w * alpha * o[c])
            } else {
                0.0
            };
            base_sum += base[c];
        }
        let n = remaining.len();
        for (slot, cand) in fair[..n].iter_mut().zip(&remaining) {
            let row = fractions.row(cand.item);
            let mut f = base_sum;
            for c in fractions.members(cand.item) {
                let c = c.index();
                if o[c] > 0.0 {
                    let mixed = (1.0 - alpha) * row[c] + alpha * o[c];
                    f += o[c] * ln(acc[c] + w * mixed) - base[c];
                }
            }
            *slot = f;
        }

        let (rel_scale, fair_scale) = match global {
            Some(scales) => scales,
            None => {
                let (mut slo, mut shi) = (f64::INFINITY, f64::NEG_INFINITY);
                let (mut flo, mut fhi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (cand, &f) in remaining.iter().zip(&fair[..n]) {
                    slo = slo.min(cand.score);
                    shi = shi.max(cand.score);
                    flo = flo.min(f);
                    fhi = fhi.max(f);
                }
                (Scale::min_max(slo, shi), Scale::min_max(flo, fhi))
            }
        };

        let mut best = 0usize;
        let mut best_value = f64::NEG_INFINITY;
        for (idx, (cand, &f)) in remaining.iter().zip(&fair[..n]).enumerate() {
            let value = mix(beta, rel_scale.apply(cand.score), fair_scale.apply(f));
            let better = if idx == 0 {
                true
            } else if value != best_value {
                value > best_value
            } else {
                let incumbent = &remaining[best];
                match cand.score.total_cmp(&incumbent.score) {
                    core::cmp::Ordering::Greater => true,
                    core::cmp::Ordering::Less => false,
                    core::cmp::Ordering::Equal => cand.item < incumbent.item,
                }
            };
            if better {
                best = idx;
                best_value = value;
            }
        }

        let chosen = remaining.remove(best);
        let row = fractions.row(chosen.item);
        for c in 0..o.len() {
            acc[c] += w * ((1.0 - alpha) * row[c] + alpha * o[c]);
        }
        selected.push(chosen.item);
    }
    Ok(selected)
}

/// Re-ranks every user that has candidates, using the target of the user's
/// class under `attribute`. Users are processed independently (in parallel
/// with the `rayon` feature); output is ordered by user id.
pub fn rerank_all(
    scores: &ScoreSet,
    profile: &CounterfactualProfile,
    attribute: &Attribute,
    fractions: &FractionTable,
    config: &RerankConfig,
) -> Result<Vec<RankedList>> {
    config.validate()?;
    if attribute.name != profile.attribute {
        return Err(Error::Config(format!(
            "profile was built for `{}`, not `{}`",
            profile.attribute, attribute.name
        )));
    }
    let per_user = crate::par::map_indices(scores.num_users(), |u| -> Result<Option<RankedList>> {
        let user = UserId(u as u32);
        let candidates = scores.for_user(user);
        if candidates.is_empty() {
            return Ok(None);
        }
        let class = attribute.class_of(user)?;
        let target = profile.target(attribute.class_name(class))?;
        let items = greedy_rerank(candidates, target, fractions, config)?;
        Ok(Some(RankedList { user, items }))
    });
    let mut out = Vec::new();
    for r in per_user {
        if let Some(list) = r? {
            out.push(list);
        }
    }
    Ok(out)
}
