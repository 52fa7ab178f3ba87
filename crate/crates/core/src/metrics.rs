//! Category bias metrics (CC, CDCG and their pairwise group aggregation)
//! and the accuracy metrics NDCG@k and HitRatio@k.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Attribute, CategoryId, FractionTable, ItemId, RankedList, UserId};
use crate::error::{Error, Result};
use crate::math::log2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasMetric {
    /// Mean category proportion of the lists, rank ignored.
    Cc,
    /// Same, with rank `j` discounted by `1 / log2(j + 1)`.
    Cdcg,
}

fn list_lookup(lists: &[RankedList]) -> BTreeMap<UserId, &[ItemId]> {
    lists.iter().map(|l| (l.user, l.items.as_slice())).collect()
}

/// `(1/|TopK_u|) sum_j C_{v_j,c}/|C_{v_j}| * disc(j)` for every category.
fn user_contribution(metric: BiasMetric, items: &[ItemId], fractions: &FractionTable, out: &mut [f64]) {
    let inv_len = 1.0 / items.len() as f64;
    for (j, &item) in items.iter().enumerate() {
        let disc = match metric {
            BiasMetric::Cc => 1.0,
            BiasMetric::Cdcg => 1.0 / log2(j as f64 + 2.0),
        };
        let share = inv_len * disc / fractions.members(item).len() as f64;
        for c in fractions.members(item) {
            out[c.index()] += share;
        }
    }
}

/// Metric value of every category for one group of users.
pub fn group_values(
    metric: BiasMetric,
    users: &[UserId],
    lists: &[RankedList],
    fractions: &FractionTable,
) -> Result<Vec<f64>> {
    group_values_with(metric, users, &list_lookup(lists), fractions)
}

fn group_values_with(
    metric: BiasMetric,
    users: &[UserId],
    lookup: &BTreeMap<UserId, &[ItemId]>,
    fractions: &FractionTable,
) -> Result<Vec<f64>> {
    if users.is_empty() {
        return Err(Error::Empty("group has no users".into()));
    }
    let mut out = vec![0.0; fractions.num_categories()];
    for u in users {
        let items = lookup
            .get(u)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::Invariant(format!("user {u} has no top-k list")))?;
        for &item in items.iter() {
            fractions.check_item(item)?;
        }
        user_contribution(metric, items, fractions, &mut out);
    }
    let n = users.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

fn category_value(
    metric: BiasMetric,
    category: CategoryId,
    users: &[UserId],
    lists: &[RankedList],
    fractions: &FractionTable,
) -> Result<f64> {
    let values = group_values(metric, users, lists, fractions)?;
    values
        .get(category.index())
        .copied()
        .ok_or(Error::UnknownCategory(category.0))
}

/// `CC(c, U_g)`
pub fn cc(
    category: CategoryId,
    users: &[UserId],
    lists: &[RankedList],
    fractions: &FractionTable,
) -> Result<f64> {
    category_value(BiasMetric::Cc, category, users, lists, fractions)
}

/// `CDCG(c, U_g)` with base-2 logarithm.
pub fn cdcg(
    category: CategoryId,
    users: &[UserId],
    lists: &[RankedList],
    fractions: &FractionTable,
) -> Result<f64> {
    category_value(BiasMetric::Cdcg, category, users, lists, fractions)
}

/// Groups of one attribute restricted to users that have a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseBias {
    pub metric: BiasMetric,
    /// Classes that had at least one evaluated user, in class order.
    pub classes: Vec<String>,
    /// `values[g][c]` for class `classes[g]`.
    pub values: Vec<Vec<f64>>,
    /// `sum over unordered class pairs |M(c,g1) - M(c,g2)|`, per category.
    pub per_category: Vec<f64>,
    pub total: f64,
    /// Declared classes without any evaluated user.
    pub excluded_classes: Vec<String>,
}

fn evaluated_groups(
    attribute: &Attribute,
    lookup: &BTreeMap<UserId, &[ItemId]>,
) -> Result<(Vec<(String, Vec<UserId>)>, Vec<String>)> {
    let mut groups = vec![Vec::new(); attribute.classes.len()];
    for (&u, items) in lookup {
        if items.is_empty() {
            continue;
        }
        groups[attribute.class_of(u)? as usize].push(u);
    }
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (class, users) in attribute.classes.iter().zip(groups) {
        if users.is_empty() {
            excluded.push(class.clone());
        } else {
            kept.push((class.clone(), users));
        }
    }
    if kept.len() < 2 {
        return Err(Error::Invariant(format!(
            "attribute `{}` has fewer than two evaluated classes",
            attribute.name
        )));
    }
    Ok((kept, excluded))
}

fn pairwise_from_values(values: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut per_category = vec![0.0; width];
    for a in 0..values.len() {
        for b in (a + 1)..values.len() {
            for (c, slot) in per_category.iter_mut().enumerate() {
                *slot += (values[a][c] - values[b][c]).abs();
            }
        }
    }
    per_category
}

/// Sum over categories of the pairwise absolute differences between every
/// pair of attribute classes. Users without a list are ignored; classes left
/// without users are excluded and reported.
pub fn pairwise_bias(
    metric: BiasMetric,
    attribute: &Attribute,
    lists: &[RankedList],
    fractions: &FractionTable,
) -> Result<PairwiseBias> {
    let lookup = list_lookup(lists);
    let (groups, excluded_classes) = evaluated_groups(attribute, &lookup)?;
    let values = groups
        .iter()
        .map(|(_, users)| group_values_with(metric, users, &lookup, fractions))
        .collect::<Result<Vec<_>>>()?;
    let per_category = pairwise_from_values(&values, fractions.num_categories());
    Ok(PairwiseBias {
        metric,
        classes: groups.into_iter().map(|(c, _)| c).collect(),
        values,
        total: per_category.iter().sum(),
        per_category,
        excluded_classes,
    })
}

/// CC and CDCG bias of one attribute, with per-group breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub attribute: String,
    pub categories: Vec<String>,
    /// Evaluated users per reported class.
    pub group_sizes: BTreeMap<String, usize>,
    pub cc: PairwiseBias,
    pub cdcg: PairwiseBias,
}

impl BiasReport {
    pub fn cc_total(&self) -> f64 {
        self.cc.total
    }

    pub fn cdcg_total(&self) -> f64 {
        self.cdcg.total
    }
}

pub fn bias_report(
    attribute: &Attribute,
    lists: &[RankedList],
    fractions: &FractionTable,
    categories: &[String],
) -> Result<BiasReport> {
    if categories.len() != fractions.num_categories() {
        return Err(Error::DimensionMismatch {
            expected: fractions.num_categories(),
            actual: categories.len(),
        });
    }
    let lookup = list_lookup(lists);
    let (groups, _) = evaluated_groups(attribute, &lookup)?;
    Ok(BiasReport {
        attribute: attribute.name.to_string(),
        categories: categories.to_vec(),
        group_sizes: groups.iter().map(|(c, u)| (c.clone(), u.len())).collect(),
        cc: pairwise_bias(BiasMetric::Cc, attribute, lists, fractions)?,
        cdcg: pairwise_bias(BiasMetric::Cdcg, attribute, lists, fractions)?,
    })
}

/// Accuracy of one user's list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserAccuracy {
    pub user: UserId,
    pub ndcg: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub k: usize,
    pub ndcg: f64,
    pub hit_ratio: f64,
    /// Users with a non-empty test set, ascending.
    pub per_user: Vec<UserAccuracy>,
}

/// Binary-relevance NDCG@k and hit indicator for one list. `test` sorted.
fn user_accuracy(items: &[ItemId], test: &[ItemId], k: usize) -> (f64, bool) {
    let mut dcg = 0.0;
    let mut hit = false;
    for (j, item) in items.iter().take(k).enumerate() {
        if test.binary_search(item).is_ok() {
            dcg += 1.0 / log2(j as f64 + 2.0);
            hit = true;
        }
    }
    let ideal: f64 = (0..k.min(test.len()))
        .map(|j| 1.0 / log2(j as f64 + 2.0))
        .sum();
    (dcg / ideal, hit)
}

/// NDCG@k and HitRatio@k over users with a non-empty test set
/// (`test_sets[u]`, sorted). A user without a list scores zero.
pub fn accuracy_report(lists: &[RankedList], test_sets: &[Vec<ItemId>], k: usize) -> AccuracyReport {
    let lookup = list_lookup(lists);
    let per_user: Vec<UserAccuracy> = test_sets
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_empty())
        .map(|(u, test)| {
            let user = UserId(u as u32);
            let items = lookup.get(&user).copied().unwrap_or(&[]);
            let (ndcg, hit) = user_accuracy(items, test, k);
            UserAccuracy { user, ndcg, hit }
        })
        .collect();
    let n = per_user.len() as f64;
    let (ndcg, hit_ratio) = if per_user.is_empty() {
        (0.0, 0.0)
    } else {
        (
            per_user.iter().map(|a| a.ndcg).sum::<f64>() / n,
            per_user.iter().filter(|a| a.hit).count() as f64 / n,
        )
    };
    AccuracyReport {
        k,
        ndcg,
        hit_ratio,
        per_user,
    }
}

pub fn ndcg_at_k(lists: &[RankedList], test_sets: &[Vec<ItemId>], k: usize) -> f64 {
    accuracy_report(lists, test_sets, k).ndcg
}

pub fn hit_ratio_at_k(lists: &[RankedList], test_sets: &[Vec<ItemId>], k: usize) -> f64 {
    accuracy_report(lists, test_sets, k).hit_ratio
}
