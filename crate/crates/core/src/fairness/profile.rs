use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{history_distribution, CategoryDistribution, TimestampWeighting};
use crate::domain::{FractionTable, Interaction, UserAttributes, UserId};
use crate::error::{Error, Result};

/// Constant added to every target entry before renormalising.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// The counterfactual targets `o(.|s)` of one attribute, keyed by class name.
///
/// `o(.|s)` is the mean history distribution of the users whose class is
/// *not* `s`, smoothed to be strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualProfile {
    pub attribute: String,
    pub categories: Vec<String>,
    pub weighting: TimestampWeighting,
    pub smoothing: f64,
    pub targets: BTreeMap<String, CategoryDistribution>,
    /// Users whose history weights were all zero (uniform fallback used).
    #[serde(default)]
    pub uniform_fallback_users: Vec<UserId>,
}

impl CounterfactualProfile {
    pub fn target(&self, class: &str) -> Result<&CategoryDistribution> {
        self.targets.get(class).ok_or_else(|| {
            Error::Invariant(format!(
                "profile for `{}` has no target for class `{class}`",
                self.attribute
            ))
        })
    }
}

/// Builds `o(.|s)` for every class of `attribute` present among users with
/// a non-empty history. `histories[u]` must hold user `u`'s *training*
/// interactions only.
pub fn build_counterfactual_profile(
    histories: &[Vec<Interaction>],
    attributes: &UserAttributes,
    attribute: &str,
    categories: &[String],
    fractions: &FractionTable,
    weighting: TimestampWeighting,
    smoothing: f64,
) -> Result<CounterfactualProfile> {
    if fractions.num_categories() != categories.len() {
        return Err(Error::DimensionMismatch {
            expected: categories.len(),
            actual: fractions.num_categories(),
        });
    }
    let attr = attributes.get(attribute)?;
    let width = fractions.num_categories();

    let mut members: Vec<(u32, CategoryDistribution)> = Vec::new();
    let mut fallback = Vec::new();
    for (u, history) in histories.iter().enumerate() {
        if history.is_empty() {
            continue;
        }
        let class = attr.class_of(UserId(u as u32))?;
        let (m, fb) = history_distribution(history, fractions, weighting)?;
        if fb {
            fallback.push(UserId(u as u32));
        }
        members.push((class, m));
    }

    let mut present: Vec<u32> = members.iter().map(|(c, _)| *c).collect();
    present.sort_unstable();
    present.dedup();
    if present.is_empty() {
        return Err(Error::Empty(format!("no user with history for `{attribute}`")));
    }

    let mut targets = BTreeMap::new();
    for &class in &present {
        let mut sum = vec![0.0; width];
        let mut count = 0usize;
        for (c, m) in &members {
            if *c != class {
                count += 1;
                for (s, v) in sum.iter_mut().zip(&m.0) {
                    *s += v;
                }
            }
        }
        if count == 0 {
            return Err(Error::EmptyComplement {
                attribute: attribute.to_string(),
                class: attr.class_name(class).to_string(),
            });
        }
        sum.iter_mut().for_each(|v| *v /= count as f64);
        targets.insert(
            attr.class_name(class).to_string(),
            CategoryDistribution(sum).smoothed(smoothing),
        );
    }

    Ok(CounterfactualProfile {
        attribute: attribute.to_string(),
        categories: categories.to_vec(),
        weighting,
        smoothing,
        targets,
        uniform_fallback_users: fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Attribute, CategoryCatalog, CategoryId, ItemId};

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn catalog() -> CategoryCatalog {
        CategoryCatalog::new(
            names(&["A", "B"]),
            vec![vec![CategoryId(0)], vec![CategoryId(1)]],
        )
        .unwrap()
    }

    fn at(user: u32, item: u32) -> Interaction {
        Interaction {
            user: UserId(user),
            item: ItemId(item),
            rating: None,
            timestamp: 10,
        }
    }

    #[test]
    fn two_users_swap_targets() {
        let attrs = UserAttributes::new(
            2,
            vec![Attribute::new("gender", names(&["M", "F"]), vec![0, 1]).unwrap()],
        )
        .unwrap();
        let histories = vec![vec![at(0, 0)], vec![at(1, 1)]];
        let cat = catalog();
        let p = build_counterfactual_profile(
            &histories,
            &attrs,
            "gender",
            cat.names(),
            &cat.fraction_table(),
            TimestampWeighting::Raw,
            DEFAULT_SMOOTHING,
        )
        .unwrap();
        let m = p.target("M").unwrap();
        let f = p.target("F").unwrap();
        assert!(m.0[1] > 0.999 && m.0[0] > 0.0);
        assert!(f.0[0] > 0.999 && f.0[1] > 0.0);
        assert!(m.is_normalized() && f.is_normalized());
    }

    #[test]
    fn single_class_has_empty_complement() {
        let attrs = UserAttributes::new(
            2,
            vec![Attribute::new("gender", names(&["M", "F"]), vec![0, 0]).unwrap()],
        )
        .unwrap();
        let cat = catalog();
        let err = build_counterfactual_profile(
            &[vec![at(0, 0)], vec![at(1, 1)]],
            &attrs,
            "gender",
            cat.names(),
            &cat.fraction_table(),
            TimestampWeighting::Raw,
            DEFAULT_SMOOTHING,
        );
        assert_eq!(
            err,
            Err(Error::EmptyComplement {
                attribute: "gender".into(),
                class: "M".into()
            })
        );
    }
}
