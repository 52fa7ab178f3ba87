//! Dataset model shared by every other module.
//!
//! Users, items and categories are dense `u32` indices assigned at ingestion;
//! the original string identifiers are kept in [`IdIndex`] side tables so
//! reports can speak the dataset's own language. All values here are
//! immutable once constructed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

dense_id!(
    /// Dense user index.
    UserId
);
dense_id!(
    /// Dense item index.
    ItemId
);
dense_id!(
    /// Dense category index.
    CategoryId
);

/// Bijection between original string identifiers and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct IdIndex {
    originals: Vec<String>,
    lookup: BTreeMap<String, u32>,
}

impl TryFrom<Vec<String>> for IdIndex {
    type Error = Error;

    fn try_from(originals: Vec<String>) -> Result<Self> {
        Self::from_originals(originals)
    }
}

impl From<IdIndex> for Vec<String> {
    fn from(index: IdIndex) -> Self {
        index.originals
    }
}

impl IdIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an index where `originals[i]` receives dense id `i`.
    pub fn from_originals(originals: Vec<String>) -> Result<Self> {
        let mut lookup = BTreeMap::new();
        for (i, id) in originals.iter().enumerate() {
            if lookup.insert(id.clone(), i as u32).is_some() {
                return Err(Error::Invariant(format!("duplicate identifier `{id}`")));
            }
        }
        Ok(Self { originals, lookup })
    }

    /// Returns the dense id for `original`, assigning the next free one if new.
    pub fn intern(&mut self, original: &str) -> u32 {
        if let Some(&id) = self.lookup.get(original) {
            return id;
        }
        let id = self.originals.len() as u32;
        self.originals.push(original.to_string());
        self.lookup.insert(original.to_string(), id);
        id
    }

    pub fn get(&self, original: &str) -> Option<u32> {
        self.lookup.get(original).copied()
    }

    pub fn original(&self, dense: u32) -> Option<&str> {
        self.originals.get(dense as usize).map(String::as_str)
    }

    pub fn originals(&self) -> &[String] {
        &self.originals
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }
}

/// One user-item event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub rating: Option<f64>,
    /// Seconds since epoch, or the dataset's native unit.
    pub timestamp: u64,
}

/// Which side of the train/test split an interaction belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// The item x category incidence matrix together with the category names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCatalog {
    names: Vec<String>,
    membership: Vec<Vec<CategoryId>>,
}

impl CategoryCatalog {
    /// `membership[v]` lists the categories of item `v`. Every item needs at
    /// least one category and names must be unique.
    pub fn new(names: Vec<String>, membership: Vec<Vec<CategoryId>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Invariant(format!("duplicate category name `{name}`")));
            }
        }
        let mut empty = Vec::new();
        let mut membership = membership;
        for (item, cats) in membership.iter_mut().enumerate() {
            cats.sort_unstable();
            cats.dedup();
            if cats.is_empty() {
                empty.push(item);
            }
            if let Some(bad) = cats.iter().find(|c| c.index() >= names.len()) {
                return Err(Error::UnknownCategory(bad.0));
            }
        }
        if !empty.is_empty() {
            return Err(Error::Invariant(format!(
                "items without any category: {empty:?}"
            )));
        }
        Ok(Self { names, membership })
    }

    pub fn num_categories(&self) -> usize {
        self.names.len()
    }

    pub fn num_items(&self) -> usize {
        self.membership.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, category: CategoryId) -> Option<&str> {
        self.names.get(category.index()).map(String::as_str)
    }

    pub fn categories_of(&self, item: ItemId) -> Result<&[CategoryId]> {
        self.membership
            .get(item.index())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownItem(item.0))
    }

    /// Dense `C_{v,c} / |C_v|` row for one item.
    pub fn fraction_row(&self, item: ItemId) -> Result<Vec<f64>> {
        let cats = self.categories_of(item)?;
        let mut row = vec![0.0; self.names.len()];
        let share = 1.0 / cats.len() as f64;
        for c in cats {
            row[c.index()] = share;
        }
        Ok(row)
    }

    /// Precomputed fraction rows for every item.
    pub fn fraction_table(&self) -> FractionTable {
        let width = self.names.len();
        let mut values = vec![0.0; width * self.membership.len()];
        for (item, cats) in self.membership.iter().enumerate() {
            let share = 1.0 / cats.len() as f64;
            for c in cats {
                values[item * width + c.index()] = share;
            }
        }
        FractionTable {
            width,
            values,
            members: self.membership.clone(),
        }
    }

    /// Restricts the catalog to `items` (old ids), renumbering them densely in
    /// the given order.
    pub fn select(&self, items: &[ItemId]) -> Result<Self> {
        let membership = items
            .iter()
            .map(|&i| self.categories_of(i).map(<[CategoryId]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.names.clone(), membership)
    }
}

/// Dense `items x categories` table of `C_{v,c} / |C_v|`, plus the sparse
/// membership lists for fast iteration over non-zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionTable {
    width: usize,
    values: Vec<f64>,
    members: Vec<Vec<CategoryId>>,
}

impl FractionTable {
    #[inline]
    pub fn num_categories(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn num_items(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn row(&self, item: ItemId) -> &[f64] {
        let start = item.index() * self.width;
        &self.values[start..start + self.width]
    }

    #[inline]
    pub fn members(&self, item: ItemId) -> &[CategoryId] {
        &self.members[item.index()]
    }

    pub fn check_item(&self, item: ItemId) -> Result<()> {
        if item.index() < self.members.len() {
            Ok(())
        } else {
            Err(Error::UnknownItem(item.0))
        }
    }
}

/// `c -> C_{v,c} / |C_v|` for a single item; zero entries are omitted.
pub fn item_category_fractions(
    item: ItemId,
    catalog: &CategoryCatalog,
) -> Result<BTreeMap<CategoryId, f64>> {
    let cats = catalog.categories_of(item)?;
    if cats.is_empty() {
        return Err(Error::Invariant(format!("item {item} has no category")));
    }
    let share = 1.0 / cats.len() as f64;
    Ok(cats.iter().map(|&c| (c, share)).collect())
}

/// One categorical sensitive attribute: `values[u]` indexes into `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub classes: Vec<String>,
    pub values: Vec<u32>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, classes: Vec<String>, values: Vec<u32>) -> Result<Self> {
        let name = name.into();
        if let Some(bad) = values.iter().find(|&&v| v as usize >= classes.len()) {
            return Err(Error::Invariant(format!(
                "attribute `{name}` uses class index {bad} but declares {} classes",
                classes.len()
            )));
        }
        Ok(Self {
            name,
            classes,
            values,
        })
    }

    pub fn class_of(&self, user: UserId) -> Result<u32> {
        self.values
            .get(user.index())
            .copied()
            .ok_or(Error::UnknownUser(user.0))
    }

    pub fn class_name(&self, class: u32) -> &str {
        &self.classes[class as usize]
    }

    /// Number of distinct class values actually present.
    pub fn present_classes(&self) -> usize {
        self.values.iter().collect::<BTreeSet<_>>().len()
    }
}

/// All declared sensitive attributes, each with a value for every user.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAttributes {
    attributes: Vec<Attribute>,
}

impl UserAttributes {
    pub fn new(num_users: usize, attributes: Vec<Attribute>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for a in &attributes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Invariant(format!("duplicate attribute `{}`", a.name)));
            }
            if a.values.len() != num_users {
                return Err(Error::Invariant(format!(
                    "attribute `{}` has {} values for {num_users} users",
                    a.name,
                    a.values.len()
                )));
            }
        }
        Ok(Self { attributes })
    }

    pub fn get(&self, name: &str) -> Result<&Attribute> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.attributes.iter()
    }

    /// Keeps the rows of `users` (old ids), renumbered in the given order.
    pub fn select(&self, users: &[UserId]) -> Result<Self> {
        let attributes = self
            .attributes
            .iter()
            .map(|a| {
                let values = users
                    .iter()
                    .map(|&u| a.class_of(u))
                    .collect::<Result<Vec<_>>>()?;
                Attribute::new(a.name.clone(), a.classes.clone(), values)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(users.len(), attributes)
    }
}

/// Users grouped by the value of one attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub attribute: String,
    pub classes: Vec<String>,
    /// `groups[class]`, sorted ascending; classes without users are empty.
    pub groups: Vec<Vec<UserId>>,
}

impl Partition {
    pub fn group(&self, class: u32) -> &[UserId] {
        &self.groups[class as usize]
    }

    pub fn group_by_name(&self, class: &str) -> Option<&[UserId]> {
        let idx = self.classes.iter().position(|c| c == class)?;
        Some(&self.groups[idx])
    }

    /// `U_{not s}`: every partitioned user whose class differs from `class`.
    pub fn complement(&self, class: u32) -> Vec<UserId> {
        let mut out: Vec<UserId> = self
            .groups
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != class as usize)
            .flat_map(|(_, g)| g.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn non_empty_classes(&self) -> impl Iterator<Item = u32> + '_ {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(c, _)| c as u32)
    }

    /// Fewer than two populated groups: every complement is empty.
    pub fn is_degenerate(&self) -> bool {
        self.non_empty_classes().count() < 2
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn partition_by_attribute(
    users: &[UserId],
    attributes: &UserAttributes,
    attribute: &str,
) -> Result<Partition> {
    let attr = attributes.get(attribute)?;
    let mut groups = vec![Vec::new(); attr.classes.len()];
    let unique: BTreeSet<UserId> = users.iter().copied().collect();
    for u in unique {
        groups[attr.class_of(u)? as usize].push(u);
    }
    Ok(Partition {
        attribute: attr.name.clone(),
        classes: attr.classes.clone(),
        groups,
    })
}

/// A validated dataset: dense ids, interactions tagged train/test, the item
/// catalog and the users' sensitive attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    users: IdIndex,
    items: IdIndex,
    interactions: Vec<Interaction>,
    split: Vec<Split>,
    catalog: CategoryCatalog,
    attributes: UserAttributes,
}

impl Dataset {
    pub fn new(
        users: IdIndex,
        items: IdIndex,
        interactions: Vec<Interaction>,
        split: Vec<Split>,
        catalog: CategoryCatalog,
        attributes: UserAttributes,
    ) -> Result<Self> {
        if split.len() != interactions.len() {
            return Err(Error::DimensionMismatch {
                expected: interactions.len(),
                actual: split.len(),
            });
        }
        if catalog.num_items() != items.len() {
            return Err(Error::Invariant(format!(
                "catalog covers {} items, index has {}",
                catalog.num_items(),
                items.len()
            )));
        }
        for a in attributes.iter() {
            if a.values.len() != users.len() {
                return Err(Error::Invariant(format!(
                    "attribute `{}` covers {} users, index has {}",
                    a.name,
                    a.values.len(),
                    users.len()
                )));
            }
        }
        let mut has_train = vec![false; users.len()];
        for (x, s) in interactions.iter().zip(&split) {
            if x.user.index() >= users.len() {
                return Err(Error::UnknownUser(x.user.0));
            }
            if x.item.index() >= items.len() {
                return Err(Error::UnknownItem(x.item.0));
            }
            if *s == Split::Train {
                has_train[x.user.index()] = true;
            }
        }
        for (x, s) in interactions.iter().zip(&split) {
            if *s == Split::Test && !has_train[x.user.index()] {
                return Err(Error::Invariant(format!(
                    "user {} has test interactions but no training history",
                    x.user
                )));
            }
        }
        Ok(Self {
            users,
            items,
            interactions,
            split,
            catalog,
            attributes,
        })
    }

    pub fn users(&self) -> &IdIndex {
        &self.users
    }

    pub fn items(&self) -> &IdIndex {
        &self.items
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn split_tags(&self) -> &[Split] {
        &self.split
    }

    pub fn catalog(&self) -> &CategoryCatalog {
        &self.catalog
    }

    pub fn attributes(&self) -> &UserAttributes {
        &self.attributes
    }

    pub fn user_ids(&self) -> impl Iterator<Item = UserId> {
        (0..self.users.len() as u32).map(UserId)
    }

    pub fn interactions_in(&self, split: Split) -> impl Iterator<Item = &Interaction> {
        self.interactions
            .iter()
            .zip(&self.split)
            .filter(move |(_, s)| **s == split)
            .map(|(x, _)| x)
    }

    /// Interactions of `split` grouped per user, in stored order.
    pub fn histories(&self, split: Split) -> Vec<Vec<Interaction>> {
        let mut out = vec![Vec::new(); self.users.len()];
        for x in self.interactions_in(split) {
            out[x.user.index()].push(*x);
        }
        out
    }

    /// Sorted, de-duplicated item sets of `split` per user.
    pub fn item_sets(&self, split: Split) -> Vec<Vec<ItemId>> {
        let mut out = vec![Vec::new(); self.users.len()];
        for x in self.interactions_in(split) {
            out[x.user.index()].push(x.item);
        }
        for items in &mut out {
            items.sort_unstable();
            items.dedup();
        }
        out
    }
}

/// A scored candidate item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub item: ItemId,
    pub score: f64,
}

/// Descending by score, ties by ascending item id.
#[inline]
pub(crate) fn candidate_order(a: &Candidate, b: &Candidate) -> core::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.item.cmp(&b.item))
}

/// Per-user candidate lists `TopN_u`, strictly ordered by score descending
/// with ties broken by ascending item id. Indexed by dense user id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreSet {
    lists: Vec<Vec<Candidate>>,
}

impl ScoreSet {
    /// Validates already-ordered lists.
    pub fn new(lists: Vec<Vec<Candidate>>) -> Result<Self> {
        for (u, list) in lists.iter().enumerate() {
            for c in list {
                if !c.score.is_finite() {
                    return Err(Error::Invariant(format!(
                        "non-finite score for user {u}, item {}",
                        c.item
                    )));
                }
            }
            for w in list.windows(2) {
                if candidate_order(&w[0], &w[1]) != core::cmp::Ordering::Less {
                    return Err(Error::Invariant(format!(
                        "candidates of user {u} are not strictly ordered at item {}",
                        w[1].item
                    )));
                }
            }
        }
        Ok(Self { lists })
    }

    /// Sorts each list into canonical order, then validates.
    pub fn from_unsorted(mut lists: Vec<Vec<Candidate>>) -> Result<Self> {
        for list in &mut lists {
            list.sort_by(candidate_order);
        }
        Self::new(lists)
    }

    pub fn num_users(&self) -> usize {
        self.lists.len()
    }

    pub fn for_user(&self, user: UserId) -> &[Candidate] {
        self.lists.get(user.index()).map_or(&[], Vec::as_slice)
    }

    pub fn lists(&self) -> &[Vec<Candidate>] {
        &self.lists
    }

    /// Keeps the first `n` candidates of every list.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            lists: self
                .lists
                .iter()
                .map(|l| l[..l.len().min(n)].to_vec())
                .collect(),
        }
    }

    /// The baseline top-k lists (first `k` candidates, score order).
    pub fn top_k(&self, k: usize) -> Vec<RankedList> {
        self.lists
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(u, l)| RankedList {
                user: UserId(u as u32),
                items: l.iter().take(k).map(|c| c.item).collect(),
            })
            .collect()
    }
}

/// A final recommendation list for one user, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedList {
    pub user: UserId,
    pub items: Vec<ItemId>,
}

impl RankedList {
    pub fn new(user: UserId, items: Vec<ItemId>) -> Result<Self> {
        let unique: BTreeSet<_> = items.iter().collect();
        if unique.len() != items.len() {
            return Err(Error::Invariant(format!(
                "duplicate item in list of user {user}"
            )));
        }
        Ok(Self { user, items })
    }
}
