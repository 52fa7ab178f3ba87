//! Canonical dataset bundle: `interactions.tsv`, `users.tsv`,
//! `item_categories.tsv` and `manifest.json`.
//!
//! Row order in the TSVs is the dense id order, so reading a bundle back
//! reproduces the same [`Dataset`] exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use fairrank_core::{
    Attribute, CategoryCatalog, CategoryId, Dataset, IdIndex, Interaction, ItemId, Split, UserAttributes,
    UserId,
};
use serde::{Deserialize, Serialize};

use crate::ingest::{IngestConfig, IngestSummary};

pub const MANIFEST: &str = "manifest.json";
pub const INTERACTIONS: &str = "interactions.tsv";
pub const USERS: &str = "users.tsv";
pub const ITEM_CATEGORIES: &str = "item_categories.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub categories: Vec<String>,
    pub attributes: Vec<AttributeSchema>,
    pub ingest: IngestConfig,
    pub summary: IngestSummary,
}

pub fn write_bundle(dir: &Path, dataset: &Dataset, config: &IngestConfig, summary: &IngestSummary) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let users = dataset.users();
    let items = dataset.items();

    let mut out = String::from("user\titem\trating\ttimestamp\tsplit\n");
    for (x, s) in dataset.interactions().iter().zip(dataset.split_tags()) {
        let rating = x.rating.map(|r| r.to_string()).unwrap_or_default();
        let split = if *s == Split::Train { "train" } else { "test" };
        writeln!(
            out,
            "{}\t{}\t{rating}\t{}\t{split}",
            users.original(x.user.0).unwrap(),
            items.original(x.item.0).unwrap(),
            x.timestamp
        )?;
    }
    write(dir, INTERACTIONS, &out)?;

    let attrs: Vec<&Attribute> = dataset.attributes().iter().collect();
    let mut out = String::from("user");
    for a in &attrs {
        write!(out, "\t{}", a.name)?;
    }
    out.push('\n');
    for (u, original) in users.originals().iter().enumerate() {
        out.push_str(original);
        for a in &attrs {
            write!(out, "\t{}", a.class_name(a.values[u]))?;
        }
        out.push('\n');
    }
    write(dir, USERS, &out)?;

    let catalog = dataset.catalog();
    let mut out = String::from("item\tcategories\n");
    for (i, original) in items.originals().iter().enumerate() {
        let cats: Vec<&str> = catalog
            .categories_of(ItemId(i as u32))?
            .iter()
            .map(|&c| catalog.name(c).unwrap())
            .collect();
        writeln!(out, "{original}\t{}", cats.join("|"))?;
    }
    write(dir, ITEM_CATEGORIES, &out)?;

    let manifest = BundleManifest {
        users: dataset.num_users(),
        items: dataset.num_items(),
        interactions: dataset.interactions().len(),
        categories: catalog.names().to_vec(),
        attributes: attrs
            .iter()
            .map(|a| AttributeSchema {
                name: a.name.clone(),
                classes: a.classes.clone(),
            })
            .collect(),
        ingest: config.clone(),
        summary: summary.clone(),
    };
    write(dir, MANIFEST, &(serde_json::to_string_pretty(&manifest)? + "\n"))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
}

/// Data rows of a headered TSV with their 1-based line numbers.
fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i + 1, l.split('\t').collect()))
}

pub fn read_manifest(dir: &Path) -> Result<BundleManifest> {
    serde_json::from_str(&read(dir, MANIFEST)?).with_context(|| format!("parsing {}", dir.join(MANIFEST).display()))
}

pub fn read_bundle(dir: &Path) -> Result<(Dataset, BundleManifest)> {
    let manifest = read_manifest(dir)?;

    let mut user_ids = Vec::new();
    let mut attr_values: Vec<Vec<u32>> = vec![Vec::new(); manifest.attributes.len()];
    for (n, f) in rows(&read(dir, USERS)?) {
        ensure!(f.len() == manifest.attributes.len() + 1, "{USERS}:{n}: wrong field count");
        user_ids.push(f[0].to_string());
        for (a, schema) in manifest.attributes.iter().enumerate() {
            let Some(c) = schema.classes.iter().position(|c| c == f[a + 1]) else {
                bail!("{USERS}:{n}: unknown `{}` class `{}`", schema.name, f[a + 1]);
            };
            attr_values[a].push(c as u32);
        }
    }
    let users = IdIndex::from_originals(user_ids)?;
    let attributes = manifest
        .attributes
        .iter()
        .zip(attr_values)
        .map(|(s, v)| Attribute::new(s.name.clone(), s.classes.clone(), v))
        .collect::<Result<Vec<_>, _>>()?;
    let attributes = UserAttributes::new(users.len(), attributes)?;

    let cat_index: BTreeMap<&str, u32> = manifest
        .categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();
    let mut item_ids = Vec::new();
    let mut membership = Vec::new();
    for (n, f) in rows(&read(dir, ITEM_CATEGORIES)?) {
        ensure!(f.len() == 2, "{ITEM_CATEGORIES}:{n}: wrong field count");
        item_ids.push(f[0].to_string());
        let cats = f[1]
            .split('|')
            .map(|c| cat_index.get(c).map(|&i| CategoryId(i)))
            .collect::<Option<Vec<_>>>()
            .with_context(|| format!("{ITEM_CATEGORIES}:{n}: unknown category"))?;
        membership.push(cats);
    }
    let items = IdIndex::from_originals(item_ids)?;
    let catalog = CategoryCatalog::new(manifest.categories.clone(), membership)?;

    let mut interactions = Vec::new();
    let mut split = Vec::new();
    for (n, f) in rows(&read(dir, INTERACTIONS)?) {
        ensure!(f.len() == 5, "{INTERACTIONS}:{n}: wrong field count");
        let user = users.get(f[0]).with_context(|| format!("{INTERACTIONS}:{n}: unknown user {}", f[0]))?;
        let item = items.get(f[1]).with_context(|| format!("{INTERACTIONS}:{n}: unknown item {}", f[1]))?;
        let rating = match f[2] {
            "" => None,
            r => Some(r.parse().with_context(|| format!("{INTERACTIONS}:{n}: bad rating"))?),
        };
        interactions.push(Interaction {
            user: UserId(user),
            item: ItemId(item),
            rating,
            timestamp: f[3].parse().with_context(|| format!("{INTERACTIONS}:{n}: bad timestamp"))?,
        });
        split.push(match f[4] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => bail!("{INTERACTIONS}:{n}: unknown split `{other}`"),
        });
    }
    let dataset = Dataset::new(users, items, interactions, split, catalog, attributes)?;
    Ok((dataset, manifest))
}
