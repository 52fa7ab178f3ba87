//! Raw dataset parsing: MovieLens 100K / 1M and headered generic TSVs.
//!
//! Ingestion runs in a fixed order: parse interactions, attach item
//! categories (dropping items that end up with none), k-core filter, assign
//! dense ids to the survivors, attach user attributes, split.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use fairrank_core::preprocess::{k_core_filter, temporal_split, train_count};
use fairrank_core::{
    Attribute, CategoryCatalog, CategoryId, Dataset, IdIndex, Interaction, ItemId, Split, UserAttributes,
    UserId,
};
use log::warn;
use serde::{Deserialize, Serialize};

/// MovieLens-1M age band starts, also used to bucket ML100K's raw ages.
pub const MOVIELENS_AGE_BANDS: [u32; 7] = [1, 18, 25, 35, 45, 50, 56];

/// ML100K genre flag order (`u.genre`).
pub const ML100K_GENRES: [&str; 19] = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime", "Documentary", "Drama",
    "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("user {user} has no `{attribute}` value in {}", path.display())]
    MissingAttribute {
        user: String,
        attribute: String,
        path: PathBuf,
    },
    #[error("items without any category: {}", .0.join(", "))]
    ZeroCategory(Vec<String>),
    #[error("invalid ingest config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fairrank_core::Error),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[serde(rename = "movielens-100k")]
    Movielens100k,
    #[serde(rename = "movielens-1m")]
    Movielens1m,
    GenericTsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "strategy")]
pub enum SplitConfig {
    /// Earliest `ceil(f * n_u)` interactions of every user go to train.
    TemporalPerUser { fraction: f64 },
    /// Earliest `ceil(f * n)` interactions overall go to train.
    TemporalGlobal { fraction: f64 },
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::TemporalPerUser { fraction: 0.8 }
    }
}

impl SplitConfig {
    pub fn fraction(&self) -> f64 {
        match *self {
            SplitConfig::TemporalPerUser { fraction } | SplitConfig::TemporalGlobal { fraction } => fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub format: Format,
    /// Directory holding the native files (`u.data`, `ratings.dat`, ...).
    /// Explicit paths below take precedence.
    pub dir: Option<PathBuf>,
    pub interactions: Option<PathBuf>,
    pub users: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub k_core: usize,
    pub split: SplitConfig,
    /// Keep MovieLens' "unknown" genre flag as a category.
    pub keep_unknown_genre: bool,
    /// Fail on items without categories instead of dropping them.
    pub strict_categories: bool,
    /// Band starts for the `age` attribute.
    pub age_bands: Vec<u32>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            format: Format::Movielens100k,
            dir: None,
            interactions: None,
            users: None,
            items: None,
            k_core: 5,
            split: SplitConfig::default(),
            keep_unknown_genre: false,
            strict_categories: false,
            age_bands: MOVIELENS_AGE_BANDS.to_vec(),
        }
    }
}

impl IngestConfig {
    pub fn movielens_100k(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.split.fraction();
        if !(f > 0.0 && f < 1.0) {
            return Err(IngestError::Config(format!("split fraction must lie in (0, 1), got {f}")));
        }
        if self.age_bands.is_empty() || self.age_bands.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::Config("age bands must be non-empty and strictly increasing".into()));
        }
        Ok(())
    }

    fn resolve(&self, explicit: &Option<PathBuf>, native: &str, what: &str) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return Ok(p.clone());
        }
        match (&self.dir, self.format) {
            (Some(dir), Format::Movielens100k | Format::Movielens1m) => Ok(dir.join(native)),
            (Some(dir), Format::GenericTsv) => Ok(dir.join(format!("{what}.tsv"))),
            (None, _) => Err(IngestError::Config(format!("no path for the {what} file"))),
        }
    }

    pub fn interactions_path(&self) -> Result<PathBuf> {
        let native = if self.format == Format::Movielens1m { "ratings.dat" } else { "u.data" };
        self.resolve(&self.interactions, native, "interactions")
    }

    pub fn users_path(&self) -> Result<PathBuf> {
        let native = if self.format == Format::Movielens1m { "users.dat" } else { "u.user" };
        self.resolve(&self.users, native, "users")
    }

    pub fn items_path(&self) -> Result<PathBuf> {
        let native = if self.format == Format::Movielens1m { "movies.dat" } else { "u.item" };
        self.resolve(&self.items, native, "item_categories")
    }
}

/// One interaction with its original identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInteraction {
    pub user: String,
    pub item: String,
    pub rating: Option<f64>,
    pub timestamp: u64,
}

/// Item categories keyed by original item id, plus the category order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawCategories {
    pub names: Vec<String>,
    pub items: BTreeMap<String, Vec<usize>>,
}

/// Per-attribute class label of every user, by original user id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawAttributes {
    pub names: Vec<String>,
    pub values: BTreeMap<String, Vec<String>>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| IngestError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("not valid UTF-8: {e}"),
    })
}

/// MovieLens files predate UTF-8; latin-1 maps bytes to chars one-to-one.
fn read_latin1(path: &Path) -> Result<String> {
    Ok(read_bytes(path)?.into_iter().map(char::from).collect())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<'a>(fields: &[&'a str], i: usize, name: &str, path: &Path, line: usize) -> Result<&'a str> {
    fields
        .get(i)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| parse_err(path, line, format!("missing `{name}` field")))
}

fn parse_rating(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|r| r.is_finite())
        .ok_or_else(|| parse_err(path, line, format!("rating `{s}` is not a number")))
}

fn parse_timestamp(s: &str, path: &Path, line: usize) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| parse_err(path, line, format!("timestamp `{s}` is not a non-negative integer")))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parses the interaction file of any supported format.
pub fn parse_interactions(config: &IngestConfig) -> Result<Vec<RawInteraction>> {
    let path = config.interactions_path()?;
    let text = read_utf8(&path)?;
    let rows = match config.format {
        Format::Movielens100k => parse_delimited(&text, "\t", &path)?,
        Format::Movielens1m => parse_delimited(&text, "::", &path)?,
        Format::GenericTsv => parse_generic_interactions(&text, &path)?,
    };
    if rows.is_empty() {
        warn!("{} holds no interactions", path.display());
    }
    Ok(rows)
}

fn parse_delimited(text: &str, sep: &str, path: &Path) -> Result<Vec<RawInteraction>> {
    let mut out = Vec::new();
    for (n, line) in lines(text) {
        let f: Vec<&str> = line.split(sep).collect();
        if f.len() != 4 {
            return Err(parse_err(path, n, format!("expected 4 fields, found {}", f.len())));
        }
        out.push(RawInteraction {
            user: field(&f, 0, "user", path, n)?.to_string(),
            item: field(&f, 1, "item", path, n)?.to_string(),
            rating: Some(parse_rating(field(&f, 2, "rating", path, n)?, path, n)?),
            timestamp: parse_timestamp(field(&f, 3, "timestamp", path, n)?, path, n)?,
        });
    }
    Ok(out)
}

fn parse_generic_interactions(text: &str, path: &Path) -> Result<Vec<RawInteraction>> {
    let mut it = lines(text);
    let Some((_, header)) = it.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let col = |name: &str| cols.iter().position(|c| *c == name);
    let (Some(u), Some(i), Some(t)) = (col("user"), col("item"), col("timestamp")) else {
        return Err(parse_err(path, 1, "header must name `user`, `item` and `timestamp` columns"));
    };
    let r = col("rating");
    let mut out = Vec::new();
    for (n, line) in it {
        let f: Vec<&str> = line.split('\t').collect();
        let rating = match r {
            Some(r) => match f.get(r).map(|s| s.trim()) {
                Some(s) if !s.is_empty() => Some(parse_rating(s, path, n)?),
                _ => None,
            },
            None => None,
        };
        out.push(RawInteraction {
            user: field(&f, u, "user", path, n)?.to_string(),
            item: field(&f, i, "item", path, n)?.to_string(),
            rating,
            timestamp: parse_timestamp(field(&f, t, "timestamp", path, n)?, path, n)?,
        });
    }
    Ok(out)
}

/// Loads the item category file of any supported format.
pub fn load_item_categories(config: &IngestConfig) -> Result<RawCategories> {
    let path = config.items_path()?;
    match config.format {
        Format::Movielens100k => parse_ml100k_items(&read_latin1(&path)?, &path, config.keep_unknown_genre),
        Format::Movielens1m => parse_category_lists(&read_latin1(&path)?, &path, "::", config.keep_unknown_genre),
        Format::GenericTsv => parse_category_lists(&read_utf8(&path)?, &path, "\t", true),
    }
}

fn insert_item(out: &mut RawCategories, item: &str, cats: Vec<usize>, path: &Path, line: usize) -> Result<()> {
    if out.items.insert(item.to_string(), cats).is_some() {
        return Err(parse_err(path, line, format!("duplicate row for item {item}")));
    }
    Ok(())
}

fn parse_ml100k_items(text: &str, path: &Path, keep_unknown: bool) -> Result<RawCategories> {
    let first = if keep_unknown { 0 } else { 1 };
    let mut out = RawCategories {
        names: ML100K_GENRES[first..].iter().map(|s| s.to_string()).collect(),
        items: BTreeMap::new(),
    };
    for (n, line) in lines(text) {
        let f: Vec<&str> = line.split('|').collect();
        if f.len() != 5 + ML100K_GENRES.len() {
            return Err(parse_err(
                path,
                n,
                format!("expected {} fields, found {}", 5 + ML100K_GENRES.len(), f.len()),
            ));
        }
        let item = field(&f, 0, "item", path, n)?;
        let mut cats = Vec::new();
        for (g, flag) in f[5..].iter().enumerate() {
            match flag.trim() {
                "1" if g >= first => cats.push(g - first),
                "0" | "1" => {}
                other => return Err(parse_err(path, n, format!("genre flag `{other}` is not 0/1"))),
            }
        }
        insert_item(&mut out, item, cats, path, n)?;
    }
    Ok(out)
}

/// `item<sep>title<sep>A|B` (ML1M) or, for generic files, either
/// `item\tA|B` or `item|A|B` lines (category lists split on `|` or `,`).
fn parse_category_lists(text: &str, path: &Path, sep: &str, keep_unknown: bool) -> Result<RawCategories> {
    let mut rows: Vec<(usize, String, Vec<String>)> = Vec::new();
    for (n, line) in lines(text) {
        let (item, list) = if sep == "::" {
            let f: Vec<&str> = line.split("::").collect();
            if f.len() != 3 {
                return Err(parse_err(path, n, format!("expected 3 fields, found {}", f.len())));
            }
            (f[0].trim(), f[2])
        } else if let Some((item, rest)) = line.split_once('\t') {
            (item.trim(), rest)
        } else if let Some((item, rest)) = line.split_once('|') {
            (item.trim(), rest)
        } else {
            (line.trim(), "")
        };
        if n == 1 && sep != "::" && item == "item" {
            continue;
        }
        if item.is_empty() {
            return Err(parse_err(path, n, "missing `item` field"));
        }
        let mut cats: Vec<String> = list
            .split(['|', ','])
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .filter(|c| keep_unknown || !c.eq_ignore_ascii_case("unknown"))
            .map(str::to_string)
            .collect();
        cats.sort();
        cats.dedup();
        rows.push((n, item.to_string(), cats));
    }
    let names: BTreeSet<&String> = rows.iter().flat_map(|(_, _, c)| c).collect();
    let names: Vec<String> = names.into_iter().cloned().collect();
    let mut out = RawCategories {
        names,
        items: BTreeMap::new(),
    };
    for (n, item, cats) in &rows {
        let ids = cats
            .iter()
            .map(|c| out.names.binary_search(c).expect("name collected above"))
            .collect();
        insert_item(&mut out, item, ids, path, *n)?;
    }
    Ok(out)
}

/// Loads user attributes. MovieLens files yield `gender`, `age` and
/// `occupation`; generic files are headered TSVs whose first column is
/// `user` and whose other columns are attributes.
pub fn load_user_attributes(config: &IngestConfig) -> Result<RawAttributes> {
    let path = config.users_path()?;
    let text = read_utf8(&path).or_else(|_| read_latin1(&path))?;
    let mut out = match config.format {
        Format::Movielens100k => parse_ml_users(&text, &path, "|", [2, 1, 3])?,
        Format::Movielens1m => parse_ml_users(&text, &path, "::", [1, 2, 3])?,
        Format::GenericTsv => parse_generic_users(&text, &path)?,
    };
    if let Some(a) = out.names.iter().position(|n| n == "age") {
        for (user, values) in out.values.iter_mut() {
            let age: u32 = values[a].parse().map_err(|_| IngestError::Parse {
                path: path.clone(),
                line: 0,
                message: format!("user {user} has non-integer age `{}`", values[a]),
            })?;
            values[a] = age_band(age, &config.age_bands);
        }
    }
    Ok(out)
}

/// Label of the band containing `age`; ages below the first start fall in
/// the first band.
pub fn age_band(age: u32, bands: &[u32]) -> String {
    let i = bands.iter().rposition(|&b| b <= age).unwrap_or(0);
    match (i, bands.get(i + 1)) {
        (0, Some(next)) => format!("<{next}"),
        (_, Some(next)) => format!("{}-{}", bands[i], next - 1),
        (_, None) => format!("{}+", bands[i]),
    }
}

/// Sort key keeping age band labels in numeric order.
fn class_key(label: &str) -> (u8, u64, String) {
    let digits: String = label
        .trim_start_matches('<')
        .chars()
        .take_while(char::is_ascii_digit)
        .collect();
    match digits.parse::<u64>() {
        Ok(v) if label.starts_with('<') => (0, v, label.to_string()),
        Ok(v) => (1, v, label.to_string()),
        Err(_) => (2, 0, label.to_string()),
    }
}

/// `cols` = positions of (gender, age, occupation).
fn parse_ml_users(text: &str, path: &Path, sep: &str, cols: [usize; 3]) -> Result<RawAttributes> {
    let names = ["gender", "age", "occupation"];
    let mut out = RawAttributes {
        names: names.iter().map(|s| s.to_string()).collect(),
        values: BTreeMap::new(),
    };
    for (n, line) in lines(text) {
        let f: Vec<&str> = line.split(sep).collect();
        let user = field(&f, 0, "user", path, n)?;
        let mut values = Vec::new();
        for (name, &c) in names.iter().zip(&cols) {
            let v = f.get(c).map(|s| s.trim()).filter(|s| !s.is_empty());
            let v = v.ok_or_else(|| IngestError::MissingAttribute {
                user: user.to_string(),
                attribute: name.to_string(),
                path: path.to_path_buf(),
            })?;
            values.push(v.to_string());
        }
        if out.values.insert(user.to_string(), values).is_some() {
            return Err(parse_err(path, n, format!("duplicate row for user {user}")));
        }
    }
    Ok(out)
}

fn parse_generic_users(text: &str, path: &Path) -> Result<RawAttributes> {
    let mut it = lines(text);
    let Some((_, header)) = it.next() else {
        return Ok(RawAttributes::default());
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    if cols.first() != Some(&"user") || cols.len() < 2 {
        return Err(parse_err(path, 1, "header must be `user` followed by attribute columns"));
    }
    let mut out = RawAttributes {
        names: cols[1..].iter().map(|s| s.to_string()).collect(),
        values: BTreeMap::new(),
    };
    for (n, line) in it {
        let f: Vec<&str> = line.split('\t').collect();
        let user = field(&f, 0, "user", path, n)?;
        let mut values = Vec::new();
        for (i, name) in out.names.iter().enumerate() {
            let v = f.get(i + 1).map(|s| s.trim()).filter(|s| !s.is_empty());
            let v = v.ok_or_else(|| IngestError::MissingAttribute {
                user: user.to_string(),
                attribute: name.clone(),
                path: path.to_path_buf(),
            })?;
            values.push(v.to_string());
        }
        if out.values.insert(user.to_string(), values).is_some() {
            return Err(parse_err(path, n, format!("duplicate row for user {user}")));
        }
    }
    Ok(out)
}

/// Counts reported after ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub raw_interactions: usize,
    pub raw_users: usize,
    pub raw_items: usize,
    /// Items dropped for having no category, original ids.
    pub zero_category_items: Vec<String>,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub categories: usize,
    pub train_interactions: usize,
    pub test_interactions: usize,
    /// Users whose whole history is in train (excluded from accuracy).
    pub train_only_users: usize,
    /// Attribute name to number of classes present.
    pub attribute_classes: BTreeMap<String, usize>,
}

/// Dense ids sorted numerically when every id is an integer, else lexically.
fn ordered_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut ids: Vec<&str> = ids.collect::<BTreeSet<_>>().into_iter().collect();
    if ids.iter().all(|s| s.parse::<u64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<u64>().unwrap());
    }
    ids.into_iter().map(str::to_string).collect()
}

/// Runs the full ingestion pipeline.
pub fn ingest(config: &IngestConfig) -> Result<(Dataset, IngestSummary)> {
    config.validate()?;
    let raw = parse_interactions(config)?;
    let categories = load_item_categories(config)?;
    let attributes = load_user_attributes(config)?;
    build_dataset(config, raw, categories, attributes, &config.users_path()?)
}

/// Assembles a [`Dataset`] from already parsed parts.
pub fn build_dataset(
    config: &IngestConfig,
    raw: Vec<RawInteraction>,
    categories: RawCategories,
    attributes: RawAttributes,
    users_path: &Path,
) -> Result<(Dataset, IngestSummary)> {
    config.validate()?;
    let raw_users = raw.iter().map(|r| r.user.as_str()).collect::<BTreeSet<_>>().len();
    let raw_items: BTreeSet<&str> = raw.iter().map(|r| r.item.as_str()).collect();

    let zero: Vec<String> = ordered_ids(
        raw_items
            .iter()
            .copied()
            .filter(|i| categories.items.get(*i).map_or(true, Vec::is_empty)),
    );
    if !zero.is_empty() {
        if config.strict_categories {
            return Err(IngestError::ZeroCategory(zero));
        }
        warn!("dropping {} items without categories: {}", zero.len(), zero.join(", "));
    }
    let zero_set: BTreeSet<&str> = zero.iter().map(String::as_str).collect();
    let kept: Vec<&RawInteraction> = raw.iter().filter(|r| !zero_set.contains(r.item.as_str())).collect();

    // Provisional ids for the k-core pass.
    let mut prov_users = IdIndex::new();
    let mut prov_items = IdIndex::new();
    let provisional: Vec<Interaction> = kept
        .iter()
        .map(|r| Interaction {
            user: UserId(prov_users.intern(&r.user)),
            item: ItemId(prov_items.intern(&r.item)),
            rating: r.rating,
            timestamp: r.timestamp,
        })
        .collect();
    let core = if provisional.is_empty() {
        Vec::new()
    } else {
        k_core_filter(&provisional, config.k_core)?
    };
    let user_of = |x: &Interaction| prov_users.original(x.user.0).expect("interned");
    let item_of = |x: &Interaction| prov_items.original(x.item.0).expect("interned");

    let users = IdIndex::from_originals(ordered_ids(core.iter().map(user_of)))?;
    let items = IdIndex::from_originals(ordered_ids(core.iter().map(item_of)))?;
    let remapped: Vec<Interaction> = core
        .iter()
        .map(|x| Interaction {
            user: UserId(users.get(user_of(x)).expect("survivor")),
            item: ItemId(items.get(item_of(x)).expect("survivor")),
            ..*x
        })
        .collect();

    let membership = items
        .originals()
        .iter()
        .map(|i| categories.items[i].iter().map(|&c| CategoryId(c as u32)).collect())
        .collect();
    let catalog = CategoryCatalog::new(categories.names.clone(), membership)?;

    let mut attrs = Vec::new();
    for (a, name) in attributes.names.iter().enumerate() {
        let mut labels = Vec::with_capacity(users.len());
        for u in users.originals() {
            let values = attributes.values.get(u).ok_or_else(|| IngestError::MissingAttribute {
                user: u.clone(),
                attribute: name.clone(),
                path: users_path.to_path_buf(),
            })?;
            labels.push(values[a].as_str());
        }
        let mut classes: Vec<&str> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        classes.sort_by_key(|c| class_key(c));
        let values = labels
            .iter()
            .map(|l| classes.iter().position(|c| c == l).unwrap() as u32)
            .collect();
        attrs.push(Attribute::new(
            name.clone(),
            classes.iter().map(|c| c.to_string()).collect(),
            values,
        )?);
    }
    let unknown_users = attributes
        .values
        .keys()
        .filter(|u| prov_users.get(u).is_none())
        .count();
    if unknown_users > 0 {
        warn!("{unknown_users} users in the attribute file have no interactions; ignored");
    }
    let attribute_classes = attrs.iter().map(|a| (a.name.clone(), a.present_classes())).collect();
    let user_attributes = UserAttributes::new(users.len(), attrs)?;

    let (interactions, split, train_only) = split_interactions(&remapped, config.split)?;
    if train_only > 0 {
        warn!("{train_only} users have no test interactions and are excluded from accuracy metrics");
    }
    let train_rows = split.iter().filter(|s| **s == Split::Train).count();
    let summary = IngestSummary {
        raw_interactions: raw.len(),
        raw_users,
        raw_items: raw_items.len(),
        zero_category_items: zero,
        users: users.len(),
        items: items.len(),
        interactions: interactions.len(),
        categories: catalog.num_categories(),
        train_interactions: train_rows,
        test_interactions: interactions.len() - train_rows,
        train_only_users: train_only,
        attribute_classes,
    };
    let dataset = Dataset::new(users, items, interactions, split, catalog, user_attributes)?;
    Ok((dataset, summary))
}

/// Returns interactions in split order with their tags and the number of
/// users without test rows.
fn split_interactions(rows: &[Interaction], split: SplitConfig) -> Result<(Vec<Interaction>, Vec<Split>, usize)> {
    match split {
        SplitConfig::TemporalPerUser { fraction } => {
            let s = temporal_split(rows, fraction)?;
            let tags = std::iter::repeat(Split::Train)
                .take(s.train.len())
                .chain(std::iter::repeat(Split::Test).take(s.test.len()))
                .collect();
            let n = s.train_only_users.len();
            let mut all = s.train;
            all.extend(s.test);
            Ok((all, tags, n))
        }
        SplitConfig::TemporalGlobal { fraction } => {
            let mut sorted = rows.to_vec();
            sorted.sort_by_key(|x| (x.timestamp, x.user, x.item));
            let cut = train_count(sorted.len(), fraction);
            let test_rows = sorted.split_off(cut);
            let in_train: BTreeSet<UserId> = sorted.iter().map(|x| x.user).collect();
            let (test, orphan): (Vec<_>, Vec<_>) = test_rows.into_iter().partition(|x| in_train.contains(&x.user));
            if !orphan.is_empty() {
                warn!("dropping {} test rows of users without training history", orphan.len());
            }
            let with_test: BTreeSet<UserId> = test.iter().map(|x| x.user).collect();
            let train_only = in_train.len() - with_test.len();
            let tags = std::iter::repeat(Split::Train)
                .take(sorted.len())
                .chain(std::iter::repeat(Split::Test).take(test.len()))
                .collect();
            sorted.extend(test);
            Ok((sorted, tags, train_only))
        }
    }
}
