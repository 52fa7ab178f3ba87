//! End-to-end experiments: ingest, train or load scores, build profiles,
//! re-rank, evaluate, write a run directory. Also β/γ sweeps and the
//! optional model grid search.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use fairrank_core::fairness::{
    build_counterfactual_profile, rerank_all, CounterfactualProfile, RerankConfig, TimestampWeighting,
    DEFAULT_SMOOTHING,
};
use fairrank_core::metrics::{accuracy_report, bias_report, AccuracyReport, BiasReport};
use fairrank_core::preprocess::latest_per_pair;
use fairrank_core::recommenders::{top_n_candidates, train_biased_mf, train_wmf, FactorModel, TrainConfig, TrainReport};
use fairrank_core::domain::FractionTable;
use fairrank_core::{Dataset, Interaction, ItemId, RankedList, ScoreSet, Split};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{self, IngestConfig, IngestSummary};
use crate::io;
use crate::report;

/// Pipeline stage, used to tag errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Train,
    Score,
    Profile,
    Rerank,
    Evaluate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Score => "score",
            Stage::Profile => "profile",
            Stage::Rerank => "rerank",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source:#}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: anyhow::Error,
}

pub type Result<T, E = StageError> = std::result::Result<T, E>;

pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Wmf,
    BiasedMf,
    /// Scores read from `ModelConfig::scores`.
    External,
}

/// Cartesian grid searched on baseline HitRatio@k; empty axes keep the
/// value from `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelGrid {
    pub dim: Vec<usize>,
    pub regularization: Vec<f64>,
    pub confidence_alpha: Vec<f64>,
    pub epochs: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl ModelGrid {
    pub fn is_empty(&self) -> bool {
        self.dim.is_empty()
            && self.regularization.is_empty()
            && self.confidence_alpha.is_empty()
            && self.epochs.is_empty()
            && self.learning_rate.is_empty()
    }

    pub fn points(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        fn axis<T: Copy>(v: &[T], default: T) -> Vec<T> {
            if v.is_empty() {
                vec![default]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for &dim in &axis(&self.dim, base.dim) {
            for &regularization in &axis(&self.regularization, base.regularization) {
                for &confidence_alpha in &axis(&self.confidence_alpha, base.confidence_alpha) {
                    for &epochs in &axis(&self.epochs, base.epochs) {
                        for &learning_rate in &axis(&self.learning_rate, base.learning_rate) {
                            out.push(TrainConfig {
                                dim,
                                regularization,
                                confidence_alpha,
                                epochs,
                                learning_rate,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub train: TrainConfig,
    /// External score file (TSV, or dense binary when ending in `.bin`).
    pub scores: Option<PathBuf>,
    pub grid: ModelGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrids {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for SweepGrids {
    fn default() -> Self {
        Self {
            beta: (0..=8).map(|i| i as f64 / 10.0).collect(),
            gamma: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: IngestConfig,
    pub model: ModelConfig,
    /// Attributes to evaluate; empty means every attribute in the data.
    pub attributes: Vec<String>,
    pub rerank: RerankConfig,
    pub weighting: TimestampWeighting,
    pub smoothing: f64,
    pub sweep: SweepGrids,
    /// Overrides `model.train.seed` when set.
    pub seed: Option<u64>,
    /// Run directory. Not part of the recorded manifest.
    #[serde(skip_serializing)]
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: IngestConfig::default(),
            model: ModelConfig::default(),
            attributes: Vec::new(),
            rerank: RerankConfig {
                top_n: Some(1000),
                ..RerankConfig::default()
            },
            weighting: TimestampWeighting::default(),
            smoothing: DEFAULT_SMOOTHING,
            sweep: SweepGrids::default(),
            seed: None,
            output: PathBuf::from("runs/latest"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON or TOML file (by extension; anything but `.toml` is JSON).
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(config)
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.model.train.clone();
        if let Some(seed) = self.seed {
            t.seed = seed;
        }
        t
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.rerank.validate()?;
        self.train_config().validate()?;
        self.dataset.validate()?;
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            bail!("smoothing must be non-negative");
        }
        if let TimestampWeighting::MinMaxRecency { floor } = self.weighting {
            if !(floor > 0.0 && floor <= 1.0) {
                bail!("recency floor must lie in (0, 1]");
            }
        }
        for &b in &self.sweep.beta {
            if !(0.0..=1.0).contains(&b) {
                bail!("beta grid value {b} outside [0, 1]");
            }
        }
        for &g in &self.sweep.gamma {
            if !(0.0..=1.0).contains(&g) {
                bail!("gamma grid value {g} outside [0, 1]");
            }
        }
        if self.model.kind == ModelKind::External && self.model.scores.is_none() {
            bail!("external model needs a `scores` path");
        }
        Ok(())
    }
}

/// One evaluated point of the model grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub train: TrainConfig,
    pub hit_ratio: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub kind: ModelKind,
    pub train: Option<TrainConfig>,
    pub report: Option<TrainReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridPoint>,
}

/// Everything shared by all re-ranking passes of one experiment.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    pub summary: IngestSummary,
    pub fractions: FractionTable,
    pub histories: Vec<Vec<Interaction>>,
    pub test_sets: Vec<Vec<ItemId>>,
    pub scores: ScoreSet,
    pub baseline: Vec<RankedList>,
    pub model: ModelRecord,
    pub input_hashes: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn train_model(kind: ModelKind, dataset: &Dataset, train: &TrainConfig) -> anyhow::Result<(FactorModel, TrainReport)> {
    let rows: Vec<Interaction> = dataset.interactions_in(Split::Train).copied().collect();
    let (n_users, n_items) = (dataset.num_users(), dataset.num_items());
    Ok(match kind {
        ModelKind::Wmf => train_wmf(n_users, n_items, &rows, train)?,
        ModelKind::BiasedMf => train_biased_mf(n_users, n_items, &latest_per_pair(&rows), train)?,
        ModelKind::External => bail!("external scores are loaded, not trained"),
    })
}

fn pool_size(config: &ExperimentConfig, dataset: &Dataset) -> usize {
    config.rerank.top_n.unwrap_or(dataset.num_items())
}

/// Ingests the data and produces baseline scores and top-k lists.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate().stage(Stage::Config)?;
    let (dataset, summary) = ingest::ingest(&config.dataset).stage(Stage::Ingest)?;
    info!(
        "ingested {} users, {} items, {} interactions",
        summary.users, summary.items, summary.interactions
    );
    let mut input_hashes = BTreeMap::new();
    for path in [
        config.dataset.interactions_path(),
        config.dataset.users_path(),
        config.dataset.items_path(),
    ] {
        let path = path.stage(Stage::Ingest)?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        input_hashes.insert(name, sha256_file(&path).stage(Stage::Ingest)?);
    }
    if let Some(p) = &config.model.scores {
        if config.model.kind == ModelKind::External {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            input_hashes.insert(name, sha256_file(p).stage(Stage::Score)?);
        }
    }

    let fractions = dataset.catalog().fraction_table();
    let histories = dataset.histories(Split::Train);
    let train_items = dataset.item_sets(Split::Train);
    let test_sets = dataset.item_sets(Split::Test);
    let n = pool_size(config, &dataset);
    let k = config.rerank.k;

    let (scores, model) = match config.model.kind {
        ModelKind::External => {
            let path = config.model.scores.as_ref().unwrap();
            let scores = if path.extension().is_some_and(|e| e == "bin") {
                io::read_dense_scores(path, &dataset, n)
            } else {
                io::read_scores_tsv(path, &dataset, n)
            }
            .stage(Stage::Score)?;
            let record = ModelRecord {
                kind: ModelKind::External,
                train: None,
                report: None,
                grid: Vec::new(),
            };
            (scores, record)
        }
        kind => {
            let base = config.train_config();
            let points = if config.model.grid.is_empty() {
                vec![base]
            } else {
                config.model.grid.points(&base)
            };
            let mut best: Option<(ScoreSet, TrainConfig, TrainReport, f64)> = None;
            let mut grid = Vec::new();
            for point in points {
                let (model, report) = train_model(kind, &dataset, &point).stage(Stage::Train)?;
                let scores = top_n_candidates(&model, &train_items, n, k).stage(Stage::Score)?;
                if !config.model.grid.is_empty() {
                    let acc = accuracy_report(&scores.top_k(k), &test_sets, k);
                    info!("grid point {point:?}: HitRatio@{k} = {:.4}", acc.hit_ratio);
                    grid.push(GridPoint {
                        train: point.clone(),
                        hit_ratio: acc.hit_ratio,
                        ndcg: acc.ndcg,
                    });
                    if best.as_ref().is_some_and(|b| b.3 >= acc.hit_ratio) {
                        continue;
                    }
                    best = Some((scores, point, report, acc.hit_ratio));
                } else {
                    best = Some((scores, point, report, 0.0));
                }
            }
            let (scores, train, report, _) = best.expect("at least one grid point");
            let record = ModelRecord {
                kind,
                train: Some(train),
                report: Some(report),
                grid,
            };
            (scores, record)
        }
    };
    let baseline = scores.top_k(k);
    Ok(Prepared {
        config: config.clone(),
        dataset,
        summary,
        fractions,
        histories,
        test_sets,
        scores,
        baseline,
        model,
        input_hashes,
    })
}

impl Prepared {
    /// Attributes to evaluate, in the configured or dataset order.
    pub fn attributes(&self) -> Vec<String> {
        if self.config.attributes.is_empty() {
            self.dataset.attributes().names().map(str::to_string).collect()
        } else {
            self.config.attributes.clone()
        }
    }

    pub fn profile(&self, attribute: &str) -> Result<CounterfactualProfile> {
        build_counterfactual_profile(
            &self.histories,
            self.dataset.attributes(),
            attribute,
            self.dataset.catalog().names(),
            &self.fractions,
            self.config.weighting,
            self.config.smoothing,
        )
        .stage(Stage::Profile)
    }

    pub fn rerank(&self, profile: &CounterfactualProfile, config: &RerankConfig) -> Result<Vec<RankedList>> {
        let attribute = self.dataset.attributes().get(&profile.attribute).stage(Stage::Rerank)?;
        rerank_all(&self.scores, profile, attribute, &self.fractions, config).stage(Stage::Rerank)
    }

    pub fn bias(&self, attribute: &str, lists: &[RankedList]) -> Result<BiasReport> {
        let attr = self.dataset.attributes().get(attribute).stage(Stage::Evaluate)?;
        bias_report(attr, lists, &self.fractions, self.dataset.catalog().names()).stage(Stage::Evaluate)
    }

    pub fn accuracy(&self, lists: &[RankedList]) -> AccuracyReport {
        accuracy_report(lists, &self.test_sets, self.config.rerank.k)
    }

    /// Mean training-history category proportion of each class (unweighted).
    pub fn training_proportions(&self, attribute: &str) -> Result<ClassProportions> {
        let attr = self.dataset.attributes().get(attribute).stage(Stage::Evaluate)?;
        let width = self.fractions.num_categories();
        let mut sums = vec![vec![0.0; width]; attr.classes.len()];
        let mut counts = vec![0usize; attr.classes.len()];
        for (u, history) in self.histories.iter().enumerate() {
            if history.is_empty() {
                continue;
            }
            let class = attr.values[u] as usize;
            counts[class] += 1;
            let share = 1.0 / history.len() as f64;
            for x in history {
                for (c, v) in self.fractions.row(x.item).iter().enumerate() {
                    sums[class][c] += share * v;
                }
            }
        }
        let mut out = ClassProportions::default();
        for (class, (sum, n)) in attr.classes.iter().zip(sums.into_iter().zip(counts)) {
            if n > 0 {
                out.classes.push(class.clone());
                out.values.push(sum.into_iter().map(|v| v / n as f64).collect());
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ClassProportions {
    pub classes: Vec<String>,
    /// `values[class][category]`
    pub values: Vec<Vec<f64>>,
}

/// Headline numbers of one list set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub ndcg: f64,
    pub hit_ratio: f64,
    pub users: usize,
}

impl From<&AccuracyReport> for AccuracySummary {
    fn from(r: &AccuracyReport) -> Self {
        Self {
            ndcg: r.ndcg,
            hit_ratio: r.hit_ratio,
            users: r.per_user.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeBias {
    pub training: ClassProportions,
    pub original: BiasReport,
    pub fair: BiasReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyFile {
    pub k: usize,
    pub original: AccuracySummary,
    pub fair: BTreeMap<String, AccuracySummary>,
}

/// `manifest.json` of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub input_hashes: BTreeMap<String, String>,
    pub ingest: IngestSummary,
    pub model: ModelRecord,
    pub attributes: Vec<String>,
}

pub const RUN_MANIFEST: &str = "manifest.json";
pub const BIAS_REPORT: &str = "bias_report.json";
pub const ACCURACY_REPORT: &str = "accuracy_report.json";
pub const BASELINE_LISTS: &str = "baseline.tsv";

/// Results of one run, as also written to disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub bias: BTreeMap<String, AttributeBias>,
    pub accuracy: AccuracyFile,
    pub original_lists: Vec<RankedList>,
    pub fair_lists: BTreeMap<String, Vec<RankedList>>,
}

/// Full experiment. Outputs are written to a sibling temporary directory
/// and renamed into place, so a failed run leaves nothing behind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let prepared = prepare(config)?;
    run_prepared(&prepared, &config.output)
}

pub fn run_prepared(prepared: &Prepared, output: &Path) -> Result<RunOutcome> {
    let config = &prepared.config;
    let attributes = prepared.attributes();
    let mut bias = BTreeMap::new();
    let mut fair_acc = BTreeMap::new();
    let mut fair_lists = BTreeMap::new();
    let mut profiles = BTreeMap::new();
    let original_acc = AccuracySummary::from(&prepared.accuracy(&prepared.baseline));
    for attribute in &attributes {
        let profile = prepared.profile(attribute)?;
        let fair = prepared.rerank(&profile, &config.rerank)?;
        bias.insert(
            attribute.clone(),
            AttributeBias {
                training: prepared.training_proportions(attribute)?,
                original: prepared.bias(attribute, &prepared.baseline)?,
                fair: prepared.bias(attribute, &fair)?,
            },
        );
        fair_acc.insert(attribute.clone(), AccuracySummary::from(&prepared.accuracy(&fair)));
        fair_lists.insert(attribute.clone(), fair);
        profiles.insert(attribute.clone(), profile);
    }
    let accuracy = AccuracyFile {
        k: config.rerank.k,
        original: original_acc,
        fair: fair_acc,
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        input_hashes: prepared.input_hashes.clone(),
        ingest: prepared.summary.clone(),
        model: prepared.model.clone(),
        attributes: attributes.clone(),
    };

    let tmp = staging_dir(output).stage(Stage::Report)?;
    let written = (|| -> anyhow::Result<()> {
        fs::create_dir_all(&tmp)?;
        io::write_json(&tmp.join(RUN_MANIFEST), &manifest)?;
        io::write_json(&tmp.join(BIAS_REPORT), &bias)?;
        io::write_json(&tmp.join(ACCURACY_REPORT), &accuracy)?;
        io::write_lists(&tmp.join(BASELINE_LISTS), &prepared.baseline, &prepared.scores, &prepared.dataset)?;
        for attribute in &attributes {
            io::write_profile(&tmp.join(format!("profile_{attribute}.json")), &profiles[attribute])?;
            io::write_lists(
                &tmp.join(format!("reranked_{attribute}.tsv")),
                &fair_lists[attribute],
                &prepared.scores,
                &prepared.dataset,
            )?;
        }
        report::emit_report(&tmp)?;
        if output.exists() {
            fs::remove_dir_all(output).with_context(|| format!("replacing {}", output.display()))?;
        }
        fs::rename(&tmp, output).with_context(|| format!("moving run into {}", output.display()))?;
        Ok(())
    })();
    if let Err(e) = written {
        let _ = fs::remove_dir_all(&tmp);
        return Err(StageError {
            stage: Stage::Report,
            source: e,
        });
    }
    Ok(RunOutcome {
        dir: output.to_path_buf(),
        bias,
        accuracy,
        original_lists: prepared.baseline.clone(),
        fair_lists,
    })
}

fn staging_dir(output: &Path) -> anyhow::Result<PathBuf> {
    let name = output
        .file_name()
        .ok_or_else(|| anyhow!("output path {} has no final component", output.display()))?;
    let parent = output.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    Ok(parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Beta,
    Gamma,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Beta => "beta",
            SweepParameter::Gamma => "gamma",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub attribute: String,
    pub parameter: SweepParameter,
    pub value: f64,
    pub ndcg: f64,
    pub hit_ratio: f64,
    pub cc_bias: f64,
    pub cdcg_bias: f64,
}

/// One row per grid value per attribute; profiles are built once per
/// attribute and shared by every grid point.
pub fn sweep(prepared: &Prepared, parameter: SweepParameter, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(anyhow!("sweep grid is empty")).stage(Stage::Config);
    }
    let mut rows = Vec::new();
    for attribute in prepared.attributes() {
        let profile = prepared.profile(&attribute)?;
        let points: Vec<Result<SweepRow>> = grid
            .par_iter()
            .map(|&value| {
                let mut cfg = prepared.config.rerank;
                match parameter {
                    SweepParameter::Beta => cfg.beta = value,
                    SweepParameter::Gamma => cfg.gamma = value,
                }
                cfg.validate().stage(Stage::Config)?;
                let lists = prepared.rerank(&profile, &cfg)?;
                let bias = prepared.bias(&attribute, &lists)?;
                let acc = prepared.accuracy(&lists);
                Ok(SweepRow {
                    attribute: attribute.clone(),
                    parameter,
                    value,
                    ndcg: acc.ndcg,
                    hit_ratio: acc.hit_ratio,
                    cc_bias: bias.cc_total(),
                    cdcg_bias: bias.cdcg_total(),
                })
            })
            .collect();
        for p in points {
            rows.push(p?);
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("attribute,parameter,value,ndcg,hit_ratio,cc_bias,cdcg_bias\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.attribute, r.parameter, r.value, r.ndcg, r.hit_ratio, r.cc_bias, r.cdcg_bias
        ));
    }
    out
}
