use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairrank::bundle::{read_bundle, write_bundle};
use fairrank::harness::{
    prepare, run_experiment, sweep, sweep_csv, ExperimentConfig, ModelKind, Result, Stage, StageError, StageExt,
    SweepParameter,
};
use fairrank::ingest::{ingest, Format, IngestConfig, SplitConfig};
use fairrank::io;
use fairrank::report::emit_report;
use fairrank_core::fairness::{build_counterfactual_profile, rerank_all, Normalization, RerankConfig};
use fairrank_core::metrics::{accuracy_report, bias_report};
use fairrank_core::recommenders::{top_n_candidates, train_biased_mf, train_wmf, FactorModel, TrainConfig};
use fairrank_core::preprocess::latest_per_pair;
use fairrank_core::{Dataset, ScoreSet, Split};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fairrank", version, about = "Counterfactually fair category-aware re-ranking")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw dataset and write a canonical bundle.
    Ingest(IngestArgs),
    /// Train a factor model on a bundle's training split.
    Train(TrainArgs),
    /// Write top-N candidate scores of a trained model as TSV.
    Score(ScoreArgs),
    /// Write the dense prediction matrix of a trained model.
    ExportScores(ExportArgs),
    /// Build the counterfactual profile and re-rank candidate lists.
    Rerank(RerankArgs),
    /// Bias and accuracy metrics of a ranked-list file.
    Evaluate(EvaluateArgs),
    /// Sweep beta or gamma and write a long-format CSV.
    Sweep(SweepArgs),
    /// Regenerate report.md / report.csv of a run directory.
    Report {
        /// Run directory.
        run: PathBuf,
    },
    /// Full experiment into a run directory.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Ml100k,
    Ml1m,
    Tsv,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory with the raw files.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, value_enum, default_value = "ml100k")]
    format: FormatArg,
    #[arg(long, default_value_t = 5)]
    k_core: usize,
    /// Per-user temporal train fraction.
    #[arg(long, default_value_t = 0.8)]
    split_fraction: f64,
    #[arg(long)]
    keep_unknown_genre: bool,
    /// Fail on items without categories instead of dropping them.
    #[arg(long)]
    strict: bool,
    /// Bundle output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Wmf,
    BiasedMf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum, default_value = "wmf")]
    model: ModelArg,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    regularization: Option<f64>,
    #[arg(long)]
    confidence_alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Model JSON from `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    top_n: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "f64")]
    dtype: DtypeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    PerStep,
    Global,
    None,
}

#[derive(Args)]
struct RerankParams {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Final list length.
    #[arg(long)]
    k: Option<usize>,
    /// Candidate pool size N.
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long, value_enum)]
    normalization: Option<NormArg>,
}

impl RerankParams {
    fn apply(&self, c: &mut RerankConfig) {
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.top_n {
            c.top_n = Some(v);
        }
        if let Some(n) = self.normalization {
            c.normalization = match n {
                NormArg::PerStep => Normalization::PerStep,
                NormArg::Global => Normalization::Global,
                NormArg::None => Normalization::None,
            };
        }
    }
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Candidate scores (TSV, or dense `.bin`).
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    attribute: String,
    #[command(flatten)]
    params: RerankParams,
    /// Where to write the profile JSON.
    #[arg(long)]
    profile_out: Option<PathBuf>,
    /// Ranked-list TSV output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Ranked-list TSV (`user, rank, item, score`).
    #[arg(long)]
    lists: PathBuf,
    /// Attributes to report; repeatable. Default: all.
    #[arg(long)]
    attribute: Vec<String>,
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// JSON output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config, JSON or TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// MovieLens-100K directory (overrides the config's dataset paths).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Attributes to evaluate; repeatable.
    #[arg(long)]
    attribute: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    params: RerankParams,
}

impl ExperimentArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = &self.data_dir {
            c.dataset.dir = Some(dir.clone());
        }
        if c.dataset.dir.is_none() && c.dataset.interactions.is_none() {
            bail!("no dataset given: pass --config or --data-dir");
        }
        if !self.attribute.is_empty() {
            c.attributes = self.attribute.clone();
        }
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        self.params.apply(&mut c.rerank);
        Ok(c)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_enum, default_value = "beta")]
    parameter: ParamArg,
    /// Comma-separated grid; defaults to the config's grid.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Beta,
    Gamma,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Run directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_bundle(dir: &Path) -> Result<Dataset> {
    read_bundle(dir).map(|(d, _)| d).stage(Stage::Ingest)
}

fn load_scores(path: &Path, dataset: &Dataset, n: usize) -> anyhow::Result<ScoreSet> {
    if path.extension().is_some_and(|e| e == "bin") {
        io::read_dense_scores(path, dataset, n)
    } else {
        io::read_scores_tsv(path, dataset, n)
    }
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let config = IngestConfig {
        format: match a.format {
            FormatArg::Ml100k => Format::Movielens100k,
            FormatArg::Ml1m => Format::Movielens1m,
            FormatArg::Tsv => Format::GenericTsv,
        },
        dir: Some(a.data_dir.clone()),
        k_core: a.k_core,
        split: SplitConfig::TemporalPerUser {
            fraction: a.split_fraction,
        },
        keep_unknown_genre: a.keep_unknown_genre,
        strict_categories: a.strict,
        ..IngestConfig::default()
    };
    let (dataset, summary) = ingest(&config).stage(Stage::Ingest)?;
    write_bundle(&a.out, &dataset, &config, &summary).stage(Stage::Ingest)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let dataset = load_bundle(&a.bundle)?;
    let mut t = TrainConfig::default();
    if let Some(v) = a.dim {
        t.dim = v;
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = a.regularization {
        t.regularization = v;
    }
    if let Some(v) = a.confidence_alpha {
        t.confidence_alpha = v;
    }
    if let Some(v) = a.seed {
        t.seed = v;
    }
    let rows: Vec<_> = dataset.interactions_in(Split::Train).copied().collect();
    let (model, report) = match a.model {
        ModelArg::Wmf => train_wmf(dataset.num_users(), dataset.num_items(), &rows, &t),
        ModelArg::BiasedMf => train_biased_mf(dataset.num_users(), dataset.num_items(), &latest_per_pair(&rows), &t),
    }
    .stage(Stage::Train)?;
    io::write_json(&a.out, &model).stage(Stage::Train)?;
    if report.ill_conditioned_solves > 0 {
        log::warn!("{} ill-conditioned ALS solves", report.ill_conditioned_solves);
    }
    println!("final loss {}", report.losses.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let dataset = load_bundle(&a.bundle)?;
    let model: FactorModel = io::read_json(&a.model).stage(Stage::Score)?;
    let scores = top_n_candidates(&model, &dataset.item_sets(Split::Train), a.top_n, a.k).stage(Stage::Score)?;
    io::write_scores_tsv(&a.out, &scores, &dataset).stage(Stage::Score)
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let dataset = load_bundle(&a.bundle)?;
    let model: FactorModel = io::read_json(&a.model).stage(Stage::Score)?;
    let dtype = match a.dtype {
        DtypeArg::F32 => io::Dtype::F32,
        DtypeArg::F64 => io::Dtype::F64,
    };
    io::write_dense_scores(&a.out, &model, &dataset, dtype).stage(Stage::Score)
}

fn cmd_rerank(a: &RerankArgs) -> Result<()> {
    let dataset = load_bundle(&a.bundle)?;
    let mut config = RerankConfig {
        top_n: Some(1000),
        ..RerankConfig::default()
    };
    a.params.apply(&mut config);
    config.validate().stage(Stage::Config)?;
    let n = config.top_n.unwrap_or(dataset.num_items());
    let scores = load_scores(&a.scores, &dataset, n).stage(Stage::Score)?;
    let fractions = dataset.catalog().fraction_table();
    let profile = build_counterfactual_profile(
        &dataset.histories(Split::Train),
        dataset.attributes(),
        &a.attribute,
        dataset.catalog().names(),
        &fractions,
        Default::default(),
        fairrank_core::fairness::DEFAULT_SMOOTHING,
    )
    .stage(Stage::Profile)?;
    if let Some(p) = &a.profile_out {
        io::write_profile(p, &profile).stage(Stage::Profile)?;
    }
    let attribute = dataset.attributes().get(&a.attribute).stage(Stage::Rerank)?;
    let lists = rerank_all(&scores, &profile, attribute, &fractions, &config).stage(Stage::Rerank)?;
    io::write_lists(&a.out, &lists, &scores, &dataset).stage(Stage::Rerank)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let dataset = load_bundle(&a.bundle)?;
    let lists = io::read_lists(&a.lists, &dataset).stage(Stage::Evaluate)?;
    let fractions = dataset.catalog().fraction_table();
    let attributes: Vec<String> = if a.attribute.is_empty() {
        dataset.attributes().names().map(str::to_string).collect()
    } else {
        a.attribute.clone()
    };
    let mut bias = serde_json::Map::new();
    for name in &attributes {
        let attr = dataset.attributes().get(name).stage(Stage::Evaluate)?;
        let report = bias_report(attr, &lists, &fractions, dataset.catalog().names()).stage(Stage::Evaluate)?;
        bias.insert(name.clone(), serde_json::to_value(report).unwrap());
    }
    let acc = accuracy_report(&lists, &dataset.item_sets(Split::Test), a.k);
    let out = json!({
        "bias": bias,
        "accuracy": { "k": acc.k, "ndcg": acc.ndcg, "hit_ratio": acc.hit_ratio, "users": acc.per_user.len() },
    });
    let text = serde_json::to_string_pretty(&out).unwrap() + "\n";
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).stage(Stage::Evaluate),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let config = a.experiment.resolve().stage(Stage::Config)?;
    let parameter = match a.parameter {
        ParamArg::Beta => SweepParameter::Beta,
        ParamArg::Gamma => SweepParameter::Gamma,
    };
    let grid = if !a.grid.is_empty() {
        a.grid.clone()
    } else if parameter == SweepParameter::Beta {
        config.sweep.beta.clone()
    } else {
        config.sweep.gamma.clone()
    };
    let prepared = prepare(&config)?;
    let rows = sweep(&prepared, parameter, &grid)?;
    fs::write(&a.out, sweep_csv(&rows))
        .with_context(|| format!("writing {}", a.out.display()))
        .stage(Stage::Report)
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let mut config = a.experiment.resolve().stage(Stage::Config)?;
    if let Some(out) = &a.out {
        config.output = out.clone();
    }
    if config.model.kind == ModelKind::External {
        log::info!("using external scores from {:?}", config.model.scores);
    }
    let outcome = run_experiment(&config)?;
    print!(
        "{}",
        fs::read_to_string(outcome.dir.join(fairrank::report::REPORT_MD)).unwrap_or_default()
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::ExportScores(a) => cmd_export(a),
        Command::Rerank(a) => cmd_rerank(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report { run } => emit_report(run).stage(Stage::Report),
        Command::Run(a) => cmd_run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(StageError {
                stage: Stage::Config,
                source: e.into(),
            }),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {:#}", e.stage, e.source);
            ExitCode::FAILURE
        }
    }
}
