//! Batch command-line frontend.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{self, build_training_pairs, split_validation, DrawPolicy, PairDataset};
use crate::ensemble::{self, BlendMember, BlendSpec, Normalization, DEFAULT_DRAW_THRESHOLD};
use crate::error::Error;
use crate::evaluation::{weighted_accuracy, EvaluationReport};
use crate::pooling::{self, PoolingMethod, TokenFile};
use crate::ranker::{self, HyperParams, RankerModel};

pub const THREADS_ENV: &str = "HEADLINE_RANK_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "headline-rank",
    version,
    about = "Pairwise headline ranking over sentence embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pool an HST1 token-embedding file into an HSE1 sentence-embedding file.
    Pool(PoolArgs),
    /// Train one ranker on a pairs file and an embedding file.
    Train(TrainArgs),
    /// Blend one or more rankers and label every pair.
    Predict(PredictArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Compare sentence representations (layers x pooling methods).
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mean,
    Cls,
}

impl From<MethodArg> for PoolingMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mean => PoolingMethod::MeanOverTokens,
            MethodArg::Cls => PoolingMethod::FirstToken,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    Zscore,
    None,
}

impl From<NormalizeArg> for Normalization {
    fn from(n: NormalizeArg) -> Self {
        match n {
            NormalizeArg::Zscore => Normalization::ZScore,
            NormalizeArg::None => Normalization::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DrawPolicyArg {
    Exclude,
    DuplicateBothDirections,
}

impl From<DrawPolicyArg> for DrawPolicy {
    fn from(d: DrawPolicyArg) -> Self {
        match d {
            DrawPolicyArg::Exclude => DrawPolicy::Exclude,
            DrawPolicyArg::DuplicateBothDirections => DrawPolicy::BothDirections,
        }
    }
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    pub token_file: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    pub method: MethodArg,
    #[arg(long)]
    pub out: PathBuf,
}

/// Booster settings shared by `train` and `ablate`.
#[derive(Debug, Clone, Args)]
pub struct BoostArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
    pub trees: u32,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    pub depth: u32,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(2..=256))]
    pub bins: u32,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub min_leaf: u32,
    /// Rounds without validation improvement before stopping (0 disables).
    #[arg(long, default_value_t = 50)]
    pub early_stop: u32,
    #[arg(long, default_value_t = 3.0)]
    pub l2: f64,
    #[arg(long, value_enum, default_value = "exclude")]
    pub draw_policy: DrawPolicyArg,
    #[arg(long, default_value_t = 0.2)]
    pub valid_frac: f64,
}

impl BoostArgs {
    fn params(&self, seed: u64) -> Result<HyperParams, CliError> {
        let params = HyperParams {
            n_trees: self.trees as usize,
            max_depth: self.depth as usize,
            learning_rate: self.lr,
            n_bins: self.bins as usize,
            min_samples_leaf: self.min_leaf as usize,
            early_stop_rounds: self.early_stop as usize,
            l2_leaf_reg: self.l2,
            seed,
        };
        params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.valid_frac > 0.0 && self.valid_frac < 1.0) {
            return Err(CliError::Usage(format!(
                "--valid-frac must lie in (0, 1), got {}",
                self.valid_frac
            )));
        }
        Ok(params)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[command(flatten)]
    pub boost: BoostArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Print losses every N iterations (0 silences per-iteration output).
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long = "model", value_delimiter = ',', required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long = "embeddings", value_delimiter = ',', required = true)]
    pub embeddings: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "zscore")]
    pub normalize: NormalizeArg,
    #[arg(long, default_value_t = DEFAULT_DRAW_THRESHOLD)]
    pub draw_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold pairs file.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Predictions file written by `predict`.
    #[arg(long)]
    pub pred: PathBuf,
    /// List up to N most confident left/right confusions.
    #[arg(long, default_value_t = 0)]
    pub errors: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Token files as `LABEL=PATH` (or `PATH`, labelled by file stem).
    #[arg(long = "token-files", value_delimiter = ',', required = true)]
    pub token_files: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mean,cls")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Independent runs per cell; each uses seed + run index.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeats: u32,
    /// Fraction of pairs held out for testing in each run.
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[command(flatten)]
    pub boost: BoostArgs,
    #[arg(long, default_value_t = DEFAULT_DRAW_THRESHOLD)]
    pub draw_threshold: f64,
    /// Also write the grid as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

fn require_exists<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::Runtime(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file does not exist"),
            )));
        }
    }
    Ok(())
}

/// Size rayon's global pool from `HEADLINE_RANK_THREADS` (unset or 0 = automatic).
pub fn init_threads() {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        // Fails only if the pool is already built, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Pool(a) => cmd_pool(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Ablate(a) => cmd_ablate(&a).map(|_| ()),
    }
}

pub fn cmd_pool(args: &PoolArgs) -> Result<(), CliError> {
    require_exists([args.token_file.as_path()])?;
    let (rows, dim) = pooling::pool_file(&args.token_file, args.method.into(), &args.out)?;
    println!(
        "pooled {rows} sequences (dim {dim}, method {}) -> {}",
        PoolingMethod::from(args.method).as_str(),
        args.out.display()
    );
    Ok(())
}

fn train_on_split(
    train: &PairDataset,
    valid: &PairDataset,
    store: &data::EmbeddingStore,
    boost: &BoostArgs,
    params: &HyperParams,
    log_every: usize,
) -> Result<RankerModel, CliError> {
    let policy = boost.draw_policy.into();
    let train_set = build_training_pairs(train, store, policy)?;
    let valid_set = build_training_pairs(valid, store, policy)?;
    let model = ranker::train_with_progress(&train_set, &valid_set, params, |log| {
        if log_every > 0 && (log.iteration + 1) % log_every == 0 {
            match log.valid_loss {
                Some(v) => println!(
                    "iter {:>5}  train_loss {:.6}  valid_loss {:.6}  valid_acc {:.4}  best {}",
                    log.iteration + 1,
                    log.train_loss,
                    v,
                    log.valid_accuracy.unwrap_or(f64::NAN),
                    log.best_iteration + 1
                ),
                None => println!("iter {:>5}  train_loss {:.6}", log.iteration + 1, log.train_loss),
            }
        }
    })?;
    Ok(model)
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let params = args.boost.params(args.seed)?;
    require_exists([args.pairs.as_path(), args.embeddings.as_path()])?;
    let dataset = data::load_pairs(&args.pairs)?;
    let store = data::load_embeddings(&args.embeddings)?;
    let (train, valid) = split_validation(&dataset, args.boost.valid_frac, args.seed)?;
    println!(
        "pairs: {} train, {} validation; embeddings: {} x {}",
        train.len(),
        valid.len(),
        store.len(),
        store.dim()
    );
    let model = train_on_split(&train, &valid, &store, &args.boost, &params, args.log_every)?;
    ranker::save_model(&model, &args.out)?;
    println!(
        "best_iteration {} ({} trees) -> {}",
        model.best_iteration,
        model.trees.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    if args.models.len() != args.embeddings.len() {
        return Err(CliError::Usage(format!(
            "{} models but {} embedding files",
            args.models.len(),
            args.embeddings.len()
        )));
    }
    if !(args.draw_threshold.is_finite() && args.draw_threshold >= 0.0) {
        return Err(CliError::Usage("--draw-threshold must be non-negative".into()));
    }
    require_exists(
        std::iter::once(args.pairs.as_path())
            .chain(args.models.iter().map(PathBuf::as_path))
            .chain(args.embeddings.iter().map(PathBuf::as_path)),
    )?;
    let dataset = data::load_pairs(&args.pairs)?;
    let members = args
        .models
        .iter()
        .zip(&args.embeddings)
        .map(|(m, e)| {
            Ok(BlendMember {
                model: ranker::load_model(m)?,
                store: data::load_embeddings(e)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let spec = BlendSpec::new(members, args.normalize.into(), args.draw_threshold)?;
    let preds = ensemble::predict_dataset(&spec, &dataset)?;
    ensemble::write_predictions(&preds, &args.out)?;
    println!(
        "{} predictions from {} member(s) -> {}",
        preds.len(),
        spec.members().len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    require_exists([args.pairs.as_path(), args.pred.as_path()])?;
    let gold = data::load_pairs(&args.pairs)?;
    let preds = ensemble::load_predictions(&args.pred)?;
    if gold.len() != preds.len() {
        return Err(
            Error::InvalidArgument(format!("{} gold pairs but {} predictions", gold.len(), preds.len())).into(),
        );
    }
    for (i, (g, p)) in gold.records.iter().zip(&preds).enumerate() {
        if g.left_id != p.record.left_id || g.right_id != p.record.right_id {
            return Err(Error::InvalidArgument(format!("line {}: prediction is for a different pair", i + 1)).into());
        }
    }
    let report = EvaluationReport::build(&gold, &preds, args.errors)?;
    print!("{}", report.render());
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Accuracy grid: one row per (token file, pooling method), one column per run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationGrid {
    pub rows: Vec<String>,
    pub runs: Vec<Vec<f64>>,
}

impl AblationGrid {
    pub fn mean(&self, row: usize) -> f64 {
        let r = &self.runs[row];
        r.iter().sum::<f64>() / r.len() as f64
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(String::len).max().unwrap_or(0).max(14);
        let n_runs = self.runs.first().map_or(0, Vec::len);
        let mut s = format!("{:<width$}", "representation");
        for r in 0..n_runs {
            let _ = write!(s, "  {:>8}", format!("run {}", r + 1));
        }
        s.push_str("      mean\n");
        for (i, name) in self.rows.iter().enumerate() {
            let _ = write!(s, "{name:<width$}");
            for v in &self.runs[i] {
                let _ = write!(s, "  {:>8.2}", 100.0 * v);
            }
            let _ = writeln!(s, "  {:>8.2}", 100.0 * self.mean(i));
        }
        s
    }
}

fn parse_token_file_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let label = path
                .file_stem()
                .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
            (label, path)
        }
    }
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<AblationGrid, CliError> {
    let params = args.boost.params(args.seed)?;
    if !(args.test_frac > 0.0 && args.test_frac < 1.0) {
        return Err(CliError::Usage(format!(
            "--test-frac must lie in (0, 1), got {}",
            args.test_frac
        )));
    }
    if args.methods.is_empty() {
        return Err(CliError::Usage("--methods needs at least one method".into()));
    }
    let files: Vec<(String, PathBuf)> = args.token_files.iter().map(|a| parse_token_file_arg(a)).collect();
    require_exists(std::iter::once(args.pairs.as_path()).chain(files.iter().map(|(_, p)| p.as_path())))?;

    let dataset = data::load_pairs(&args.pairs)?;
    let tokens: Vec<TokenFile> = files
        .iter()
        .map(|(_, p)| pooling::load_tokens(p))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut stores = Vec::new();
    for ((label, _), tf) in files.iter().zip(&tokens) {
        for &m in &args.methods {
            let method = PoolingMethod::from(m);
            rows.push(format!("{label}: {}", method.as_str()));
            stores.push(tf.pool(method)?);
        }
    }

    let mut runs = vec![Vec::with_capacity(args.repeats as usize); rows.len()];
    for r in 0..u64::from(args.repeats) {
        let seed = args.seed.wrapping_add(r);
        let (rest, test) = split_validation(&dataset, args.test_frac, seed)?;
        let (train, valid) = split_validation(&rest, args.boost.valid_frac, seed.wrapping_add(1))?;
        let params = HyperParams { seed, ..params.clone() };
        for (cell, store) in stores.iter().enumerate() {
            let model = train_on_split(&train, &valid, store, &args.boost, &params, 0)?;
            let spec = BlendSpec::new(
                vec![BlendMember {
                    model,
                    store: store.clone(),
                }],
                Normalization::ZScore,
                args.draw_threshold,
            )?;
            let preds = ensemble::predict_dataset(&spec, &test)?;
            let pred_labels: Vec<_> = preds.iter().map(|p| p.label).collect();
            runs[cell].push(weighted_accuracy(&test.labels(), &pred_labels)?);
        }
    }

    let grid = AblationGrid { rows, runs };
    print!("{}", grid.render());
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&grid).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(grid)
}
