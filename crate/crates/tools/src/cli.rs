//! Command-line surface.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pivots_core::atlas::COMBOS;
use pivots_core::canon;
use pivots_core::dqn::{self, HyperParams};
use pivots_core::stats::{Aggregation, Baseline, Weighting};
use pivots_core::strategy::{Strategy, StrategyKind, TieBreak};
use pivots_core::{Atlas, AtlasChain, BitMatrix, CostModel};

use crate::atlas_file::{self, atlas_csv_path, atlas_path};
use crate::error::{Result, ToolError};
use crate::meta::metadata_line;
use crate::report::{self, Figure};
use crate::{parallel, weights};

#[derive(Debug, Parser)]
#[command(
    name = "pivots",
    version,
    about = "Optimal and heuristic pivoting on small sparsity patterns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count pattern classes of one size.
    Classes(ClassesArgs),
    /// Build the atlases for sizes 1..=n.
    Build(BuildArgs),
    /// Look up the record of one pattern.
    Query(QueryArgs),
    /// Figure tables from built atlases.
    Stats(StatsArgs),
    /// Mean elimination cost of a strategy on random patterns.
    Eval(EvalArgs),
    /// Train a Q-learning agent.
    Train(TrainArgs),
    /// Compare a trained agent with Markowitz.
    EvalAgent(EvalAgentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Field,
    Ring,
}

impl From<ModelArg> for CostModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Field => CostModel::Field,
            ModelArg::Ring => CostModel::Ring,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    RatioOfSums,
    MeanOfRatios,
    MeanOfRatiosZeroFilled,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::RatioOfSums => Aggregation::RatioOfSums,
            AggregationArg::MeanOfRatios => Aggregation::MeanOfRatios,
            AggregationArg::MeanOfRatiosZeroFilled => Aggregation::MeanOfRatiosZeroFilled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    PerClass,
    MatrixWeighted,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::PerClass => Weighting::PerClass,
            WeightingArg::MatrixWeighted => Weighting::MatrixWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    MedianMinfillin,
    BestMinfillin,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::MedianMinfillin => Baseline::MedianMinFillIn,
            BaselineArg::BestMinfillin => Baseline::BestMinFillIn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Markowitz,
    Random,
    Optimal,
    WeightedFillIn,
    TwoStepLookahead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieBreakArg {
    Lexicographic,
    UniformRandom,
}

impl From<TieBreakArg> for TieBreak {
    fn from(t: TieBreakArg) -> Self {
        match t {
            TieBreakArg::Lexicographic => TieBreak::Lexicographic,
            TieBreakArg::UniformRandom => TieBreak::UniformRandom,
        }
    }
}

#[derive(Debug, Args)]
pub struct Workers {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Workers {
    fn get(&self) -> usize {
        self.workers
            .unwrap_or_else(parallel::default_workers)
            .max(1)
    }
}

#[derive(Debug, Args)]
pub struct ClassesArgs {
    #[arg(long)]
    pub n: usize,
    /// Permit n = 7.
    #[arg(long)]
    pub allow_large: bool,
    /// Write the canonical keys as 8-byte little-endian words.
    #[arg(long)]
    pub dump_keys: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub allow_large: bool,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// An atlas file or a directory of `atlas_{n}.pivdb` files.
    #[arg(long)]
    pub atlas: PathBuf,
    /// Rows separated by `/` or newlines; `1`/`*` nonzero, `0`/`.` zero.
    /// Rectangular patterns get zero rows or columns appended.
    #[arg(long)]
    pub pattern: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub atlas_dir: PathBuf,
    #[arg(long, value_enum)]
    pub figure: Figure,
    /// Smallest size in line figures.
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    /// Largest size in line figures; the size of the density histogram.
    #[arg(long, default_value_t = 6)]
    pub n_max: usize,
    /// Defaults to every aggregation.
    #[arg(long, value_enum)]
    pub aggregation: Vec<AggregationArg>,
    /// Defaults to every weighting.
    #[arg(long, value_enum)]
    pub weighting: Vec<WeightingArg>,
    /// Density histogram baseline; defaults to both.
    #[arg(long, value_enum)]
    pub baseline: Vec<BaselineArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long)]
    pub n: usize,
    /// Defaults to both models.
    #[arg(long, value_enum)]
    pub model: Vec<ModelArg>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "lexicographic")]
    pub tie_break: TieBreakArg,
    /// Column weight of the weighted fill-in rule.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Atlases for the optimal strategy.
    #[arg(long)]
    pub atlas_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 40_000)]
    pub episodes: u64,
    #[arg(long)]
    pub seed: u64,
    /// Add the pivot's fill-in as an input feature.
    #[arg(long)]
    pub fill_in_feature: bool,
    /// Apply free pivots without consulting the agent.
    #[arg(long)]
    pub auto_free: bool,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon_start: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon_end: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon_decay_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10_000)]
    pub replay_capacity: usize,
    #[arg(long, default_value_t = 500)]
    pub target_sync_period: u64,
    #[arg(long)]
    pub weights_out: PathBuf,
    /// Learning curve CSV; stdout when absent.
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalAgentArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Defaults to the frame size of the network.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| ToolError::io(p, e))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn out_io(e: io::Error) -> ToolError {
    ToolError::io("<output>", e)
}

fn names<T: std::fmt::Display>(xs: &[T]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Classes(a) => classes(a),
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Stats(a) => stats(a),
        Command::Eval(a) => eval(a),
        Command::Train(a) => train(a),
        Command::EvalAgent(a) => eval_agent(a),
    }
}

fn classes(a: ClassesArgs) -> Result<()> {
    let workers = a.workers.get();
    let start = Instant::now();
    let list = parallel::enumerate_classes(a.n, a.allow_large, workers)?;
    let rows = canon::count_row_classes(a.n)?;
    let total: u128 = list.iter().map(|(_, w)| w.0 as u128).sum();
    if total != 1u128 << (a.n * a.n) {
        return Err(ToolError::format(format!(
            "class weights sum to {total}, not 2^{}",
            a.n * a.n
        )));
    }
    if let Some(p) = &a.dump_keys {
        let f = File::create(p).map_err(|e| ToolError::io(p, e))?;
        atlas_file::write_keys(list.iter().map(|(k, _)| *k), BufWriter::new(f))?;
    }
    let cfg = json!({"command": "classes", "n": a.n, "allow_large": a.allow_large});
    let mut w = output(&a.out)?;
    writeln!(
        w,
        "{}\nn,row_classes,classes\n{},{},{}",
        metadata_line(&cfg),
        a.n,
        rows,
        list.len()
    )
    .map_err(out_io)?;
    eprintln!(
        "enumerated {} classes in {:.2?}",
        list.len(),
        start.elapsed()
    );
    Ok(())
}

fn build(a: BuildArgs) -> Result<()> {
    canon::guard(a.n, a.allow_large)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| ToolError::io(&a.out_dir, e))?;
    let workers = a.workers.get();
    let mut w = output(&None)?;
    writeln!(w, "n,classes,seconds").map_err(out_io)?;
    let mut start = Instant::now();
    parallel::build_chain(a.n, a.allow_large, workers, |atlas| {
        let k = atlas.n();
        let cfg = json!({"command": "build", "n": k});
        atlas_file::save_atlas(atlas, &atlas_path(&a.out_dir, k))?;
        atlas_file::save_atlas_csv(atlas, &metadata_line(&cfg), &atlas_csv_path(&a.out_dir, k))?;
        writeln!(
            w,
            "{k},{},{:.3}",
            atlas.len(),
            start.elapsed().as_secs_f64()
        )
        .map_err(out_io)?;
        start = Instant::now();
        Ok(())
    })?;
    Ok(())
}

fn missing(path: &Path, what: &str) -> ToolError {
    ToolError::format(format!(
        "{} not found; run `pivots build --n <size> --out-dir {}` first ({what})",
        path.display(),
        path.parent()
            .map_or(".".into(), |p| p.display().to_string())
    ))
}

fn require(path: PathBuf, what: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(missing(&path, what))
    }
}

/// Binary atlases `1..=n` from a directory.
pub fn load_chain(dir: &Path, n: usize) -> Result<AtlasChain> {
    let mut chain = AtlasChain::new();
    for k in 1..=n {
        chain.push(atlas_file::load_atlas(&require(
            atlas_path(dir, k),
            "needed for this size",
        )?)?)?;
    }
    Ok(chain)
}

fn query(a: QueryArgs) -> Result<()> {
    let m: BitMatrix = a.pattern.parse()?;
    let m = m.padded_square();
    let path = if a.atlas.is_dir() {
        require(
            atlas_path(&a.atlas, m.rows()),
            "atlas of the pattern's size",
        )?
    } else {
        a.atlas.clone()
    };
    let atlas = atlas_file::load_atlas(&path)?;
    let entry = atlas.entry(&m)?;
    let cfg =
        json!({"command": "query", "atlas": path.display().to_string(), "pattern": m.to_string()});
    let mut w = output(&a.out)?;
    writeln!(w, "{}\n{}", metadata_line(&cfg), atlas_file::CSV_HEADER).map_err(out_io)?;
    for (s, (model, mode)) in entry.record.summaries().iter().zip(COMBOS) {
        let pivot = |p: Option<pivots_core::Pivot>| p.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            entry.key,
            atlas.n(),
            entry.weight.0,
            model,
            mode,
            s.min,
            s.max,
            s.med,
            pivot(s.best),
            pivot(s.worst)
        )
        .map_err(out_io)?;
    }
    eprintln!("canonical form {} (pivots refer to it)", entry.key.matrix());
    Ok(())
}

fn or_all<A: Copy + Into<T>, T: Copy>(given: &[A], all: &[T]) -> Vec<T> {
    if given.is_empty() {
        all.to_vec()
    } else {
        given.iter().map(|&a| a.into()).collect()
    }
}

fn stats(a: StatsArgs) -> Result<()> {
    let aggs = or_all(&a.aggregation, &Aggregation::ALL);
    let weights = or_all(&a.weighting, &Weighting::ALL);
    let baselines = or_all(&a.baseline, &Baseline::ALL);
    let sizes: Vec<usize> = match a.figure {
        Figure::Density => vec![a.n_max],
        _ => (a.n_min.max(1)..=a.n_max).collect(),
    };
    if sizes.is_empty() {
        return Err(ToolError::Usage("--n-min exceeds --n-max".into()));
    }
    let atlases = sizes
        .iter()
        .map(|&k| {
            atlas_file::load_atlas_csv(&require(
                atlas_csv_path(&a.atlas_dir, k),
                "full-precision atlas table",
            )?)
        })
        .collect::<Result<Vec<Atlas>>>()?;
    let mut cfg = json!({
        "command": "stats",
        "figure": a.figure.to_possible_value().map(|v| v.get_name().to_string()),
        "sizes": sizes,
        "aggregations": names(&aggs),
        "weightings": names(&weights),
    });
    if a.figure == Figure::Density {
        cfg["baselines"] = json!(names(&baselines));
    }
    let meta = metadata_line(&cfg);
    let w = output(&a.out)?;
    if a.figure == Figure::Density {
        report::write_histogram(
            &report::histogram_rows(&atlases[0], &baselines, &aggs, &weights),
            &meta,
            w,
        )
    } else {
        let refs: Vec<&Atlas> = atlases.iter().collect();
        report::write_figure(
            &report::figure_rows(a.figure, &refs, &aggs, &weights),
            &meta,
            w,
        )
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let models = or_all(&a.model, &CostModel::ALL);
    let workers = a.workers.get();
    let chain = match (a.strategy, &a.atlas_dir) {
        (StrategyArg::Optimal, Some(dir)) => Some(load_chain(dir, a.n)?),
        (StrategyArg::Optimal, None) => {
            return Err(ToolError::Usage(
                "the optimal strategy needs --atlas-dir".into(),
            ))
        }
        _ => None,
    };
    if !(a.lambda >= 0.0 && a.lambda.is_finite()) {
        return Err(ToolError::Usage(
            "--lambda must be a non-negative number".into(),
        ));
    }
    let kind = match a.strategy {
        StrategyArg::Markowitz => StrategyKind::Markowitz,
        StrategyArg::Random => StrategyKind::Random,
        StrategyArg::Optimal => StrategyKind::Optimal(chain.as_ref().expect("loaded above")),
        StrategyArg::WeightedFillIn => StrategyKind::WeightedFillIn(a.lambda),
        StrategyArg::TwoStepLookahead => StrategyKind::TwoStepLookahead,
    };
    let strategy = Strategy::new(kind).with_tie_break(a.tie_break.into());
    let name = a
        .strategy
        .to_possible_value()
        .expect("named")
        .get_name()
        .to_string();
    let tie = a
        .tie_break
        .to_possible_value()
        .expect("named")
        .get_name()
        .to_string();
    let cfg = json!({
        "command": "eval",
        "strategy": name,
        "n": a.n,
        "models": names(&models),
        "samples": a.samples,
        "seed": a.seed,
        "tie_break": tie,
        "lambda": a.lambda,
        "workers": workers,
    });
    let mut rows = Vec::new();
    for &model in &models {
        rows.push((
            model,
            parallel::evaluate(&strategy, a.n, model, a.samples, a.seed, workers)?,
        ));
    }
    let mut w = output(&a.out)?;
    writeln!(
        w,
        "{}\nstrategy,n,model,samples,seed,mean_cost",
        metadata_line(&cfg)
    )
    .map_err(out_io)?;
    for (model, mean) in rows {
        writeln!(
            w,
            "{name},{},{model},{},{},{mean:.6}",
            a.n, a.samples, a.seed
        )
        .map_err(out_io)?;
    }
    w.flush().map_err(out_io)
}

fn train(a: TrainArgs) -> Result<()> {
    let model: CostModel = a.model.into();
    let hp = HyperParams {
        n: a.n,
        episodes: a.episodes,
        epsilon_start: a.epsilon_start,
        epsilon_end: a.epsilon_end,
        epsilon_decay_fraction: a.epsilon_decay_fraction,
        gamma: a.gamma,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        replay_capacity: a.replay_capacity,
        target_sync_period: a.target_sync_period,
        fill_in_feature: a.fill_in_feature,
        auto_free: a.auto_free,
        seed: a.seed,
    };
    let cfg = hyper_params_json(&hp, model);
    let (net, curve) = dqn::train(&hp, model)?;
    weights::save_weights(&net, &a.weights_out)?;
    report::write_curve(&curve, &metadata_line(&cfg), output(&a.curve_out)?)
}

pub fn hyper_params_json(hp: &HyperParams, model: CostModel) -> Value {
    json!({
        "command": "train",
        "model": model.name(),
        "n": hp.n,
        "episodes": hp.episodes,
        "epsilon_start": hp.epsilon_start,
        "epsilon_end": hp.epsilon_end,
        "epsilon_decay_fraction": hp.epsilon_decay_fraction,
        "gamma": hp.gamma,
        "learning_rate": hp.learning_rate,
        "batch_size": hp.batch_size,
        "replay_capacity": hp.replay_capacity,
        "target_sync_period": hp.target_sync_period,
        "fill_in_feature": hp.fill_in_feature,
        "auto_free": hp.auto_free,
        "seed": hp.seed,
    })
}

fn eval_agent(a: EvalAgentArgs) -> Result<()> {
    let net = weights::load_weights(&a.weights, None)?;
    let n = a.n.unwrap_or(net.frame());
    if n != net.frame() {
        return Err(ToolError::format(format!(
            "{} holds a network for frame size {}, not {n}",
            a.weights.display(),
            net.frame()
        )));
    }
    let model: CostModel = a.model.into();
    let workers = a.workers.get();
    let ev = parallel::evaluate_agent(&net, n, model, a.samples, a.seed, workers)?;
    let cfg = json!({
        "command": "eval-agent",
        "weights": a.weights.display().to_string(),
        "n": n,
        "model": model.name(),
        "samples": a.samples,
        "seed": a.seed,
        "workers": workers,
    });
    let mut w = output(&a.out)?;
    writeln!(
        w,
        "{}\nn,model,samples,seed,agent_mean,markowitz_mean,improvement_pct\n{n},{model},{},{},{:.6},{:.6},{:.2}",
        metadata_line(&cfg),
        a.samples,
        a.seed,
        ev.agent_mean,
        ev.markowitz_mean,
        ev.improvement
    )
    .map_err(out_io)
}
