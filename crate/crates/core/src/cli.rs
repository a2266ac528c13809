//! The `sgt` command line: train, eval, predict, viz, convert, synth,
//! verify and bench.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error,
//! 3 verification failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::data::synth::{gen_bars, gen_bars_regression, gen_plus_sign, gen_xor};
use crate::data::{load_csv, Dataset, FeatureSchema, Task};
use crate::impurity::Criterion;
use crate::induce::{fit_variant, from_cart, Hyperparams, Variant};
use crate::model::{sig4, to_dot, Node, Predictions, SgtModel, Split};
use crate::refine::{tao_refine_traced, TaoParams};
use crate::verify::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "sgt", version, about = "Shape generalized trees: train, inspect and verify")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a tree and write it as JSON.
    Train(TrainArgs),
    /// Score a model on labelled data.
    Eval(EvalArgs),
    /// Write one prediction per row as CSV.
    Predict(PredictArgs),
    /// Export a model as Graphviz DOT.
    Viz(VizArgs),
    /// Rewrite a CART model's thresholds as shape functions.
    Convert(ConvertArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run a verification harness.
    Verify(VerifyArgs),
    /// Training accuracy per depth and variant.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Classification,
    Regression,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Classification => Task::Classification,
            TaskArg::Regression => Task::Regression,
        }
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV with a header row; the last column is the target.
    #[arg(long)]
    data: PathBuf,
    /// Schema file (`name,numeric` or `name,categorical,a|b|c` per line).
    /// Without it every feature column is numeric.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "classification")]
    task: TaskArg,
    /// Rescale regression targets to zero mean and unit variance.
    #[arg(long)]
    standardize_target: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, CliError> {
        let schema = match &self.schema {
            Some(p) => FeatureSchema::from_file(p).map_err(|e| in_file(p, e))?,
            None => numeric_schema_from_header(&self.data)?,
        };
        let ds = load_csv(&self.data, &schema, self.task.into()).map_err(|e| in_file(&self.data, e))?;
        Ok(if self.standardize_target { ds.standardized_targets() } else { ds })
    }
}

fn in_file(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn numeric_schema_from_header(path: &Path) -> Result<FeatureSchema, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| in_file(path, e))?;
    let header = rdr.headers().map_err(|e| in_file(path, e))?;
    if header.len() < 2 {
        return Err(CliError::Data(format!("{}: need at least one feature and a target column", path.display())));
    }
    FeatureSchema::numeric(header.iter().take(header.len() - 1)).map_err(data_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    Gini,
    Entropy,
    Mse,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Gini => Criterion::Gini,
            CriterionArg::Entropy => Criterion::Entropy,
            CriterionArg::Mse => Criterion::Mse,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct HyperArgs {
    #[arg(long, default_value = "sgt", value_parser = parse_variant)]
    variant: Variant,
    /// Maximum tree depth; 0 means unbounded.
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    /// Default: gini for classification, mse for regression.
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = 0.0)]
    min_impurity_decrease: f64,
    #[arg(long, default_value_t = 16)]
    inner_max_leaf_nodes: usize,
    /// Fraction of the node (≤ 1) or an absolute count.
    #[arg(long, default_value_t = 1.0)]
    inner_min_samples_leaf: f64,
    /// Penalty per branch beyond two.
    #[arg(long, default_value_t = 0.0)]
    branching_penalty: f64,
    /// Penalty on bivariate splits.
    #[arg(long, default_value_t = 0.0)]
    pairwise_penalty: f64,
    /// Feature pairs scored per node; defaults to 0 for univariate variants
    /// and 5 for bivariate ones.
    #[arg(long)]
    pairwise_limit: Option<usize>,
    /// Rotation directions for bivariate binning trees.
    #[arg(long, default_value_t = 8)]
    h_directions: usize,
    /// Coordinate-descent sweeps over the bins.
    #[arg(long, default_value_t = 10)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop after this many internal nodes.
    #[arg(long)]
    max_internal_nodes: Option<usize>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

impl HyperArgs {
    fn hyperparams(&self, task: Task) -> Hyperparams {
        let (max_arity, default_pairs) = self.variant.arity_and_pairs();
        let criterion = self.criterion.map(Criterion::from).unwrap_or(match task {
            Task::Classification => Criterion::Gini,
            Task::Regression => Criterion::Mse,
        });
        Hyperparams {
            max_arity,
            max_depth: if self.max_depth == 0 { Hyperparams::UNLIMITED_DEPTH } else { self.max_depth },
            min_impurity_decrease: self.min_impurity_decrease,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            criterion,
            inner_max_leaf_nodes: self.inner_max_leaf_nodes,
            inner_min_samples_leaf: self.inner_min_samples_leaf,
            branching_penalty: self.branching_penalty,
            pairwise_penalty: self.pairwise_penalty,
            pair_limit: self.pairwise_limit.unwrap_or(default_pairs),
            sweeps: self.sweeps,
            directions: self.h_directions,
            seed: self.seed,
            max_internal_nodes: self.max_internal_nodes,
            ..Hyperparams::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Refine the fitted tree with this many alternation passes.
    #[arg(long)]
    tao_passes: Option<usize>,
    /// Per-leaf penalty during refinement.
    #[arg(long, default_value_t = 0.0)]
    tao_reg: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV in the model's column order; the target column comes last.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with the model's feature columns and a trailing target column.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VizArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    cart_model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    /// Two classes forming a plus sign on a 3×3 grid.
    Plus,
    /// Alternating bands on one feature.
    Bars,
    /// Cosine bars with noise, real-valued target.
    BarsRegression,
    /// XOR of two signs.
    Xor,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    /// Band count parameter for bars.
    #[arg(long, default_value_t = 3)]
    omega: usize,
    /// Sample count (plus rounds up to a multiple of 9).
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Half-width of uniform target noise for bars-regression.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail on timing ratios above 2.5 (also enabled by SGT_ASSERT_TIMING=1).
    #[arg(long)]
    assert_timing: bool,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Inclusive range `a..b` or a comma list.
    #[arg(long, default_value = "2..6", value_parser = parse_depths)]
    depths: Depths,
    /// Comma-separated variants.
    #[arg(long, default_value = "cart,sgt", value_delimiter = ',', value_parser = parse_variant)]
    variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Depths(Vec<usize>);

fn parse_depths(s: &str) -> Result<Depths, String> {
    let bad = || format!("invalid depths '{s}' (expected a..b or a,b,c)");
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if v.is_empty() || v.contains(&0) {
        return Err(bad());
    }
    Ok(Depths(v))
}

/// Parses `argv` (including the program name), runs the command, and
/// returns the exit code. Output goes to stdout, diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut out = String::new();
    let code = match run_to(argv, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    print!("{out}");
    code
}

/// Like [`run`] but collects standard output into `out`.
pub fn run_to<I, T>(argv: I, out: &mut String) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            out.push_str(&e.render().to_string());
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| dispatch(cli.command, out))
}

fn dispatch(cmd: Command, out: &mut String) -> Result<(), CliError> {
    match cmd {
        Command::Train(a) => train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Viz(a) => {
            let m = load_model(&a.model)?;
            write_file(&a.out, &to_dot(&m))?;
            let _ = writeln!(out, "wrote {}", a.out.display());
            Ok(())
        }
        Command::Convert(a) => convert(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Bench(a) => bench(a, out),
    }
}

fn load_model(path: &Path) -> Result<SgtModel, CliError> {
    SgtModel::load(path).map_err(|e| in_file(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| in_file(path, e))
}

/// Loads a CSV laid out like the model's training data.
fn load_for_model(m: &SgtModel, path: &Path) -> Result<Dataset, CliError> {
    load_csv(path, m.schema(), m.task()).map_err(|e| in_file(path, e))
}

fn score_line(m: &SgtModel, ds: &Dataset) -> Result<(String, String), CliError> {
    let stats = m.stats();
    let (name, value) = match m.task() {
        Task::Classification => ("accuracy", m.accuracy(ds).map_err(data_err)?),
        Task::Regression => ("mse", m.mse(ds).map_err(data_err)?),
    };
    let summary = format!(
        "{name} {value:.3}, internal nodes {}, leaves {}, depth {}",
        stats.internal_nodes, stats.leaves, stats.max_depth
    );
    let block = format!("{name}={value}\nrows={}\n{}", ds.n_rows(), stats.to_key_values());
    Ok((summary, block))
}

fn train(a: TrainArgs, out: &mut String) -> Result<(), CliError> {
    let ds = a.data.load()?;
    let hp = a.hyper.hyperparams(ds.task());
    let mut m = fit_variant(&ds, a.hyper.variant, &hp).map_err(fit_err)?;
    if let Some(passes) = a.tao_passes {
        let (refined, report) =
            tao_refine_traced(&m, &ds, &TaoParams { passes, reg: a.tao_reg }, &hp).map_err(fit_err)?;
        let _ = writeln!(
            out,
            "refined: {} passes, {} refits, {} prunes, objective {} -> {}",
            report.passes_run,
            report.refits,
            report.prunes,
            sig4(report.objectives[0]),
            sig4(*report.objectives.last().unwrap())
        );
        m = refined;
    }
    m.save(&a.out).map_err(|e| in_file(&a.out, e))?;
    let (summary, _) = score_line(&m, &ds)?;
    let _ = writeln!(out, "{}: train {summary}", a.hyper.variant);
    Ok(())
}

/// Invalid hyperparameters are usage errors; everything else is about the data.
fn fit_err(e: crate::induce::FitError) -> CliError {
    match e {
        crate::induce::FitError::Invalid(_) | crate::induce::FitError::CriterionMismatch { .. } => {
            CliError::Usage(e.to_string())
        }
        crate::induce::FitError::Empty => CliError::Data(e.to_string()),
    }
}

fn eval(a: EvalArgs, out: &mut String) -> Result<(), CliError> {
    let m = load_model(&a.model)?;
    let ds = load_for_model(&m, &a.data)?;
    let (summary, block) = score_line(&m, &ds)?;
    let _ = writeln!(out, "{summary}");
    out.push_str(&block);
    Ok(())
}

fn predict(a: PredictArgs, out: &mut String) -> Result<(), CliError> {
    let m = load_model(&a.model)?;
    let ds = load_for_model(&m, &a.data)?;
    let mut text = format!("{}\n", m.target_name());
    match m.predict(&ds).map_err(data_err)? {
        Predictions::Classes(v) => v.iter().for_each(|&l| {
            let _ = writeln!(text, "{}", m.class_names()[l]);
        }),
        Predictions::Real(v) => v.iter().for_each(|y| {
            let _ = writeln!(text, "{y}");
        }),
    }
    write_file(&a.out, &text)?;
    let _ = writeln!(out, "wrote {} predictions to {}", ds.n_rows(), a.out.display());
    Ok(())
}

fn convert(a: ConvertArgs, out: &mut String) -> Result<(), CliError> {
    let m = load_model(&a.cart_model)?;
    if m.nodes().iter().any(|n| matches!(n, Node::Internal { split: Split::Shape(_), .. })) {
        return Err(CliError::Data(format!("{}: not a threshold-only model", a.cart_model.display())));
    }
    let converted = from_cart(&m);
    converted.save(&a.out).map_err(|e| in_file(&a.out, e))?;
    let _ = writeln!(out, "converted {} threshold nodes", m.stats().internal_nodes);
    Ok(())
}

fn synth(a: SynthArgs, out: &mut String) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let ds = match a.kind {
        SynthKind::Plus => gen_plus_sign(a.n.div_ceil(9), a.seed),
        SynthKind::Bars => gen_bars(a.omega, a.n, a.seed),
        SynthKind::BarsRegression => gen_bars_regression(a.omega, a.n, a.noise, a.seed),
        SynthKind::Xor => gen_xor(a.n, 0, a.seed),
    };
    let csv = ds.to_csv_string();
    match &a.out {
        Some(p) => {
            write_file(p, &csv)?;
            let _ = writeln!(out, "wrote {} rows to {}", ds.n_rows(), p.display());
        }
        None => out.push_str(&csv),
    }
    Ok(())
}

fn verify(a: VerifyArgs, out: &mut String) -> Result<(), CliError> {
    let assert_timing = a.assert_timing || std::env::var("SGT_ASSERT_TIMING").is_ok_and(|v| v == "1");
    let r = run_suite(a.suite, a.seed, assert_timing);
    out.push_str(&r.text);
    out.push_str(&r.key_values);
    if r.passed {
        let _ = writeln!(out, "passed=true");
        Ok(())
    } else {
        let _ = writeln!(out, "passed=false");
        Err(CliError::Verify("verification failed".into()))
    }
}

/// Accuracy (or MSE) per `(depth, variant)` on the training data. Each
/// variant uses its own `K` and default `P`; the rest comes from `base`.
pub fn bench_table(ds: &Dataset, variants: &[Variant], depths: &[usize], base: &Hyperparams) -> Result<Vec<Vec<f64>>, crate::induce::FitError> {
    depths
        .iter()
        .map(|&d| {
            variants
                .iter()
                .map(|&v| {
                    let (max_arity, pair_limit) = v.arity_and_pairs();
                    let hp = Hyperparams { max_depth: d, max_arity, pair_limit, ..*base };
                    let m = fit_variant(ds, v, &hp)?;
                    Ok(match ds.task() {
                        Task::Classification => m.accuracy(ds).expect("own data"),
                        Task::Regression => m.mse(ds).expect("own data"),
                    })
                })
                .collect()
        })
        .collect()
}

fn bench(a: BenchArgs, out: &mut String) -> Result<(), CliError> {
    let ds = a.data.load()?;
    let base = a.hyper.hyperparams(ds.task());
    let table = bench_table(&ds, &a.variants, &a.depths.0, &base).map_err(fit_err)?;
    let metric = if ds.task() == Task::Regression { "mse" } else { "accuracy" };
    let _ = write!(out, "{metric:>8} depth");
    for v in &a.variants {
        let _ = write!(out, " {:>8}", v.name());
    }
    out.push('\n');
    for (d, row) in a.depths.0.iter().zip(&table) {
        let _ = write!(out, "{:>14}", d);
        for x in row {
            let _ = write!(out, " {x:>8.4}");
        }
        out.push('\n');
    }
    for (d, row) in a.depths.0.iter().zip(&table) {
        for (v, x) in a.variants.iter().zip(row) {
            let _ = writeln!(out, "depth{d}_{}={x}", v.name());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_ranges() {
        assert_eq!(parse_depths("2..6").unwrap(), Depths(vec![2, 3, 4, 5, 6]));
        assert_eq!(parse_depths("1,3").unwrap(), Depths(vec![1, 3]));
        assert!(parse_depths("0..2").is_err());
        assert!(parse_depths("x").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let mut out = String::new();
        let e = run_to(["sgt", "train", "--bogus"], &mut out).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let e = run_to(["sgt", "verify", "--suite", "nope"], &mut out).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }
}
