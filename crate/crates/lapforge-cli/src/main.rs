//! Command-line entry point: dataset generation, training, single-instance
//! solving, evaluation, and benchmark suites.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

/// Print a line to stdout, exiting quietly if the reader has gone away
/// (for example when piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if writeln!(std::io::stdout().lock(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

/// [`out!`] without the trailing newline.
macro_rules! outp {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if write!(std::io::stdout().lock(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

use lapforge::bench::{
    ablation_suite, environment_echo, evaluate_method, generalization_suite, render_aligned,
    render_rows, runtime_profile, BenchReport, BenchRow, Method, TIMING_FOOTER,
};
use lapforge::datagen::{self, DatasetSpec};
use lapforge::loss::LossConfig;
use lapforge::model::{ModelConfig, ModelParameters};
use lapforge::solvers::SinkhornConfig;
use lapforge::trainer::{
    load_checkpoint, save_checkpoint, train_with, Checkpoint, EpochStats, TrainConfig,
};
use lapforge::{total_cost, AssignmentMatrix, CostMatrix, LapError};

#[derive(Parser)]
#[command(
    name = "lapforge",
    version,
    about = "Linear-assignment toolkit: exact, doubly-stochastic, and learned solvers"
)]
struct Cli {
    /// Print every built-in default as key=value lines and exit.
    #[arg(long)]
    show_config: bool,
    /// Worker threads for parallel sections (default: all cores; the
    /// LAPFORGE_THREADS environment variable is the fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic dataset.
    Generate(GenerateArgs),
    /// Train the learned solver on a dataset.
    Train(TrainArgs),
    /// Solve a single cost matrix.
    Solve(SolveArgs),
    /// Evaluate solvers on a dataset and report per-size precision/timing.
    Eval(EvalArgs),
    /// Run a benchmark suite (method comparison, runtime profile,
    /// ablations, or generalization study).
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Problem sizes, as start:end:step or a comma-separated list.
    #[arg(long, default_value = "10:150:10")]
    sizes: String,
    /// Instances per size.
    #[arg(long = "per-size", default_value_t = 100)]
    per_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    /// Additionally multiply each matrix by a factor drawn uniformly
    /// from 1..10.
    #[arg(long = "scale-values")]
    scale_values: bool,
    /// Upper bound of the uniform cost distribution.
    #[arg(long = "value-bound", default_value_t = 1.0)]
    value_bound: f64,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Labelled dataset to split and train on.
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint path, written after every epoch.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total epochs (absolute; also the target when resuming).
    #[arg(long)]
    epochs: Option<usize>,
    /// Fraction of each size group held out for evaluation.
    #[arg(long = "eval-fraction", default_value_t = 0.3)]
    eval_fraction: f64,
    /// Edges kept per agent during graph construction.
    #[arg(long = "t", default_value_t = 8)]
    t: usize,
    /// Message-passing iterations.
    #[arg(long = "conv-iters", default_value_t = 5)]
    conv_iters: usize,
    /// Width of node/edge attribute vectors.
    #[arg(long = "latent-dim", default_value_t = 16)]
    latent_dim: usize,
    /// Hidden width of every perceptron.
    #[arg(long = "hidden-width", default_value_t = 32)]
    hidden_width: usize,
    /// Positive-class weight of the balanced cross entropy.
    #[arg(long, default_value_t = 0.9)]
    w: f64,
    /// Constraint-weight increase per epoch.
    #[arg(long = "alpha-step", default_value_t = 0.01)]
    alpha_step: f64,
    /// Initial learning rate.
    #[arg(long = "lr", default_value_t = 0.003)]
    lr: f64,
    /// Train without channel attention.
    #[arg(long = "ablate-attention")]
    ablate_attention: bool,
    /// Train without learned aggregation weights.
    #[arg(long = "ablate-weights")]
    ablate_weights: bool,
    /// Drop the row/column-sum constraint penalty.
    #[arg(long = "no-l1")]
    no_l1: bool,
    /// Drop the row/column-norm constraint penalty.
    #[arg(long = "no-l2")]
    no_l2: bool,
    /// Continue from the checkpoint at --out (architecture and schedule
    /// flags are then taken from the checkpoint; --epochs still sets the
    /// target).
    #[arg(long)]
    resume: bool,
    /// Write the per-epoch history log (TSV) here.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Matrix file: n, then n*n row-major costs, then optionally the n
    /// optimal job indices (whitespace separated).
    #[arg(long)]
    matrix: PathBuf,
    /// hungarian | sinkhorn | glan | random | all
    #[arg(long, default_value = "hungarian")]
    method: String,
    /// Trained checkpoint (required for glan).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated subset of glan, sinkhorn, hungarian, random.
    #[arg(long, default_value = "hungarian,sinkhorn,random")]
    methods: String,
    /// Trained checkpoint (required when methods include glan).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the machine-readable report (TSV) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// methods | runtime | ablation | generalization
    #[arg(long, default_value = "methods")]
    suite: String,
    /// Dataset path (methods/ablation suites and the generalization
    /// suite's in-distribution reference).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated methods (methods/runtime suites).
    #[arg(long, default_value = "hungarian,sinkhorn,random")]
    methods: String,
    /// Trained checkpoint (glan rows and the generalization suite).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Size ladder for the runtime suite or the generalization suite's
    /// larger sizes (start:end:step or comma list).
    #[arg(long)]
    sizes: Option<String>,
    /// Instances per size (runtime/generalization suites).
    #[arg(long = "per-size", default_value_t = 20)]
    per_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the machine-readable report (TSV) here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training epochs for the ablation suite.
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Held-out fraction for the ablation suite.
    #[arg(long = "eval-fraction", default_value_t = 0.3)]
    eval_fraction: f64,
}

enum CliError {
    Usage(String),
    Lap(LapError),
}

impl From<LapError> for CliError {
    fn from(e: LapError) -> Self {
        CliError::Lap(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                outp!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    let threads = cli.threads.or_else(|| {
        std::env::var("LAPFORGE_THREADS").ok().and_then(|raw| raw.parse().ok())
    });
    if let Some(n) = threads {
        // num_threads(0) means "pick a default" to the pool builder.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            std::process::exit(1);
        }
        Err(CliError::Lap(e)) => {
            let code = e.exit_code();
            eprintln!("error: {e}");
            std::process::exit(code);
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.show_config {
        print_default_config();
        return Ok(());
    }
    match cli.command {
        Some(Command::Generate(args)) => run_generate(args),
        Some(Command::Train(args)) => run_train(args),
        Some(Command::Solve(args)) => run_solve(args),
        Some(Command::Eval(args)) => run_eval(args),
        Some(Command::Bench(args)) => run_bench(args),
        None => Err(usage(
            "a subcommand is required: generate | train | solve | eval | bench (or --show-config)",
        )),
    }
}

fn print_default_config() {
    let model = ModelConfig::default();
    let train = TrainConfig::default();
    let loss = LossConfig::default();
    let sinkhorn = SinkhornConfig::default();
    let dataset = DatasetSpec::default();
    out!("model.latent_dim={}", model.latent_dim);
    out!("model.conv_iterations={}", model.conv_iterations);
    out!("model.prune_width={}", model.prune_width);
    out!("model.hidden_width={}", model.hidden_width);
    out!("train.epochs={}", train.epochs);
    out!("train.lr_initial={}", train.lr_initial);
    out!("train.lr_decay={}", train.lr_decay);
    out!("train.lr_decay_interval={}", train.lr_decay_interval);
    out!("train.alpha_initial={}", train.alpha_initial);
    out!("train.alpha_step={}", train.alpha_step);
    out!("train.beta1={}", train.beta1);
    out!("train.beta2={}", train.beta2);
    out!("train.epsilon={}", train.epsilon);
    out!("train.grad_clip={}", train.grad_clip);
    out!("train.eval_fraction=0.3");
    out!("loss.w={}", loss.w);
    out!("loss.epsilon_log={}", loss.epsilon_log);
    out!("loss.use_l1={}", loss.use_l1);
    out!("loss.use_l2={}", loss.use_l2);
    let sizes: Vec<String> = dataset.sizes.iter().map(|n| n.to_string()).collect();
    out!("dataset.sizes={}", sizes.join(","));
    out!("dataset.per_size={}", dataset.samples_per_size);
    out!("dataset.value_bound={}", dataset.value_upper_bound);
    out!("sinkhorn.temperature={}", sinkhorn.temperature);
    out!("sinkhorn.max_iterations={}", sinkhorn.max_iterations);
    out!("sinkhorn.tolerance={}", sinkhorn.tolerance);
}

/// Parse `start:end:step` (inclusive) or a comma-separated size list.
fn parse_sizes(text: &str) -> CliResult<Vec<usize>> {
    let text = text.trim();
    let parse_one = |tok: &str| -> CliResult<usize> {
        tok.trim()
            .parse()
            .map_err(|_| usage(format!("bad size value {tok:?}")))
    };
    let sizes: Vec<usize> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(format!(
                "size range {text:?} must be start:end:step"
            )));
        }
        let (start, end, step) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if step == 0 || start == 0 || end < start {
            return Err(usage(format!("degenerate size range {text:?}")));
        }
        (start..=end).step_by(step).collect()
    } else {
        text.split(',').map(parse_one).collect::<CliResult<_>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(usage("sizes must be nonempty and positive"));
    }
    Ok(sizes)
}

fn run_generate(args: GenerateArgs) -> CliResult<()> {
    let spec = DatasetSpec {
        sizes: parse_sizes(&args.sizes)?,
        samples_per_size: args.per_size,
        value_upper_bound: args.value_bound,
        value_scale: args.scale_values.then_some(lapforge::bench::SCALE_RANGE),
        seed: args.seed,
    };
    let dataset = datagen::generate(&spec)?;
    datagen::save(&dataset, &args.out)?;
    out!(
        "wrote {} records ({} sizes x {} instances) to {}",
        dataset.len(),
        spec.sizes.len(),
        spec.samples_per_size,
        args.out.display()
    );
    out!("sha256 {}", datagen::dataset_hash(&dataset));
    Ok(())
}

fn epoch_line(stats: &EpochStats, target_epochs: usize) -> String {
    format!(
        "epoch {:>3}/{} lr {:.4e} alpha {:.3} classification {:.4} constraint {:.4} eval {:.4} clipped {}",
        stats.epoch + 1,
        target_epochs,
        stats.learning_rate,
        stats.alpha,
        stats.mean_bce,
        stats.mean_constraint,
        stats.eval_precision,
        stats.clipped_steps,
    )
}

const HISTORY_HEADER: &str = "epoch\tlearning_rate\talpha\tmean_classification_loss\tmean_constraint_loss\teval_precision\tclipped_steps\n";

fn history_row(stats: &EpochStats) -> String {
    format!(
        "{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{}\n",
        stats.epoch,
        stats.learning_rate,
        stats.alpha,
        stats.mean_bce,
        stats.mean_constraint,
        stats.eval_precision,
        stats.clipped_steps,
    )
}

fn append_history(path: &Path, line: &str, write_header: bool) -> Result<(), LapError> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if write_header {
        file.write_all(HISTORY_HEADER.as_bytes())?;
    }
    file.write_all(line.as_bytes())?;
    Ok(())
}

fn run_train(args: TrainArgs) -> CliResult<()> {
    let dataset = datagen::load(&args.dataset)?;
    let hash = datagen::dataset_hash(&dataset);

    let checkpoint = if args.resume {
        let mut loaded = load_checkpoint(&args.out)?;
        if let Some(epochs) = args.epochs {
            loaded.train_config.epochs = epochs;
        }
        out!(
            "resuming from {} at epoch {} (target {})",
            args.out.display(),
            loaded.completed_epochs,
            loaded.train_config.epochs
        );
        loaded
    } else {
        let model_cfg = ModelConfig {
            latent_dim: args.latent_dim,
            conv_iterations: args.conv_iters,
            prune_width: args.t,
            hidden_width: args.hidden_width,
            ablate_channel_attention: args.ablate_attention,
            ablate_aggregation_weights: args.ablate_weights,
        };
        let train_cfg = TrainConfig {
            epochs: args.epochs.unwrap_or(20),
            lr_initial: args.lr,
            alpha_step: args.alpha_step,
            loss: LossConfig {
                w: args.w,
                use_l1: !args.no_l1,
                use_l2: !args.no_l2,
                ..LossConfig::default()
            },
            seed: args.seed,
            ..TrainConfig::default()
        };
        Checkpoint::fresh(&model_cfg, &train_cfg)?
    };
    // Split with the seed stored in the checkpoint so a resumed run sees the
    // exact train/eval partition of the original run even without --seed.
    let (train_set, eval_set) =
        datagen::split(&dataset, args.eval_fraction, checkpoint.train_config.seed)?;
    let target_epochs = checkpoint.train_config.epochs;
    out!(
        "dataset {} (sha256 {hash}): {} train / {} eval records",
        args.dataset.display(),
        train_set.len(),
        eval_set.len()
    );

    let mut history_started = args.resume
        && args.history.as_deref().map(Path::exists).unwrap_or(false);
    let result = train_with(checkpoint, &train_set, &eval_set, |ckpt, stats| {
        save_checkpoint(ckpt, &args.out)?;
        out!("{}", epoch_line(stats, target_epochs));
        if let Some(history_path) = &args.history {
            let write_header = !history_started;
            history_started = true;
            append_history(history_path, &history_row(stats), write_header)?;
        }
        Ok(())
    })?;

    match result.history.last() {
        Some(last) => out!(
            "finished at epoch {}: eval precision {:.4}; checkpoint {}",
            result.checkpoint.completed_epochs,
            last.eval_precision,
            args.out.display()
        ),
        None => {
            // Resuming a finished run: nothing left to do, but leave a
            // valid checkpoint behind either way.
            save_checkpoint(&result.checkpoint, &args.out)?;
            out!(
                "checkpoint already at target epoch {}; nothing to train",
                result.checkpoint.completed_epochs
            );
        }
    }
    Ok(())
}

/// Parse a single-instance matrix file: n, n*n costs, optionally n job
/// indices of the known optimum.
fn read_matrix(path: &Path) -> CliResult<(CostMatrix, Option<AssignmentMatrix>)> {
    let text = std::fs::read_to_string(path).map_err(LapError::from)?;
    let mut tokens = text.split_whitespace();
    let n: usize = tokens
        .next()
        .ok_or_else(|| LapError::Format("matrix file is empty".into()))?
        .parse()
        .map_err(|_| LapError::Format("matrix file must start with the size".into()))?;
    let mut values = Vec::with_capacity(n * n);
    for k in 0..n * n {
        let tok = tokens.next().ok_or_else(|| {
            LapError::Format(format!("matrix file has {k} of {} cost values", n * n))
        })?;
        values.push(
            tok.parse::<f64>()
                .map_err(|_| LapError::Format(format!("bad cost value {tok:?}")))?,
        );
    }
    let rest: Vec<&str> = tokens.collect();
    let label = match rest.len() {
        0 => None,
        len if len == n => {
            let jobs = rest
                .iter()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| LapError::Format(format!("bad job index {tok:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(AssignmentMatrix::from_permutation(jobs)?)
        }
        len => {
            return Err(CliError::Lap(LapError::Format(format!(
                "matrix file has {len} trailing tokens; expected 0 or {n}"
            ))))
        }
    };
    Ok((CostMatrix::new(n, values)?, label))
}

fn load_params(path: &Path) -> CliResult<ModelParameters> {
    Ok(load_checkpoint(path)?.params)
}

/// Build benchmark methods from a comma-separated name list.
fn build_methods<'a>(
    names: &str,
    params: Option<&'a ModelParameters>,
    seed: u64,
) -> CliResult<Vec<Method<'a>>> {
    let mut methods = Vec::new();
    for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        methods.push(match name {
            "glan" => Method::Glan(
                params.ok_or_else(|| usage("method glan requires --checkpoint"))?,
            ),
            "sinkhorn" => Method::Sinkhorn(SinkhornConfig::default()),
            "hungarian" => Method::Hungarian,
            "random" => Method::Random { seed },
            other => {
                return Err(usage(format!(
                    "unknown method {other:?}; expected glan, sinkhorn, hungarian, or random"
                )))
            }
        });
    }
    if methods.is_empty() {
        return Err(usage("at least one method is required"));
    }
    Ok(methods)
}

fn run_solve(args: SolveArgs) -> CliResult<()> {
    let (cost, label) = read_matrix(&args.matrix)?;
    let params = match &args.checkpoint {
        Some(path) => Some(load_params(path)?),
        None => None,
    };
    let method_list = if args.method == "all" {
        let mut names = vec!["hungarian", "sinkhorn"];
        if params.is_some() {
            names.push("glan");
        }
        names.push("random");
        names.join(",")
    } else {
        args.method.clone()
    };
    let methods = build_methods(&method_list, params.as_ref(), args.seed)?;

    let mut cells: Vec<[String; 4]> = vec![
        ["method", "total_cost", "precision", "assignment"].map(str::to_string),
    ];
    for method in &methods {
        let assignment = lapforge::bench::solve_record(method, &cost, 0)?;
        let cost_value = total_cost(&cost, &assignment)?;
        let precision_cell = match &label {
            Some(optimal) => format!("{:.4}", lapforge::precision(&assignment, optimal)?),
            None => "-".to_string(),
        };
        let jobs: Vec<String> = assignment.jobs().iter().map(|j| j.to_string()).collect();
        cells.push([
            method.name().to_string(),
            format!("{cost_value:.6}"),
            precision_cell,
            jobs.join(" "),
        ]);
    }
    outp!("{}", render_aligned(&cells));
    Ok(())
}

fn method_report(
    dataset_path: &Path,
    methods_arg: &str,
    checkpoint: Option<&PathBuf>,
    seed: u64,
) -> CliResult<BenchReport> {
    let dataset = datagen::load(dataset_path)?;
    let params = match checkpoint {
        Some(path) => Some(load_params(path)?),
        None => None,
    };
    let methods = build_methods(methods_arg, params.as_ref(), seed)?;
    let mut rows: Vec<BenchRow> = Vec::new();
    for method in &methods {
        rows.extend(evaluate_method(method, &dataset)?);
    }
    rows.sort_by_key(|row| row.size); // stable: keeps method order per size
    let mut config_echo = format!("methods={methods_arg} seed={seed}");
    if let Some(path) = checkpoint {
        let _ = write!(config_echo, " checkpoint={}", path.display());
    }
    let sh = SinkhornConfig::default();
    let _ = write!(
        config_echo,
        " sinkhorn(temperature={}, max_iterations={}, tolerance={})",
        sh.temperature, sh.max_iterations, sh.tolerance
    );
    Ok(BenchReport {
        dataset_label: dataset_path.display().to_string(),
        dataset_hash: datagen::dataset_hash(&dataset),
        config_echo,
        environment: environment_echo(),
        rows,
    })
}

fn write_out(path: Option<&PathBuf>, content: &str) -> CliResult<()> {
    if let Some(path) = path {
        std::fs::write(path, content).map_err(LapError::from)?;
        out!("wrote {}", path.display());
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> CliResult<()> {
    let report = method_report(&args.dataset, &args.methods, args.checkpoint.as_ref(), args.seed)?;
    outp!("{}", report.to_table());
    write_out(args.out.as_ref(), &report.to_tsv())
}

fn run_bench(args: BenchArgs) -> CliResult<()> {
    match args.suite.as_str() {
        "methods" => {
            let dataset = args
                .dataset
                .as_ref()
                .ok_or_else(|| usage("suite methods requires --dataset"))?;
            let report = method_report(dataset, &args.methods, args.checkpoint.as_ref(), args.seed)?;
            outp!("{}", report.to_table());
            write_out(args.out.as_ref(), &report.to_tsv())
        }
        "runtime" => run_bench_runtime(&args),
        "ablation" => run_bench_ablation(&args),
        "generalization" => run_bench_generalization(&args),
        other => Err(usage(format!(
            "unknown suite {other:?}; expected methods, runtime, ablation, or generalization"
        ))),
    }
}

fn run_bench_runtime(args: &BenchArgs) -> CliResult<()> {
    let sizes = parse_sizes(args.sizes.as_deref().unwrap_or("10:150:10"))?;
    let params = match &args.checkpoint {
        Some(path) => Some(load_params(path)?),
        None => None,
    };
    let methods = build_methods(&args.methods, params.as_ref(), args.seed)?;
    let mut cells: Vec<[String; 4]> =
        vec![["size", "method", "samples", "median_ms"].map(str::to_string)];
    let mut tsv = String::from("size\tmethod\tsamples\tmedian_ms\n");
    for method in &methods {
        for row in runtime_profile(method, &sizes, args.per_size, args.seed)? {
            cells.push([
                row.size.to_string(),
                row.method.clone(),
                row.samples.to_string(),
                format!("{:.3}", row.median_ms),
            ]);
            let _ = writeln!(
                tsv,
                "{}\t{}\t{}\t{:.16e}",
                row.size, row.method, row.samples, row.median_ms
            );
        }
    }
    out!("environment: {}", environment_echo());
    out!("seed: {}\n", args.seed);
    outp!("{}", render_aligned(&cells));
    out!("\n{TIMING_FOOTER}");
    write_out(args.out.as_ref(), &tsv)
}

fn run_bench_ablation(args: &BenchArgs) -> CliResult<()> {
    let dataset_path = args
        .dataset
        .as_ref()
        .ok_or_else(|| usage("suite ablation requires --dataset"))?;
    let dataset = datagen::load(dataset_path)?;
    let hash = datagen::dataset_hash(&dataset);
    let (train_set, eval_set) = datagen::split(&dataset, args.eval_fraction, args.seed)?;
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let rows = ablation_suite(&train_set, &eval_set, &ModelConfig::default(), &train_cfg)?;

    out!("dataset:     {} (sha256 {hash})", dataset_path.display());
    out!(
        "config:      epochs={} seed={} eval_fraction={}",
        args.epochs, args.seed, args.eval_fraction
    );
    out!("environment: {}\n", environment_echo());
    let mut cells: Vec<[String; 3]> =
        vec![["family", "variant", "mean_precision"].map(str::to_string)];
    let mut tsv = String::from("family\tvariant\tsize\tprecision\n");
    for row in &rows {
        cells.push([
            row.family.to_string(),
            row.variant.to_string(),
            format!("{:.4}", row.mean_precision),
        ]);
        let _ = writeln!(tsv, "{}\t{}\toverall\t{:.16e}", row.family, row.variant, row.mean_precision);
        for (size, value) in &row.per_size {
            let _ = writeln!(tsv, "{}\t{}\t{}\t{:.16e}", row.family, row.variant, size, value);
        }
    }
    outp!("{}", render_aligned(&cells));
    write_out(args.out.as_ref(), &tsv)
}

fn run_bench_generalization(args: &BenchArgs) -> CliResult<()> {
    let checkpoint = args
        .checkpoint
        .as_ref()
        .ok_or_else(|| usage("suite generalization requires --checkpoint"))?;
    let dataset_path = args
        .dataset
        .as_ref()
        .ok_or_else(|| usage("suite generalization requires --dataset (base evaluation set)"))?;
    let params = load_params(checkpoint)?;
    let base = datagen::load(dataset_path)?;
    let sizes = parse_sizes(args.sizes.as_deref().unwrap_or("200,300,400"))?;
    let report = generalization_suite(&params, &base, &sizes, args.per_size, args.seed)?;

    out!(
        "dataset:     {} (sha256 {})",
        dataset_path.display(),
        datagen::dataset_hash(&base)
    );
    out!("checkpoint:  {}", checkpoint.display());
    out!(
        "config:      larger_sizes={sizes:?} per_size={} seed={}",
        args.per_size, args.seed
    );
    out!("environment: {}\n", environment_echo());

    let parts: [(&str, &str, &[BenchRow]); 4] = [
        (
            "in-distribution",
            "in-distribution (base evaluation set)",
            &report.in_distribution,
        ),
        ("larger", "larger sizes", &report.larger_sizes),
        (
            "scaled",
            "scaled values (same instances, costs x uniform(1,10))",
            &report.scaled_values,
        ),
        (
            "larger-scaled",
            "larger sizes with scaled values",
            &report.larger_scaled,
        ),
    ];
    let mut tsv = String::from("part\tsize\tmethod\tsamples\tmean_precision\tmean_time_ms\n");
    for (part_key, label, rows) in parts {
        out!("== {label}");
        outp!("{}", render_rows(rows));
        out!();
        for row in rows {
            let _ = writeln!(
                tsv,
                "{part_key}\t{}\t{}\t{}\t{:.16e}\t{:.16e}",
                row.size, row.method, row.samples, row.mean_precision, row.mean_time_ms
            );
        }
    }
    out!("{TIMING_FOOTER}");
    write_out(args.out.as_ref(), &tsv)
}
