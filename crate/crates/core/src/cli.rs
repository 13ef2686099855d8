//! The `doro` command line: `train`, `eval`, `verify`, `synth` and `trim`.
//!
//! Exit codes: 0 on success, 1 when `verify` finds a failing property, 2 on
//! flag, input or output errors, 3 when training diverges.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{
    load_csv, load_features_csv, save_csv, synth_subpop, SyntheticSpec, TabularDataset,
};
use crate::model::{load_checkpoint, save_checkpoint, Architecture, ModelParams};
use crate::train::{
    evaluate, iterative_trim, run_experiment, validation_risk, ExperimentSplits, Method,
    RunSummary, SelectionParams, TrainConfig, TrainError, TrainRun,
};
use crate::verify::{self, Fault, VerifyOptions};

/// When set, every output file is written into this directory under the
/// file name given by `--out`.
pub const OUT_DIR_ENV: &str = "DORO_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "doro",
    version,
    about = "Distributionally and outlier robust training on tabular data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train, record per-epoch metrics and checkpoints, and select epochs.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Check the risk solvers against the discrete oracles.
    Verify(VerifyArgs),
    /// Write a synthetic subpopulation-shift dataset as CSV.
    Synth(SynthArgs),
    /// Remove high-loss samples by repeated ERM training.
    Trim(TrimArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Features CSV whose last column is `label`.
    #[arg(long, requires = "domains", conflicts_with = "synth_spec")]
    data: Option<PathBuf>,
    /// Domains CSV with one 0/1 column per domain.
    #[arg(long, requires = "data")]
    domains: Option<PathBuf>,
    /// `default` or a JSON file holding a synthetic spec.
    #[arg(long)]
    synth_spec: Option<String>,
    /// Overrides the spec's outlier fraction (label flips on the training split).
    #[arg(long, requires = "synth_spec")]
    outlier_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ArchKind {
    Linear,
    Mlp,
}

#[derive(Debug, Args)]
struct OptimArgs {
    #[arg(long, value_enum, default_value = "linear")]
    arch: ArchKind,
    /// Hidden width of the MLP.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long = "lr", default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f64,
    #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl OptimArgs {
    fn config(&self, method: Method, alpha: f64, eps: f64) -> TrainConfig {
        TrainConfig {
            method,
            architecture: match self.arch {
                ArchKind::Linear => Architecture::Linear,
                ArchKind::Mlp => Architecture::Mlp {
                    hidden: self.hidden,
                },
            },
            alpha,
            eps,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// One of erm, cvar, chi2-dro, cvar-doro, chi2-doro.
    #[arg(long, default_value = "erm")]
    method: Method,
    /// Minimal group size; a comma-separated list runs a sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    alpha: Vec<f64>,
    /// Discarded fraction for DORO; a comma-separated list runs a sweep.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    eps: Vec<f64>,
    /// Alpha of the min-cvar and min-cvar-doro selection strategies.
    #[arg(long, default_value_t = SelectionParams::default().alpha)]
    select_alpha: f64,
    /// Eps of the min-cvar-doro selection strategy.
    #[arg(long, default_value_t = SelectionParams::default().eps)]
    select_eps: f64,
    /// Sweep runs trained in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Metrics file (JSON lines); checkpoints go to `<stem>.checkpoints/`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Seed of the synthetic data and its split; ignored for CSV input.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Alpha of the reported CVaR.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Eps of the reported CVaR-DORO.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Writes the record here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = verify::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// `default` or a JSON file holding a synthetic spec.
    #[arg(long, default_value = "default")]
    synth_spec: String,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    outlier_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Features CSV; domains and metadata are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrimArgs {
    #[arg(long)]
    data: PathBuf,
    /// Domains CSV; without it every row is in one domain `all`.
    #[arg(long)]
    domains: Option<PathBuf>,
    #[arg(long)]
    rounds: usize,
    /// Samples removed per round.
    #[arg(long)]
    drop: usize,
    #[command(flatten)]
    optim: OptimArgs,
    /// Trimmed features CSV; domains and the removed indices go beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        let code = match e {
            TrainError::Divergence { .. } => EXIT_DIVERGED,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

macro_rules! impl_usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::usage(e.to_string())
            }
        }
    )*};
}

impl_usage_from!(
    crate::data::DataError,
    crate::model::ModelError,
    std::io::Error,
    serde_json::Error
);

type CliResult = Result<i32, Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Trim(a) => cmd_trim(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            f.code
        }
    }
}

fn output_path(out: &Path) -> Result<PathBuf, Failure> {
    let path = match std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
        Some(dir) => {
            let name = out.file_name().ok_or_else(|| {
                Failure::usage(format!("--out {} has no file name", out.display()))
            })?;
            PathBuf::from(dir).join(name)
        }
        None => out.to_path_buf(),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(path)
}

/// `dir/stem.suffix` for an output at `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn synthetic_spec(
    source: &str,
    seed: u64,
    outlier_fraction: Option<f64>,
) -> Result<SyntheticSpec, Failure> {
    let mut spec = if source == "default" {
        SyntheticSpec::default()
    } else {
        let text =
            fs::read_to_string(source).map_err(|e| Failure::usage(format!("{source}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{source}: {e}")))?
    };
    spec.seed = seed;
    if let Some(f) = outlier_fraction {
        spec.outlier_fraction = f;
    }
    spec.validate()?;
    Ok(spec)
}

fn splits(data: &DataArgs, seed: u64) -> Result<ExperimentSplits, Failure> {
    match (&data.data, &data.domains, &data.synth_spec) {
        (Some(f), Some(d), None) => Ok(ExperimentSplits::from_dataset(&load_csv(f, d)?, seed)?),
        (None, None, Some(s)) => Ok(ExperimentSplits::synthetic(&synthetic_spec(
            s,
            seed,
            data.outlier_fraction,
        )?)?),
        _ => Err(Failure::usage(
            "give either --data and --domains, or --synth-spec",
        )),
    }
}

#[derive(Serialize)]
struct EpochRecord<'a> {
    record: &'static str,
    run: usize,
    method: Method,
    alpha: f64,
    eps: f64,
    seed: u64,
    epoch: usize,
    train_risk: f64,
    eta_star: Option<f64>,
    test_avg_accuracy: f64,
    test_worst_accuracy: f64,
    test_per_domain_accuracy: &'a [f64],
    val_avg_accuracy: f64,
    val_worst_accuracy: f64,
    val_per_domain_accuracy: Vec<f64>,
    /// CVaR at the selection alpha.
    val_cvar: f64,
    /// CVaR-DORO at the selection alpha and eps.
    val_cvar_doro: f64,
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    record: &'static str,
    run: usize,
    domain_names: &'a [String],
    checkpoints: String,
    #[serde(flatten)]
    summary: &'a RunSummary,
}

struct RunOutput {
    run: TrainRun,
    summary: RunSummary,
    val: Vec<(crate::train::Accuracy, f64, f64)>,
}

fn train_one(
    splits: &ExperimentSplits,
    config: &TrainConfig,
    selection: SelectionParams,
) -> Result<RunOutput, TrainError> {
    let (run, summary) = run_experiment(splits, config, selection)?;
    let val = run
        .checkpoints
        .iter()
        .map(|p| {
            Ok((
                evaluate(p, &splits.validation)?,
                validation_risk(p, &splits.validation, selection.alpha, 0.0)?,
                validation_risk(p, &splits.validation, selection.alpha, selection.eps)?,
            ))
        })
        .collect::<Result<_, TrainError>>()?;
    Ok(RunOutput { run, summary, val })
}

/// Runs `configs` on up to `jobs` threads; results keep the input order.
fn train_all(
    splits: &ExperimentSplits,
    configs: &[TrainConfig],
    selection: SelectionParams,
    jobs: usize,
) -> Vec<Result<RunOutput, TrainError>> {
    let slots: Vec<Mutex<Option<Result<RunOutput, TrainError>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                let out = train_one(splits, config, selection);
                *slots[i].lock().expect("no panics while holding the lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("lock is not poisoned")
                .expect("every slot is filled")
        })
        .collect()
}

fn cmd_train(args: &TrainArgs) -> CliResult {
    let configs: Vec<TrainConfig> = args
        .alpha
        .iter()
        .flat_map(|&a| args.eps.iter().map(move |&e| (a, e)))
        .map(|(a, e)| args.optim.config(args.method, a, e))
        .collect();
    for c in &configs {
        c.validate()?;
    }
    if args.jobs == 0 {
        return Err(Failure::usage("--jobs must be positive"));
    }
    let selection = SelectionParams {
        alpha: args.select_alpha,
        eps: args.select_eps,
    };
    if !(selection.alpha > 0.0 && selection.alpha <= 1.0) || !(0.0..0.5).contains(&selection.eps) {
        return Err(Failure::usage(format!(
            "selection needs alpha in (0, 1] and eps in [0, 0.5), got {} and {}",
            selection.alpha, selection.eps
        )));
    }
    let splits = splits(&args.data, args.optim.seed)?;
    let out = output_path(&args.out)?;
    let ckpt_root = sibling(&out, "checkpoints");

    let mut lines = Vec::new();
    for (i, (config, result)) in configs
        .iter()
        .zip(train_all(&splits, &configs, selection, args.jobs))
        .enumerate()
    {
        let RunOutput { run, summary, val } = result?;
        let dir = ckpt_root.join(format!("run-{i:03}"));
        fs::create_dir_all(&dir)?;
        for (e, params) in run.checkpoints.iter().enumerate() {
            save_checkpoint(params, &dir.join(format!("epoch-{e:03}.ckpt")))?;
        }
        for (rec, (acc, cvar, cvar_doro)) in run.history.iter().zip(val) {
            lines.push(serde_json::to_string(&EpochRecord {
                record: "epoch",
                run: i,
                method: config.method,
                alpha: config.alpha,
                eps: config.eps,
                seed: config.seed,
                epoch: rec.epoch,
                train_risk: rec.train_risk,
                eta_star: rec.eta_star,
                test_avg_accuracy: rec.avg_accuracy,
                test_worst_accuracy: rec.worst_accuracy,
                test_per_domain_accuracy: &rec.per_domain_accuracy,
                val_avg_accuracy: acc.avg_accuracy,
                val_worst_accuracy: acc.worst_accuracy,
                val_per_domain_accuracy: acc.per_domain_accuracy,
                val_cvar: cvar,
                val_cvar_doro: cvar_doro,
            })?);
        }
        lines.push(serde_json::to_string(&SummaryRecord {
            record: "summary",
            run: i,
            domain_names: splits.test.domain_names(),
            checkpoints: dir.display().to_string(),
            summary: &summary,
        })?);
    }
    let mut file = fs::File::create(&out)?;
    for line in &lines {
        writeln!(file, "{line}")?;
    }
    eprintln!("wrote {} runs to {}", configs.len(), out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    checkpoint: String,
    dataset: &'a str,
    rows: usize,
    avg_accuracy: f64,
    worst_accuracy: f64,
    domain_names: &'a [String],
    per_domain_accuracy: Vec<f64>,
    alpha: f64,
    cvar: f64,
    eps: f64,
    cvar_doro: f64,
}

fn cmd_eval(args: &EvalArgs) -> CliResult {
    let dataset: TabularDataset = match (&args.data.data, &args.data.domains, &args.data.synth_spec)
    {
        (Some(f), Some(d), None) => load_csv(f, d)?,
        (None, None, Some(_)) => splits(&args.data, args.seed)?.test,
        _ => {
            return Err(Failure::usage(
                "give either --data and --domains, or --synth-spec",
            ))
        }
    };
    let params: ModelParams = load_checkpoint(&args.checkpoint)?;
    if params.input_dim() != dataset.dim() {
        return Err(Failure::usage(format!(
            "checkpoint expects {} features, data has {}",
            params.input_dim(),
            dataset.dim()
        )));
    }
    let acc = evaluate(&params, &dataset)?;
    let record = EvalRecord {
        checkpoint: args.checkpoint.display().to_string(),
        dataset: dataset.name(),
        rows: dataset.len(),
        avg_accuracy: acc.avg_accuracy,
        worst_accuracy: acc.worst_accuracy,
        domain_names: dataset.domain_names(),
        per_domain_accuracy: acc.per_domain_accuracy,
        alpha: args.alpha,
        cvar: validation_risk(&params, &dataset, args.alpha, 0.0)?,
        eps: args.eps,
        cvar_doro: validation_risk(&params, &dataset, args.alpha, args.eps)?,
    };
    let line = serde_json::to_string(&record)?;
    match &args.out {
        Some(out) => fs::write(output_path(out)?, line + "\n")?,
        None => println!("{line}"),
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs) -> CliResult {
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be positive"));
    }
    let report = verify::run(&VerifyOptions {
        trials: args.trials,
        seed: args.seed,
        fault: args.inject_fault.then_some(Fault::InflateRadius),
    });
    print!("{report}");
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn write_dataset(dataset: &TabularDataset, out: &Path) -> Result<(), Failure> {
    save_csv(dataset, out, &sibling(out, "domains.csv"))?;
    dataset.save_metadata(&sibling(out, "meta.json"))?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> CliResult {
    let mut spec = synthetic_spec(&args.synth_spec, args.seed, args.outlier_fraction)?;
    if let Some(n) = args.n_samples {
        spec.n_samples = n;
    }
    let dataset = synth_subpop(&spec)?;
    let out = output_path(&args.out)?;
    write_dataset(&dataset, &out)?;
    eprintln!("wrote {} rows to {}", dataset.len(), out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RemovedRecord<'a> {
    rounds: usize,
    drop_per_round: usize,
    input_rows: usize,
    output_rows: usize,
    /// 0-based data-row positions in the input file, in removal order.
    removed: &'a [usize],
}

fn cmd_trim(args: &TrimArgs) -> CliResult {
    let dataset = match &args.domains {
        Some(d) => load_csv(&args.data, d)?,
        None => load_features_csv(&args.data)?,
    };
    let config = args
        .optim
        .config(Method::Erm, TrainConfig::default().alpha, 0.0);
    config.validate()?;
    let outcome = iterative_trim(&dataset, args.rounds, args.drop, &config)?;
    let out = output_path(&args.out)?;
    write_dataset(&outcome.dataset, &out)?;
    let record = RemovedRecord {
        rounds: args.rounds,
        drop_per_round: args.drop,
        input_rows: dataset.len(),
        output_rows: outcome.dataset.len(),
        removed: &outcome.removed,
    };
    fs::write(
        sibling(&out, "removed.json"),
        serde_json::to_string_pretty(&record)? + "\n",
    )?;
    eprintln!(
        "kept {} of {} rows, wrote {}",
        outcome.dataset.len(),
        dataset.len(),
        out.display()
    );
    Ok(EXIT_OK)
}
