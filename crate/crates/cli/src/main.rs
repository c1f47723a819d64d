//! `ldc` — experiment front end.
//!
//! Every subcommand resolves its parameters from flags, then from the
//! optional `--config` JSON (flags win), then from defaults; derives all
//! randomness from `--seed`; and emits CSV plus a JSON run manifest when
//! `--out` is given. Exit codes: 0 success, 1 validation error, 2 runtime
//! failure.

mod assemble;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use ldc_core::coupling::{
    discrimination_advantage, maximal_coupling_sample, tv_finite, tv_gaussian_separation,
    Distribution, FiniteDistribution, GaussianDistribution, SampleValue,
};
use ldc_core::harness::{
    brute_force_certificate_check, dpa_certified_curve, estimate_accuracy, find_min_n,
    measure_lethal_dose, min_n_bound, scaling_sweep, BoundKind, CheckOutcome, Defense, SweepFamily,
};
use ldc_core::stats::chi_square_gof;
use ldc_core::{dpa_certify, Dataset, LabeledSample, Learner, PartitionPlan, RngKey, Task};

use assemble::{build_attack, build_learner, build_task, build_x0, task_value, TaskSpec};
use report::{sig9, write_manifest, CsvTable};

#[derive(Parser)]
#[command(
    name = "ldc",
    version,
    about = "Poisoning lethal-dose laboratory: sample complexity, attacks, certificates",
    arg_required_else_help = true
)]
struct Cli {
    /// Master seed; every stream derives from it (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap; also read from LDC_THREADS. Results do not depend
    /// on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON config file with the same keys as the flags; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Pr[trained classifier predicts the ML label at x0].
    Accuracy(AccuracyArgs),
    /// Smallest n reaching the accuracy target, plus the closed-form bound.
    #[command(name = "min-n")]
    MinN(MinNArgs),
    /// Apply a poisoning attack and measure sizes and post-attack accuracy.
    Attack(AttackArgs),
    /// Scaling sweep: sample complexity times lethal dose across a family.
    Sweep(SweepArgs),
    /// Certified-accuracy curve of the partition-aggregation defense.
    #[command(name = "dpa-curve")]
    DpaCurve(DpaCurveArgs),
    /// Exhaustive soundness check of the certificate on a small universe.
    #[command(name = "certify-check")]
    CertifyCheck(CertifyCheckArgs),
    /// Exact total variation distance (finite or same-covariance Gaussian).
    Tv(TvArgs),
    /// Maximal-coupling diagnostics: mismatch rate and marginal checks.
    Couple(CoupleArgs),
}

/// Task selection shared by most subcommands.
#[derive(Args, Clone, Default)]
struct TaskFlags {
    /// Task family: bijection, memorization or gaussian.
    #[arg(long)]
    task: Option<String>,
    /// Full task as JSON (overrides the other task flags).
    #[arg(long)]
    task_json: Option<String>,
    /// Number of labels.
    #[arg(long)]
    k: Option<usize>,
    /// Input-space size (memorization).
    #[arg(long)]
    m: Option<usize>,
    /// Input dimension (gaussian).
    #[arg(long)]
    d: Option<usize>,
    /// Center spacing along the first axis (gaussian; default 6).
    #[arg(long)]
    sep: Option<f64>,
    /// Hidden label mapping as a JSON array (discrete tasks).
    #[arg(long)]
    g: Option<String>,
    /// Class centers as a JSON array of arrays (gaussian).
    #[arg(long)]
    centers: Option<String>,
}

#[derive(Args)]
struct AccuracyArgs {
    #[command(flatten)]
    task: TaskFlags,
    /// Learner: auto, bijection, memorization, gaussian or radius_nn.
    #[arg(long)]
    learner: Option<String>,
    /// Full learner as JSON {"name": .., "params": {..}}.
    #[arg(long)]
    learner_json: Option<String>,
    /// Neighborhood radius for radius_nn.
    #[arg(long)]
    r: Option<f64>,
    /// Query input: an id, or a JSON array for gaussian tasks.
    #[arg(long)]
    x0: Option<String>,
    /// Clean training-set size.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo rounds.
    #[arg(long)]
    trials: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MinNArgs {
    #[command(flatten)]
    task: TaskFlags,
    #[arg(long)]
    x0: Option<String>,
    /// Accuracy target in (1/|Y|, 1); defaults 0.75 (bijection) / 0.8.
    #[arg(long)]
    tau: Option<f64>,
    /// Monte Carlo rounds per probed n.
    #[arg(long)]
    trials: Option<usize>,
    /// Search cap on n.
    #[arg(long)]
    cap: Option<usize>,
    /// Print the closed-form lower bound only; no search.
    #[arg(long)]
    bound_only: bool,
    /// CSV output path for the probe trace.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    task: TaskFlags,
    /// Attack: auto, identity, swap, removal, per-input-swap, gaussian-shift.
    #[arg(long)]
    attack: Option<String>,
    /// Swap target label (swap / per-input-swap).
    #[arg(long)]
    y1: Option<usize>,
    /// Shift attack margin parameter.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    x0: Option<String>,
    /// Poisoned training-set size N.
    #[arg(long, alias = "N")]
    n_total: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Defense: plain or dpa.
    #[arg(long)]
    defense: Option<String>,
    /// Partition count for --defense dpa.
    #[arg(long)]
    k_part: Option<usize>,
    #[arg(long)]
    learner: Option<String>,
    #[arg(long)]
    learner_json: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    /// Probe rounds for the auto swap-target selection.
    #[arg(long)]
    probe_trials: Option<usize>,
    /// CSV output path (one row).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report output path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Family to sweep: bijection (grid of k) or memorization (grid of m).
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated grid, e.g. 4,8,16,32.
    #[arg(long)]
    grid: Option<String>,
    /// Label count for the memorization family.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    /// Training-set size N used for the lethal-dose closed form.
    #[arg(long, alias = "N")]
    n_total: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DpaCurveArgs {
    #[command(flatten)]
    task: TaskFlags,
    /// Base learner (default: the task's canonical learner).
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    learner_json: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    /// Partition count.
    #[arg(long)]
    k_part: Option<usize>,
    #[arg(long, alias = "N")]
    n_total: Option<usize>,
    /// Fresh query points drawn from the input marginal.
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyCheckArgs {
    /// Input-space size of the memorization universe (m * k <= 12).
    #[arg(long)]
    m: Option<usize>,
    /// Label count of the universe.
    #[arg(long)]
    k: Option<usize>,
    /// Copies of each clean sample in D (ignored with --dataset-json).
    #[arg(long)]
    copies: Option<usize>,
    /// Explicit dataset as JSON [[x, y], ...].
    #[arg(long)]
    dataset_json: Option<String>,
    /// Base learner: memorization or radius_nn.
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    k_part: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    x0: Option<String>,
    /// Amount added to the computed certificate to probe corrupted claims.
    #[arg(long)]
    claim_extra: Option<usize>,
}

#[derive(Args)]
struct TvArgs {
    /// First finite distribution, comma-separated probabilities.
    #[arg(long)]
    u: Option<String>,
    /// Second finite distribution.
    #[arg(long)]
    v: Option<String>,
    /// Same-covariance Gaussian mode.
    #[arg(long)]
    gaussian: bool,
    /// Distance between the Gaussian means.
    #[arg(long)]
    dist: Option<f64>,
    /// First mean as a JSON array (alternative to --dist).
    #[arg(long)]
    mu: Option<String>,
    /// Second mean as a JSON array.
    #[arg(long)]
    mu2: Option<String>,
}

#[derive(Args)]
struct CoupleArgs {
    #[arg(long)]
    u: Option<String>,
    #[arg(long)]
    v: Option<String>,
    #[arg(long)]
    gaussian: bool,
    #[arg(long)]
    dist: Option<f64>,
    /// Coupled draws.
    #[arg(long)]
    draws: Option<usize>,
    /// Also estimate the max-ratio detector advantage at this n.
    #[arg(long)]
    detector_n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

/// Optional config-file values with flag-shaped keys.
struct Cfg(Option<Value>);

impl Cfg {
    fn load(path: &Option<PathBuf>) -> Result<Cfg> {
        match path {
            None => Ok(Cfg(None)),
            Some(p) => {
                let raw = std::fs::read_to_string(p)
                    .with_context(|| format!("--config: cannot read {}", p.display()))?;
                let value: Value = serde_json::from_str(&raw)
                    .with_context(|| format!("--config: {} is not valid JSON", p.display()))?;
                if !value.is_object() {
                    return Err(anyhow!("--config: top level must be a JSON object"));
                }
                Ok(Cfg(Some(value)))
            }
        }
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match &self.0 {
            None => Ok(None),
            Some(v) => match v.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(field) => serde_json::from_value(field.clone())
                    .map(Some)
                    .map_err(|e| anyhow!("--config: key '{key}': {e}")),
            },
        }
    }

    fn flag(&self, set: bool, key: &str) -> Result<bool> {
        Ok(set || self.get::<bool>(key)?.unwrap_or(false))
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap's message already carries the usage text.
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(RunError::Validation(e)) => {
            eprintln!("error: {e:#}");
            1
        }
        Err(RunError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

enum RunError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

/// Validation-phase shorthand: any failure while resolving inputs.
fn validate<T>(r: Result<T>) -> Result<T, RunError> {
    r.map_err(RunError::Validation)
}

/// Execution-phase shorthand: any failure while running or writing.
fn execute<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Runtime(e.into()))
}

/// Harness failures split by origin: parameter-range violations are
/// validation (exit 1), estimator and enumeration failures are runtime
/// (exit 2).
fn harness<T>(r: Result<T, ldc_core::harness::HarnessError>) -> Result<T, RunError> {
    use ldc_core::harness::HarnessError as H;
    fn is_validation(e: &H) -> bool {
        match e {
            H::TooFewTrials(_)
            | H::TauOutOfRange { .. }
            | H::BadQuery(_)
            | H::UniverseTooLarge(..)
            | H::DatasetTooLarge(..)
            | H::TMaxTooLarge(..)
            | H::EmptyGrid => true,
            H::GridPoint { source, .. } => is_validation(source),
            _ => false,
        }
    }
    r.map_err(|e| {
        if is_validation(&e) {
            RunError::Validation(e.into())
        } else {
            RunError::Runtime(e.into())
        }
    })
}

fn run(cli: Cli) -> Result<(), RunError> {
    let started = Instant::now();
    let cfg = validate(Cfg::load(&cli.config))?;
    let seed = validate(resolve_seed(&cli, &cfg))?;
    let threads = validate(resolve_threads(&cli, &cfg))?;
    let _ = ldc_core::configure_threads(threads);
    let key = RngKey::root(seed);
    let command_line: String = std::env::args().collect::<Vec<_>>().join(" ");
    let ctx = RunContext {
        seed,
        threads,
        started,
        command_line,
    };

    match cli.command {
        Command::Accuracy(args) => cmd_accuracy(args, &cfg, key, &ctx),
        Command::MinN(args) => cmd_min_n(args, &cfg, key, &ctx),
        Command::Attack(args) => cmd_attack(args, &cfg, key, &ctx),
        Command::Sweep(args) => cmd_sweep(args, &cfg, key, &ctx),
        Command::DpaCurve(args) => cmd_dpa_curve(args, &cfg, key, &ctx),
        Command::CertifyCheck(args) => cmd_certify_check(args, &cfg),
        Command::Tv(args) => cmd_tv(args, &cfg),
        Command::Couple(args) => cmd_couple(args, &cfg, key),
    }
}

struct RunContext {
    seed: u64,
    threads: Option<usize>,
    started: Instant,
    command_line: String,
}

impl RunContext {
    fn emit(&self, out: &Option<PathBuf>, table: &CsvTable, config: Value) -> Result<()> {
        if let Some(path) = out {
            table.write(path)?;
            write_manifest(
                path,
                &self.command_line,
                self.seed,
                self.threads,
                &config,
                self.started,
            )?;
        }
        Ok(())
    }
}

fn resolve_seed(cli: &Cli, cfg: &Cfg) -> Result<u64> {
    Ok(cli.seed.or(cfg.get("seed")?).unwrap_or(0))
}

fn resolve_threads(cli: &Cli, cfg: &Cfg) -> Result<Option<usize>> {
    if let Some(t) = cli.threads.or(cfg.get("threads")?) {
        if t == 0 {
            return Err(anyhow!("--threads must be at least 1"));
        }
        return Ok(Some(t));
    }
    match std::env::var("LDC_THREADS") {
        Ok(raw) => {
            let t: usize = raw
                .parse()
                .map_err(|e| anyhow!("LDC_THREADS does not parse: {e}"))?;
            if t == 0 {
                return Err(anyhow!("LDC_THREADS must be at least 1"));
            }
            Ok(Some(t))
        }
        Err(_) => Ok(None),
    }
}

fn resolve_task(flags: &TaskFlags, cfg: &Cfg) -> Result<Task> {
    let spec = TaskSpec {
        task: flags.task.clone().or(cfg.get("task")?),
        task_json: flags.task_json.clone().or(cfg.get("task_json")?),
        k: flags.k.or(cfg.get("k")?),
        m: flags.m.or(cfg.get("m")?),
        d: flags.d.or(cfg.get("d")?),
        sep: flags.sep.or(cfg.get("sep")?),
        g: flags.g.clone().or(cfg.get("g")?),
        centers: flags.centers.clone().or(cfg.get("centers")?),
    };
    build_task(&spec)
}

fn default_tau(task: &Task) -> f64 {
    match task {
        Task::Bijection(_) => 0.75,
        _ => 0.8,
    }
}

fn cmd_accuracy(
    args: AccuracyArgs,
    cfg: &Cfg,
    key: RngKey,
    ctx: &RunContext,
) -> Result<(), RunError> {
    let task = validate(resolve_task(&args.task, cfg))?;
    let learner = validate(build_learner(
        args.learner.or(validate(cfg.get("learner"))?).as_deref(),
        args.learner_json
            .or(validate(cfg.get("learner_json"))?)
            .as_deref(),
        args.r.or(validate(cfg.get("r"))?),
        &task,
    ))?;
    let x0_raw: Option<String> = args.x0.or(validate(cfg.get("x0"))?);
    let x0 = validate(build_x0(x0_raw.as_deref(), &task))?;
    let n = args.n.or(validate(cfg.get("n"))?).unwrap_or(100);
    let trials = args.trials.or(validate(cfg.get("trials"))?).unwrap_or(1000);

    let est = harness(estimate_accuracy(
        &learner,
        &task,
        &x0,
        n,
        trials,
        key.child_label("accuracy"),
    ))?;
    println!(
        "p_hat {:.6}  ci95 [{:.6}, {:.6}]  n {}  trials {}",
        est.p_hat, est.ci_low, est.ci_high, n, trials
    );

    let mut table = CsvTable::new(vec![
        "task", "learner", "x0", "n", "trials", "p_hat", "ci_low", "ci_high",
    ]);
    table.push(vec![
        task_value(&task).to_string(),
        learner.name().to_string(),
        format!("{x0:?}"),
        n.to_string(),
        trials.to_string(),
        sig9(est.p_hat),
        sig9(est.ci_low),
        sig9(est.ci_high),
    ]);
    let config = json!({
        "subcommand": "accuracy", "task": task_value(&task), "learner": learner,
        "x0": x0_raw, "n": n, "trials": trials, "seed": ctx.seed,
    });
    execute(ctx.emit(&args.out, &table, config))
}

fn cmd_min_n(args: MinNArgs, cfg: &Cfg, key: RngKey, ctx: &RunContext) -> Result<(), RunError> {
    let task = validate(resolve_task(&args.task, cfg))?;
    let tau = args
        .tau
        .or(validate(cfg.get("tau"))?)
        .unwrap_or_else(|| default_tau(&task));
    let bound_only = validate(cfg.flag(args.bound_only, "bound_only"))?;

    let bound = match &task {
        Task::Bijection(t) => Some(harness(min_n_bound(
            BoundKind::Bijection { k: t.k() },
            tau,
        ))?),
        Task::Memorization(t) => Some(harness(min_n_bound(
            BoundKind::Memorization { m: t.m(), k: t.k() },
            tau,
        ))?),
        Task::Gaussian(_) => None,
    };
    if let Some(b) = bound {
        println!("bound {b:.6}");
    }
    if bound_only {
        if bound.is_none() {
            return Err(RunError::Validation(anyhow!(
                "--bound-only requires a bijection or memorization task"
            )));
        }
        return Ok(());
    }

    let x0_raw: Option<String> = args.x0.or(validate(cfg.get("x0"))?);
    let x0 = validate(build_x0(x0_raw.as_deref(), &task))?;
    let trials = args.trials.or(validate(cfg.get("trials"))?).unwrap_or(2000);
    let cap = args.cap.or(validate(cfg.get("cap"))?).unwrap_or(1_000_000);
    let learner = Learner::canonical_for(&task);
    let result = harness(find_min_n(
        &learner,
        &task,
        &x0,
        tau,
        trials,
        cap,
        key.child_label("minn"),
    ))?;
    println!(
        "n_hat {}  tau {:.6}  probes {}",
        result.n_hat,
        tau,
        result.estimates.len()
    );

    let mut table = CsvTable::new(vec!["n", "trials", "p_hat", "ci_low", "ci_high"]);
    for (n, est) in &result.estimates {
        table.push(vec![
            n.to_string(),
            est.trials.to_string(),
            sig9(est.p_hat),
            sig9(est.ci_low),
            sig9(est.ci_high),
        ]);
    }
    let config = json!({
        "subcommand": "min-n", "task": task_value(&task), "tau": tau,
        "trials": trials, "cap": cap, "x0": x0_raw, "seed": ctx.seed,
    });
    execute(ctx.emit(&args.out, &table, config))
}

fn cmd_attack(args: AttackArgs, cfg: &Cfg, key: RngKey, ctx: &RunContext) -> Result<(), RunError> {
    let task = validate(resolve_task(&args.task, cfg))?;
    let x0_raw: Option<String> = args.x0.or(validate(cfg.get("x0"))?);
    let x0 = validate(build_x0(x0_raw.as_deref(), &task))?;
    let n_total = args
        .n_total
        .or(validate(cfg.get("n_total"))?)
        .unwrap_or(1000);
    let trials = args.trials.or(validate(cfg.get("trials"))?).unwrap_or(1000);
    let epsilon = args
        .epsilon
        .or(validate(cfg.get("epsilon"))?)
        .unwrap_or(0.01);
    let probe_trials = args
        .probe_trials
        .or(validate(cfg.get("probe_trials"))?)
        .unwrap_or(200);
    let learner = validate(build_learner(
        args.learner.or(validate(cfg.get("learner"))?).as_deref(),
        args.learner_json
            .or(validate(cfg.get("learner_json"))?)
            .as_deref(),
        args.r.or(validate(cfg.get("r"))?),
        &task,
    ))?;
    let attack_name: Option<String> = args.attack.or(validate(cfg.get("attack"))?);
    let attack = validate(build_attack(
        attack_name.as_deref(),
        &task,
        &x0,
        n_total,
        epsilon,
        args.y1.or(validate(cfg.get("y1"))?),
        probe_trials,
        key.child_label("probe"),
    ))?;

    let defense_name: String = args
        .defense
        .or(validate(cfg.get("defense"))?)
        .unwrap_or_else(|| "plain".into());
    let defense = match defense_name.as_str() {
        "plain" => Defense::Plain(learner),
        "dpa" => {
            let k_part = args
                .k_part
                .or(validate(cfg.get("k_part"))?)
                .ok_or_else(|| {
                    RunError::Validation(anyhow!("--k-part is required for --defense dpa"))
                })?;
            let plan = validate(PartitionPlan::new(k_part).map_err(|e| anyhow!("--k-part: {e}")))?;
            Defense::Dpa {
                base: learner,
                plan,
            }
        }
        other => {
            return Err(RunError::Validation(anyhow!(
                "--defense must be plain or dpa, got '{other}'"
            )))
        }
    };

    let report = harness(measure_lethal_dose(
        &defense,
        &task,
        &x0,
        &attack,
        n_total,
        trials,
        key.child_label("attack"),
    ))?;
    println!(
        "attack {}  expected_size {:.6} (touched {:.6})  realized {:.6} +- {:.6}",
        report.attack,
        report.expected_size,
        report.expected_touched,
        report.realized_mean,
        report.realized_sd
    );
    println!(
        "post_accuracy {:.6}  ci95 [{:.6}, {:.6}]  defense {}  trials {}",
        report.post_attack_accuracy,
        report.ci_low,
        report.ci_high,
        defense.name(),
        trials
    );

    let mut table = CsvTable::new(vec![
        "task",
        "N",
        "attack",
        "expected_size",
        "realized_mean",
        "realized_sd",
        "post_acc",
        "ci_lo",
        "ci_hi",
    ]);
    table.push(vec![
        task_value(&task).to_string(),
        n_total.to_string(),
        report.attack.clone(),
        sig9(report.expected_size),
        sig9(report.realized_mean),
        sig9(report.realized_sd),
        sig9(report.post_attack_accuracy),
        sig9(report.ci_low),
        sig9(report.ci_high),
    ]);
    let config = json!({
        "subcommand": "attack", "task": task_value(&task), "attack": attack.name(),
        "defense": defense.name(), "n_total": n_total, "trials": trials,
        "epsilon": epsilon, "x0": x0_raw, "seed": ctx.seed,
    });
    if let Some(path) = &args.json {
        execute(
            std::fs::write(path, serde_json::to_string_pretty(&report).unwrap())
                .with_context(|| format!("cannot write {}", path.display())),
        )?;
    }
    execute(ctx.emit(&args.out, &table, config))
}

fn cmd_sweep(args: SweepArgs, cfg: &Cfg, key: RngKey, ctx: &RunContext) -> Result<(), RunError> {
    let family_name: String = args
        .task
        .or(validate(cfg.get("task"))?)
        .ok_or_else(|| RunError::Validation(anyhow!("--task must be bijection or memorization")))?;
    let grid_raw: String = args
        .grid
        .or(validate(cfg.get("grid"))?)
        .ok_or_else(|| RunError::Validation(anyhow!("--grid is required, e.g. 4,8,16,32")))?;
    let grid: Vec<usize> = validate(
        grid_raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| anyhow!("--grid entry '{s}': {e}"))
            })
            .collect::<Result<_>>(),
    )?;
    let family = match family_name.as_str() {
        "bijection" => SweepFamily::Bijection,
        "memorization" => {
            let k = args.k.or(validate(cfg.get("k"))?).unwrap_or(5);
            SweepFamily::Memorization { k }
        }
        other => {
            return Err(RunError::Validation(anyhow!(
                "--task must be bijection or memorization for sweeps, got '{other}'"
            )))
        }
    };
    let tau = args
        .tau
        .or(validate(cfg.get("tau"))?)
        .unwrap_or(match family {
            SweepFamily::Bijection => 0.75,
            SweepFamily::Memorization { .. } => 0.8,
        });
    let n_total = args
        .n_total
        .or(validate(cfg.get("n_total"))?)
        .unwrap_or(2000);
    let trials = args.trials.or(validate(cfg.get("trials"))?).unwrap_or(2000);
    let cap = args.cap.or(validate(cfg.get("cap"))?).unwrap_or(1_000_000);

    let sweep = harness(scaling_sweep(
        family,
        &grid,
        tau,
        n_total,
        trials,
        cap,
        key.child_label("sweep"),
    ))?;
    let mut table = CsvTable::new(vec![
        "family",
        "param",
        "tau",
        "n_hat",
        "lethal_expected",
        "N",
        "product",
    ]);
    for row in &sweep.rows {
        println!(
            "param {:>4}  n_hat {:>6}  lethal {:>12.6}  product {:.6}",
            row.param, row.n_hat, row.lethal_expected, row.product
        );
        table.push(vec![
            row.family.to_string(),
            row.param.to_string(),
            sig9(row.tau),
            row.n_hat.to_string(),
            sig9(row.lethal_expected),
            row.n_total.to_string(),
            sig9(row.product),
        ]);
    }
    println!("product ratio {:.6}", sweep.product_ratio);
    let config = json!({
        "subcommand": "sweep", "task": family_name, "grid": grid, "tau": tau,
        "n_total": n_total, "trials": trials, "cap": cap, "seed": ctx.seed,
    });
    execute(ctx.emit(&args.out, &table, config))
}

fn cmd_dpa_curve(
    args: DpaCurveArgs,
    cfg: &Cfg,
    key: RngKey,
    ctx: &RunContext,
) -> Result<(), RunError> {
    let task = validate(resolve_task(&args.task, cfg))?;
    let base = validate(build_learner(
        args.base.or(validate(cfg.get("base"))?).as_deref(),
        args.learner_json
            .or(validate(cfg.get("learner_json"))?)
            .as_deref(),
        args.r.or(validate(cfg.get("r"))?),
        &task,
    ))?;
    let k_part = args
        .k_part
        .or(validate(cfg.get("k_part"))?)
        .ok_or_else(|| RunError::Validation(anyhow!("--k-part is required")))?;
    let n_total = args
        .n_total
        .or(validate(cfg.get("n_total"))?)
        .unwrap_or(3000);
    let queries = args
        .queries
        .or(validate(cfg.get("queries"))?)
        .unwrap_or(200);

    let curve = harness(dpa_certified_curve(
        &task,
        &base,
        k_part,
        n_total,
        queries,
        key.child_label("curve"),
    ))?;
    println!(
        "clean_accuracy {:.6}  median_certified {:.6}  base_vote_share {:.6}  queries {}",
        curve.clean_accuracy, curve.median_certified, curve.mean_true_vote_share, curve.queries
    );
    let mut table = CsvTable::new(vec!["t", "certified_fraction"]);
    for point in &curve.points {
        table.push(vec![point.t.to_string(), sig9(point.certified_fraction)]);
    }
    let config = json!({
        "subcommand": "dpa-curve", "task": task_value(&task), "base": base,
        "k_part": k_part, "n_total": n_total, "queries": queries, "seed": ctx.seed,
    });
    execute(ctx.emit(&args.out, &table, config))
}

fn cmd_certify_check(args: CertifyCheckArgs, cfg: &Cfg) -> Result<(), RunError> {
    let m = args.m.or(validate(cfg.get("m"))?).unwrap_or(3);
    let k = args.k.or(validate(cfg.get("k"))?).unwrap_or(2);
    let copies = args.copies.or(validate(cfg.get("copies"))?).unwrap_or(2);
    let k_part = args.k_part.or(validate(cfg.get("k_part"))?).unwrap_or(3);
    let t_max = args.t_max.or(validate(cfg.get("t_max"))?).unwrap_or(2);
    let claim_extra = args
        .claim_extra
        .or(validate(cfg.get("claim_extra"))?)
        .unwrap_or(0);
    let task =
        validate(ldc_core::MemorizationTask::cyclic(m, k).map_err(|e| anyhow!("--m/--k: {e}")))?;

    let universe: Vec<LabeledSample> = (0..m as u64)
        .flat_map(|x| (0..k).map(move |y| LabeledSample::discrete(x, y)))
        .collect();

    let dataset_json: Option<String> = args.dataset_json.or(validate(cfg.get("dataset_json"))?);
    let data: Dataset = match &dataset_json {
        Some(raw) => {
            let pairs: Vec<(u64, usize)> = validate(
                serde_json::from_str(raw)
                    .map_err(|e| anyhow!("--dataset-json does not parse as [[x,y],..]: {e}")),
            )?;
            pairs
                .into_iter()
                .map(|(x, y)| LabeledSample::discrete(x, y))
                .collect()
        }
        None => (0..m as u64)
            .flat_map(|x| {
                let y = task.mapping(x).unwrap();
                std::iter::repeat_n(LabeledSample::discrete(x, y.0), copies)
            })
            .collect(),
    };

    let base_name: String = args
        .base
        .or(validate(cfg.get("base"))?)
        .unwrap_or_else(|| "memorization".into());
    let base = match base_name.as_str() {
        "memorization" => Learner::Memorization { m, k },
        "radius_nn" | "radius-nn" => {
            let r = args.r.or(validate(cfg.get("r"))?).ok_or_else(|| {
                RunError::Validation(anyhow!("--r is required for --base radius_nn"))
            })?;
            Learner::RadiusNn { r, k }
        }
        other => {
            return Err(RunError::Validation(anyhow!(
                "--base must be memorization or radius_nn, got '{other}'"
            )))
        }
    };
    let plan = validate(PartitionPlan::new(k_part).map_err(|e| anyhow!("--k-part: {e}")))?;
    let x0_raw: Option<String> = args.x0.or(validate(cfg.get("x0"))?);
    let x0 = validate(build_x0(
        x0_raw.as_deref(),
        &Task::Memorization(task.clone()),
    ))?;

    let (pred, profile) = ldc_core::dpa_predict(&data, &plan, &base, &x0);
    let certificate = execute(dpa_certify(&profile, pred))?;
    println!("certificate {}", certificate.to_json(&profile));

    let claimed = if claim_extra == 0 {
        None
    } else {
        Some(certificate.certified_size + claim_extra)
    };
    let outcome = harness(brute_force_certificate_check(
        &universe, &data, &plan, &base, &x0, t_max, claimed,
    ))?;
    match outcome {
        CheckOutcome::Verified {
            datasets_checked,
            certified_size,
            claimed_size,
        } => {
            println!(
                "verified: no violation among {datasets_checked} datasets (certified {certified_size}, claimed {claimed_size}, t_max {t_max})"
            );
            Ok(())
        }
        CheckOutcome::Violation {
            distance,
            want,
            got,
            poisoned,
        } => {
            let shown: Vec<String> = poisoned
                .entries()
                .map(|(s, c)| format!("({:?},{})x{c}", s.input, s.label))
                .collect();
            println!(
                "violation: claimed size admits an attack of size {distance} flipping {want} -> {got}: {}",
                shown.join(" ")
            );
            if claim_extra == 0 {
                // A violated honest certificate is a soundness failure.
                Err(RunError::Runtime(anyhow!(
                    "certificate violated within its own size"
                )))
            } else {
                Ok(())
            }
        }
    }
}

fn parse_probs(raw: &str, flag: &str) -> Result<FiniteDistribution> {
    let probs: Vec<f64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("{flag} entry '{s}': {e}"))
        })
        .collect::<Result<_>>()?;
    FiniteDistribution::new(probs).map_err(|e| anyhow!("{flag}: {e}"))
}

fn cmd_tv(args: TvArgs, cfg: &Cfg) -> Result<(), RunError> {
    let gaussian = validate(cfg.flag(args.gaussian, "gaussian"))?;
    if gaussian {
        let delta = match (
            args.dist.or(validate(cfg.get("dist"))?),
            &args.mu,
            &args.mu2,
        ) {
            (Some(dist), _, _) => tv_gaussian_separation(dist),
            (None, Some(mu), Some(mu2)) => {
                let a: Vec<f64> =
                    validate(serde_json::from_str(mu).map_err(|e| anyhow!("--mu: {e}")))?;
                let b: Vec<f64> =
                    validate(serde_json::from_str(mu2).map_err(|e| anyhow!("--mu2: {e}")))?;
                if a.len() != b.len() {
                    return Err(RunError::Validation(anyhow!(
                        "--mu and --mu2 must share a dimension"
                    )));
                }
                ldc_core::coupling::tv_gaussian_same_cov(&a, &b)
            }
            _ => {
                return Err(RunError::Validation(anyhow!(
                    "--gaussian needs --dist or both --mu and --mu2"
                )))
            }
        };
        println!("{delta:.6}");
        return Ok(());
    }
    let u_raw: Option<String> = args.u.or(validate(cfg.get("u"))?);
    let v_raw: Option<String> = args.v.or(validate(cfg.get("v"))?);
    let (Some(u_raw), Some(v_raw)) = (u_raw, v_raw) else {
        return Err(RunError::Validation(anyhow!(
            "finite mode needs --u and --v (or use --gaussian)"
        )));
    };
    let u = validate(parse_probs(&u_raw, "--u"))?;
    let v = validate(parse_probs(&v_raw, "--v"))?;
    let delta = execute(tv_finite(&u, &v))?;
    println!("{delta:.6}");
    Ok(())
}

fn cmd_couple(args: CoupleArgs, cfg: &Cfg, key: RngKey) -> Result<(), RunError> {
    let gaussian = validate(cfg.flag(args.gaussian, "gaussian"))?;
    let draws = args
        .draws
        .or(validate(cfg.get("draws"))?)
        .unwrap_or(100_000);
    if draws == 0 {
        return Err(RunError::Validation(anyhow!("--draws must be at least 1")));
    }

    let (u, v, exact) = if gaussian {
        let dist = args
            .dist
            .or(validate(cfg.get("dist"))?)
            .ok_or_else(|| RunError::Validation(anyhow!("--gaussian needs --dist")))?;
        let u = Distribution::Gaussian(GaussianDistribution::new(vec![0.0]));
        let v = Distribution::Gaussian(GaussianDistribution::new(vec![dist]));
        let exact = tv_gaussian_separation(dist);
        (u, v, exact)
    } else {
        let u_raw: Option<String> = args.u.or(validate(cfg.get("u"))?);
        let v_raw: Option<String> = args.v.or(validate(cfg.get("v"))?);
        let (Some(u_raw), Some(v_raw)) = (u_raw, v_raw) else {
            return Err(RunError::Validation(anyhow!(
                "finite mode needs --u and --v (or use --gaussian)"
            )));
        };
        let fu = validate(parse_probs(&u_raw, "--u"))?;
        let fv = validate(parse_probs(&v_raw, "--v"))?;
        let exact = execute(tv_finite(&fu, &fv))?;
        (Distribution::Finite(fu), Distribution::Finite(fv), exact)
    };

    let mut rng = key.child_label("couple").stream();
    let mut mismatches = 0usize;
    let mut u_index_counts: Option<Vec<u64>> = match &u {
        Distribution::Finite(f) => Some(vec![0; f.support_size()]),
        _ => None,
    };
    let mut v_index_counts = u_index_counts.clone();
    let mut u_first = Vec::new();
    let mut v_first = Vec::new();
    for _ in 0..draws {
        let pair = execute(maximal_coupling_sample(&u, &v, &mut rng))?;
        if !pair.matched {
            mismatches += 1;
        }
        match (&pair.u, &pair.v) {
            (SampleValue::Index(i), SampleValue::Index(j)) => {
                if let (Some(uc), Some(vc)) = (&mut u_index_counts, &mut v_index_counts) {
                    uc[*i] += 1;
                    vc[*j] += 1;
                }
            }
            (SampleValue::Point(a), SampleValue::Point(b)) => {
                u_first.push(a[0]);
                v_first.push(b[0]);
            }
            _ => {}
        }
    }
    let rate = mismatches as f64 / draws as f64;
    let se = (exact * (1.0 - exact) / draws as f64)
        .sqrt()
        .max(f64::MIN_POSITIVE);
    println!(
        "exact_delta {exact:.6}  mismatch_rate {rate:.6}  deviation_se {:.3}  draws {draws}",
        (rate - exact).abs() / se
    );
    match (&u, &v) {
        (Distribution::Finite(fu), Distribution::Finite(fv)) => {
            let (stat_u, p_u) = chi_square_gof(u_index_counts.as_ref().unwrap(), fu.probs());
            let (stat_v, p_v) = chi_square_gof(v_index_counts.as_ref().unwrap(), fv.probs());
            println!("u_marginal chi2 {stat_u:.4} p {p_u:.6}");
            println!("v_marginal chi2 {stat_v:.4} p {p_v:.6}");
        }
        _ => {
            let (mu_u, sd_u) = ldc_core::stats::mean_sd(&u_first);
            let (mu_v, sd_v) = ldc_core::stats::mean_sd(&v_first);
            println!("u_marginal mean {mu_u:.4} var {:.4}", sd_u * sd_u);
            println!("v_marginal mean {mu_v:.4} var {:.4}", sd_v * sd_v);
        }
    }

    if let Some(n) = args.detector_n.or(validate(cfg.get("detector_n"))?) {
        let trials = args
            .trials
            .or(validate(cfg.get("trials"))?)
            .unwrap_or(10_000);
        let (Distribution::Finite(fu), Distribution::Finite(fv)) = (&u, &v) else {
            return Err(RunError::Validation(anyhow!(
                "--detector-n requires finite distributions"
            )));
        };
        // Indicator of all draws landing where U out-weighs V; attains the
        // TV bound at n = 1.
        let heavy: Vec<bool> = fu
            .probs()
            .iter()
            .zip(fv.probs())
            .map(|(p, q)| p > q)
            .collect();
        let est = discrimination_advantage(
            move |d| {
                d.iter().all(|s| match s {
                    SampleValue::Index(i) => heavy[*i],
                    _ => false,
                })
            },
            &u,
            &v,
            n,
            trials,
            &mut rng,
        );
        println!(
            "detector_n {n}  advantage {:.6}  se {:.6}  linear_bound {:.6}",
            est.advantage,
            est.se,
            n as f64 * exact
        );
    }
    Ok(())
}
