//! Command-line front end.
//!
//! Subcommands: `gen` (write a benchmark instance), `verify` (assumption
//! report), `run` (one trial with optional stage trace), `sweep`
//! (Monte-Carlo grid to CSV), `report` (re-rank an existing CSV).
//!
//! Exit codes: 0 success, 1 domain failure (assumption or separation
//! violations), 2 usage or I/O errors, 3 stage overrun. All randomness
//! comes from explicit `--seed` flags, so every output is replayable.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::ClusteringConfig;
use crate::distributions::Family;
use crate::elimination::{run as run_elimination, PolicyConfig, PolicyError};
use crate::gjl::run_gjl;
use crate::harness::{
    compare_report, parse_csv, sweep, write_csv, AlgorithmSpec, ExperimentConfig, HarnessError,
};
use crate::instance::{
    draw_true_hypothesis, generate_paper_instance, load_instance, save_instance,
    verify_assumptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_OVERRUN: i32 = 3;

/// Workers fallback when `--workers` is absent.
pub const WORKERS_ENV: &str = "HYPOELIM_WORKERS";

#[derive(Parser)]
#[command(
    name = "hypoelim",
    version,
    about = "Active sequential hypothesis testing: multi-stage LLR elimination, a greedy baseline, and Bayes-risk sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Normal,
    Exponential,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Normal => Family::NormalUnitVariance,
            FamilyArg::Exponential => Family::ExponentialByMean,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Elim,
    Gjl,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance file.
    Gen {
        #[arg(long)]
        hypotheses: usize,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify model assumptions on an instance file.
    Verify { instance: PathBuf },
    /// Execute a single trial and print its result as one JSON line.
    Run {
        instance: PathBuf,
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        delta: f64,
        /// Proximity threshold on squared parameter distance
        /// (elimination only).
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        /// Additionally print one JSON line per stage.
        #[arg(long)]
        trace: bool,
    },
    /// Run a Monte-Carlo grid and write the cell statistics as CSV.
    Sweep {
        instance: PathBuf,
        /// Experiment config JSON; overrides the grid flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Descending δ grid, e.g. `--deltas 1e-1,1e-2,1e-3`.
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        /// One elimination entry per ε, e.g. `--epsilons 0,0.1`.
        #[arg(long, value_delimiter = ',')]
        epsilons: Vec<f64>,
        /// Include the greedy baseline.
        #[arg(long)]
        gjl: bool,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        gjl_trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-trial sample cap for baseline cells.
        #[arg(long)]
        trial_cap: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing output file.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: HYPOELIM_WORKERS or all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the per-δ ranking summary of an existing sweep CSV.
    Report { csv: PathBuf },
}

/// Entry point used by the binary; parses `std::env::args`.
pub fn run_from_env() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    run_from_args(args)
}

/// Testable entry point: parses the given argv and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }

    fn overrun(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_OVERRUN,
            message: message.into(),
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Gen {
            hypotheses,
            family,
            seed,
            out,
        } => cmd_gen(hypotheses, family.into(), seed, &out),
        Command::Verify { instance } => cmd_verify(&instance),
        Command::Run {
            instance,
            algo,
            delta,
            epsilon,
            seed,
            trace,
        } => cmd_run(&instance, algo, delta, epsilon, seed, trace),
        Command::Sweep {
            instance,
            config,
            deltas,
            epsilons,
            gjl,
            trials,
            gjl_trials,
            seed,
            trial_cap,
            out,
            force,
            workers,
        } => cmd_sweep(SweepArgs {
            instance,
            config,
            deltas,
            epsilons,
            gjl,
            trials,
            gjl_trials,
            seed,
            trial_cap,
            out,
            force,
            workers,
        }),
        Command::Report { csv } => cmd_report(&csv),
    }
}

fn cmd_gen(hypotheses: usize, family: Family, seed: u64, out: &Path) -> Result<i32, CliError> {
    if hypotheses < 2 {
        return Err(CliError::usage(format!(
            "--hypotheses must be at least 2, got {hypotheses}"
        )));
    }
    let inst = generate_paper_instance(hypotheses, family, seed)
        .map_err(|e| CliError::usage(e.to_string()))?;
    save_instance(&inst, out)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "{{\"hypotheses\":{},\"actions\":{},\"family\":\"{}\"}}",
        inst.hypotheses(),
        inst.num_actions(),
        inst.family_label()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(path: &Path) -> Result<i32, CliError> {
    let inst = load_instance(path).map_err(|e| CliError::usage(e.to_string()))?;
    let report = verify_assumptions(&inst);
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    if report.a1_holds && report.a3_holds {
        Ok(EXIT_OK)
    } else {
        Err(CliError::domain(format!(
            "assumptions violated (A1: {}, A3: {}, pairs: {:?})",
            report.a1_holds, report.a3_holds, report.violating_pairs
        )))
    }
}

fn cmd_run(
    path: &Path,
    algo: AlgoArg,
    delta: f64,
    epsilon: f64,
    seed: u64,
    trace: bool,
) -> Result<i32, CliError> {
    let inst = load_instance(path).map_err(|e| CliError::usage(e.to_string()))?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::usage(format!("--delta must lie in (0, 1), got {delta}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(CliError::usage(format!(
            "--epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let true_h = draw_true_hypothesis(&inst, &mut rng);
    let result = match algo {
        AlgoArg::Elim => {
            let cfg = PolicyConfig::new(
                delta,
                ClusteringConfig::uniform(epsilon, inst.num_actions()),
            );
            run_elimination(&inst, &cfg, true_h, rng).map_err(|e| match e {
                PolicyError::StageOverrun { .. } => CliError::overrun(e.to_string()),
                _ => CliError::domain(e.to_string()),
            })?
        }
        AlgoArg::Gjl => {
            run_gjl(&inst, delta, true_h, rng).map_err(|e| CliError::domain(e.to_string()))?
        }
    };
    if trace {
        for (r, s) in result.stages.iter().enumerate() {
            println!(
                "{}",
                serde_json::json!({
                    "stage": r,
                    "action": s.action,
                    "tau": s.tau,
                    "winner": s.winner,
                    "alive_before": s.alive_before,
                    "alive_after": s.alive_after,
                })
            );
        }
    }
    println!(
        "{}",
        serde_json::json!({
            "declared": result.declared,
            "true_hypothesis": true_h,
            "total_samples": result.total_samples,
            "correct": result.correct,
            "stages": result.stages.len(),
        })
    );
    Ok(EXIT_OK)
}

struct SweepArgs {
    instance: PathBuf,
    config: Option<PathBuf>,
    deltas: Vec<f64>,
    epsilons: Vec<f64>,
    gjl: bool,
    trials: Option<u64>,
    gjl_trials: Option<u64>,
    seed: u64,
    trial_cap: Option<u64>,
    out: PathBuf,
    force: bool,
    workers: Option<usize>,
}

fn cmd_sweep(args: SweepArgs) -> Result<i32, CliError> {
    let inst = load_instance(&args.instance).map_err(|e| CliError::usage(e.to_string()))?;
    if args.out.exists() && !args.force {
        return Err(CliError::usage(format!(
            "{} exists; pass --force to overwrite",
            args.out.display()
        )));
    }

    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::usage(format!("bad sweep config: {e}")))?
        }
        None => {
            if args.deltas.is_empty() {
                return Err(CliError::usage("either --config or --deltas is required"));
            }
            if args.epsilons.is_empty() && !args.gjl {
                return Err(CliError::usage(
                    "no algorithms selected: pass --epsilons and/or --gjl",
                ));
            }
            let mut algorithms: Vec<AlgorithmSpec> = args
                .epsilons
                .iter()
                .map(|&epsilon| AlgorithmSpec::Elimination { epsilon })
                .collect();
            if args.gjl {
                algorithms.push(AlgorithmSpec::GjlAsDescribed);
            }
            let mut cfg = ExperimentConfig::new(algorithms, args.deltas.clone());
            if let Some(t) = args.trials {
                cfg.trials_per_cell = t;
            }
            if let Some(t) = args.gjl_trials {
                cfg.gjl_trials_per_cell = t;
            }
            cfg.master_seed = args.seed;
            cfg.trial_cap = args.trial_cap;
            cfg
        }
    };

    let workers = args.workers.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    let run = || -> Result<_, HarnessError> { sweep(&inst, &config) };
    let result = match workers {
        Some(w) if w >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::usage(e.to_string()))?;
            pool.install(run)
        }
        _ => run(),
    }
    .map_err(harness_error_to_cli)?;

    write_csv(&result, &args.out)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", args.out.display())))?;
    print!("{}", compare_report(&result.cells));
    Ok(EXIT_OK)
}

fn harness_error_to_cli(e: HarnessError) -> CliError {
    match &e {
        HarnessError::TrialFailed { source, .. } if source.is_overrun() => {
            CliError::overrun(e.to_string())
        }
        HarnessError::TrialFailed { .. } => CliError::domain(e.to_string()),
        HarnessError::InvalidConfig(_) | HarnessError::Csv(_) | HarnessError::Io(_) => {
            CliError::usage(e.to_string())
        }
    }
}

fn cmd_report(path: &Path) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let cells = parse_csv(&text).map_err(|e| CliError::usage(e.to_string()))?;
    print!("{}", compare_report(&cells));
    Ok(EXIT_OK)
}
