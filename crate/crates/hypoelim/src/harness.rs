//! Monte-Carlo experiment engine: runs trial grids over algorithms and
//! δ values, estimates error probability and mean sample count, and
//! reports the Average Bayes Risk (δ/H²)·E[N] + p_e per cell.
//!
//! Determinism contract: every trial draws from a private ChaCha stream
//! keyed by (master seed, algorithm index, δ index, trial index), and
//! aggregation folds trial records in trial order after the parallel
//! map completes. Results are therefore bit-identical for any worker
//! count.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::clustering::{build_cluster_map, ClusteringConfig};
use crate::elimination::{run_with_map, PolicyConfig, PolicyError};
use crate::gjl::{run_gjl_with_cap, GjlError, GjlTrial};
use crate::instance::{draw_true_hypothesis, ProblemInstance};

/// Upper endpoint of the two-sided 95% Wilson score interval.
pub fn wilson_upper_bound(successes: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center + spread) / (1.0 + z2 / n)).min(1.0)
}

/// An algorithm entry in an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    /// The multi-stage elimination policy with a uniform proximity
    /// threshold ε for every action (ε = 0 disables clustering).
    Elimination { epsilon: f64 },
    /// The greedy fixed-budget baseline.
    GjlAsDescribed,
}

impl AlgorithmSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmSpec::Elimination { .. } => "elimination",
            AlgorithmSpec::GjlAsDescribed => "gjl_as_described",
        }
    }

    /// ε column value for the CSV; the baseline has no proximity
    /// parameter and reports 0.
    pub fn epsilon(&self) -> f64 {
        match self {
            AlgorithmSpec::Elimination { epsilon } => *epsilon,
            AlgorithmSpec::GjlAsDescribed => 0.0,
        }
    }
}

fn default_trials() -> u64 {
    10_000
}

fn default_gjl_trials() -> u64 {
    100
}

/// Grid description for [`sweep`].
#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    pub algorithms: Vec<AlgorithmSpec>,
    /// Strictly positive, sorted descending.
    pub delta_grid: Vec<f64>,
    /// Trials per elimination cell.
    #[serde(default = "default_trials")]
    pub trials_per_cell: u64,
    /// Trials per baseline cell; the baseline's N is near-deterministic
    /// given the survivor path, so far fewer trials suffice.
    #[serde(default = "default_gjl_trials")]
    pub gjl_trials_per_cell: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Per-trial sample cap for baseline cells; capped trials are
    /// excluded from the cell statistics and flagged in the CSV.
    #[serde(default)]
    pub trial_cap: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(algorithms: Vec<AlgorithmSpec>, delta_grid: Vec<f64>) -> Self {
        ExperimentConfig {
            algorithms,
            delta_grid,
            trials_per_cell: default_trials(),
            gjl_trials_per_cell: default_gjl_trials(),
            master_seed: 0,
            trial_cap: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for &d in &self.delta_grid {
            if !(d > 0.0 && d < 1.0) {
                return Err(HarnessError::InvalidConfig(format!(
                    "delta {d} outside (0, 1)"
                )));
            }
        }
        if self.delta_grid.windows(2).any(|w| w[0] <= w[1]) {
            return Err(HarnessError::InvalidConfig(
                "delta grid must be sorted strictly descending".into(),
            ));
        }
        if self.trials_per_cell == 0 || self.gjl_trials_per_cell == 0 {
            return Err(HarnessError::InvalidConfig(
                "trial counts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn trials_for(&self, spec: &AlgorithmSpec) -> u64 {
        match spec {
            AlgorithmSpec::Elimination { .. } => self.trials_per_cell,
            AlgorithmSpec::GjlAsDescribed => self.gjl_trials_per_cell,
        }
    }
}

/// Aggregated statistics of one (algorithm, δ) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub algorithm: String,
    pub family: String,
    pub delta: f64,
    pub epsilon: f64,
    /// Completed (uncapped) trials; the basis for every statistic below.
    pub trials: u64,
    pub errors: u64,
    pub p_e_hat: f64,
    pub p_e_wilson_upper: f64,
    pub mean_n: f64,
    pub stderr_n: f64,
    /// (δ/H²)·mean_n + p_e_hat.
    pub abr: f64,
    pub capped: bool,
    /// Trials abandoned at the sample cap.
    pub capped_trials: u64,
    /// Stages simulated across completed trials (bookkeeping).
    pub stages: u64,
    /// Stage stopping times with other than one winner; must stay 0.
    pub uniqueness_violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub hypotheses: usize,
    pub cells: Vec<CellStats>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(
        "trial {trial} of cell ({algorithm}, delta={delta}) failed under master seed {master_seed}: {source}"
    )]
    TrialFailed {
        algorithm: String,
        delta: f64,
        trial: u64,
        master_seed: u64,
        source: TrialFailure,
    },
    #[error("CSV parse error: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrialFailure {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Gjl(#[from] GjlError),
}

impl TrialFailure {
    /// Stage overruns are a distinct failure class for exit-code mapping.
    pub fn is_overrun(&self) -> bool {
        matches!(self, TrialFailure::Policy(PolicyError::StageOverrun { .. }))
    }
}

/// Private random stream of one trial, keyed by position in the grid.
pub fn trial_rng(master_seed: u64, algo_index: u64, delta_index: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&algo_index.to_le_bytes());
    key[16..24].copy_from_slice(&delta_index.to_le_bytes());
    key[24..32].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, Copy)]
struct TrialRecord {
    n: u64,
    correct: bool,
    capped: bool,
    stages: u64,
    uniqueness_violations: u64,
}

/// Runs one (algorithm, δ) cell: `trials` independent trials, each with
/// its own derived stream, drawing the true hypothesis from the priors.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    inst: &ProblemInstance,
    spec: &AlgorithmSpec,
    delta: f64,
    trials: u64,
    master_seed: u64,
    algo_index: u64,
    delta_index: u64,
    trial_cap: Option<u64>,
) -> Result<CellStats, HarnessError> {
    let policy = match spec {
        AlgorithmSpec::Elimination { epsilon } => {
            let clustering = ClusteringConfig::uniform(*epsilon, inst.num_actions());
            let map = build_cluster_map(inst, &clustering);
            Some((PolicyConfig::new(delta, clustering), map))
        }
        AlgorithmSpec::GjlAsDescribed => None,
    };

    let records: Result<Vec<TrialRecord>, HarnessError> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(master_seed, algo_index, delta_index, trial);
            let true_h = draw_true_hypothesis(inst, &mut rng);
            let fail = |source: TrialFailure| HarnessError::TrialFailed {
                algorithm: spec.label().to_string(),
                delta,
                trial,
                master_seed,
                source,
            };
            match &policy {
                Some((cfg, map)) => {
                    let res = run_with_map(inst, map, cfg, true_h, rng)
                        .map_err(|e| fail(e.into()))?;
                    Ok(TrialRecord {
                        n: res.total_samples,
                        correct: res.correct,
                        capped: false,
                        stages: res.stages.len() as u64,
                        uniqueness_violations: res.uniqueness_violations(),
                    })
                }
                None => match run_gjl_with_cap(inst, delta, true_h, rng, trial_cap)
                    .map_err(|e| fail(e.into()))?
                {
                    GjlTrial::Completed(res) => Ok(TrialRecord {
                        n: res.total_samples,
                        correct: res.correct,
                        capped: false,
                        stages: res.stages.len() as u64,
                        uniqueness_violations: res.uniqueness_violations(),
                    }),
                    GjlTrial::Capped { .. } => Ok(TrialRecord {
                        n: 0,
                        correct: true,
                        capped: true,
                        stages: 0,
                        uniqueness_violations: 0,
                    }),
                },
            }
        })
        .collect();
    let records = records?;

    // Sequential fold in trial order keeps the statistics independent
    // of the parallel schedule.
    let mut completed = 0u64;
    let mut errors = 0u64;
    let mut capped_trials = 0u64;
    let mut stages = 0u64;
    let mut uniqueness_violations = 0u64;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for r in &records {
        if r.capped {
            capped_trials += 1;
            continue;
        }
        completed += 1;
        if !r.correct {
            errors += 1;
        }
        stages += r.stages;
        uniqueness_violations += r.uniqueness_violations;
        let x = r.n as f64;
        let d = x - mean;
        mean += d / completed as f64;
        m2 += d * (x - mean);
    }
    let (mean_n, stderr_n) = if completed == 0 {
        (0.0, 0.0)
    } else if completed == 1 {
        (mean, 0.0)
    } else {
        let var = m2 / (completed - 1) as f64;
        (mean, (var / completed as f64).sqrt())
    };
    let p_e_hat = if completed == 0 {
        0.0
    } else {
        errors as f64 / completed as f64
    };
    let h2 = (inst.hypotheses() * inst.hypotheses()) as f64;
    let abr = delta / h2 * mean_n + p_e_hat;
    Ok(CellStats {
        algorithm: spec.label().to_string(),
        family: inst.family_label(),
        delta,
        epsilon: spec.epsilon(),
        trials: completed,
        errors,
        p_e_hat,
        p_e_wilson_upper: wilson_upper_bound(errors, completed),
        mean_n,
        stderr_n,
        abr,
        capped: capped_trials > 0,
        capped_trials,
        stages,
        uniqueness_violations,
    })
}

/// Runs every (algorithm, δ) cell of the grid.
pub fn sweep(inst: &ProblemInstance, config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.algorithms.len() * config.delta_grid.len());
    for (ai, spec) in config.algorithms.iter().enumerate() {
        for (di, &delta) in config.delta_grid.iter().enumerate() {
            cells.push(run_cell(
                inst,
                spec,
                delta,
                config.trials_for(spec),
                config.master_seed,
                ai as u64,
                di as u64,
                config.trial_cap,
            )?);
        }
    }
    Ok(ExperimentResult {
        hypotheses: inst.hypotheses(),
        cells,
    })
}

pub const CSV_HEADER: &str =
    "algorithm,family,delta,epsilon,trials,errors,p_e_hat,p_e_wilson_upper,mean_n,stderr_n,abr,capped";

/// Renders the result as CSV. Floats use Rust's shortest round-trip
/// decimal form.
pub fn to_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &result.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.algorithm,
            c.family,
            c.delta,
            c.epsilon,
            c.trials,
            c.errors,
            c.p_e_hat,
            c.p_e_wilson_upper,
            c.mean_n,
            c.stderr_n,
            c.abr,
            c.capped,
        ));
    }
    out
}

pub fn write_csv(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, to_csv(result))?;
    Ok(())
}

/// Parses a CSV produced by [`to_csv`]. Bookkeeping fields not present
/// in the file come back as zero.
pub fn parse_csv(text: &str) -> Result<Vec<CellStats>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Csv(format!(
                "unexpected header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut cells = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(HarnessError::Csv(format!(
                "line {}: expected 12 fields, got {}",
                ln + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| HarnessError::Csv(format!("line {}: {e}", ln + 2)))
        };
        let parse_u = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| HarnessError::Csv(format!("line {}: {e}", ln + 2)))
        };
        cells.push(CellStats {
            algorithm: fields[0].to_string(),
            family: fields[1].to_string(),
            delta: parse_f(fields[2])?,
            epsilon: parse_f(fields[3])?,
            trials: parse_u(fields[4])?,
            errors: parse_u(fields[5])?,
            p_e_hat: parse_f(fields[6])?,
            p_e_wilson_upper: parse_f(fields[7])?,
            mean_n: parse_f(fields[8])?,
            stderr_n: parse_f(fields[9])?,
            abr: parse_f(fields[10])?,
            capped: fields[11]
                .parse::<bool>()
                .map_err(|e| HarnessError::Csv(format!("line {}: {e}", ln + 2)))?,
            capped_trials: 0,
            stages: 0,
            uniqueness_violations: 0,
        });
    }
    Ok(cells)
}

/// Per-δ ranking of algorithms by mean sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub per_delta: Vec<DeltaRanking>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRanking {
    pub delta: f64,
    /// Sorted ascending by mean_n.
    pub entries: Vec<RankEntry>,
    /// Set when the expected ordering — clustered elimination below
    /// plain elimination below the baseline — does not hold.
    pub ordering_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub label: String,
    pub mean_n: f64,
    pub abr: f64,
    pub ratio_to_best: f64,
}

fn entry_label(c: &CellStats) -> String {
    if c.algorithm == "elimination" {
        format!("elimination(eps={})", c.epsilon)
    } else {
        c.algorithm.clone()
    }
}

pub fn compare_report(cells: &[CellStats]) -> ComparisonReport {
    let mut deltas: Vec<f64> = Vec::new();
    for c in cells {
        if !deltas.contains(&c.delta) {
            deltas.push(c.delta);
        }
    }
    let per_delta = deltas
        .into_iter()
        .map(|delta| {
            let mut group: Vec<&CellStats> = cells.iter().filter(|c| c.delta == delta).collect();
            group.sort_by(|a, b| a.mean_n.total_cmp(&b.mean_n));
            let best = group.first().map(|c| c.mean_n).unwrap_or(0.0);
            let entries = group
                .iter()
                .map(|c| RankEntry {
                    label: entry_label(c),
                    mean_n: c.mean_n,
                    abr: c.abr,
                    ratio_to_best: if best > 0.0 { c.mean_n / best } else { 1.0 },
                })
                .collect();
            let ordering_violation = {
                let find = |pred: &dyn Fn(&&&CellStats) -> bool| {
                    group.iter().find(pred).map(|c| c.mean_n)
                };
                let clustered =
                    find(&|c| c.algorithm == "elimination" && c.epsilon > 0.0);
                let plain = find(&|c| c.algorithm == "elimination" && c.epsilon == 0.0);
                let baseline = find(&|c| c.algorithm == "gjl_as_described");
                match (clustered, plain, baseline) {
                    (Some(c), Some(p), Some(b)) => !(c < p && p < b),
                    _ => false,
                }
            };
            DeltaRanking {
                delta,
                entries,
                ordering_violation,
            }
        })
        .collect();
    ComparisonReport { per_delta }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ranking in &self.per_delta {
            writeln!(f, "delta = {}", ranking.delta)?;
            for e in &ranking.entries {
                writeln!(
                    f,
                    "  {:<28} mean_n = {:<16.6} abr = {:<12.6e} x{:.2} of best",
                    e.label, e.mean_n, e.abr, e.ratio_to_best
                )?;
            }
            if ranking.ordering_violation {
                writeln!(
                    f,
                    "  WARNING: expected ordering (clustered < plain < baseline) violated"
                )?;
            }
        }
        Ok(())
    }
}
