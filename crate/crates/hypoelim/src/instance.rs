//! The problem environment: hypotheses, priors, actions with per-action
//! parameter tables, the benchmark-instance generator, assumption
//! verification, and JSON persistence.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{
    kl_divergence, sample, squared_param_distance, Family, ParamVector,
};

/// Smallest exponential mean the generator will emit; uniform draws are
/// clamped here so rates stay finite.
pub const MIN_EXPONENTIAL_MEAN: f64 = 1e-6;

const PRIOR_SUM_TOLERANCE: f64 = 1e-12;

/// One action: a distribution family plus one parameter vector per
/// hypothesis (entry `i` is θᵢ(a)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub family: Family,
    pub params: Vec<ParamVector>,
}

/// An immutable testing environment: `H` hypotheses with priors and a
/// finite action set. Exactly one hypothesis is true per trial; every
/// distribution parameter is known to the decision maker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    hypotheses: usize,
    priors: Vec<f64>,
    actions: Vec<ActionSpec>,
}

// Deserialization funnels through `new` so a loaded file is validated
// exactly like a constructed instance.
impl<'de> Deserialize<'de> for ProblemInstance {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            hypotheses: usize,
            priors: Vec<f64>,
            actions: Vec<ActionSpec>,
        }
        let raw = Raw::deserialize(deserializer)?;
        if raw.priors.len() != raw.hypotheses {
            return Err(serde::de::Error::custom(format!(
                "hypotheses field is {} but {} priors given",
                raw.hypotheses,
                raw.priors.len()
            )));
        }
        ProblemInstance::new(raw.priors, raw.actions).map_err(serde::de::Error::custom)
    }
}

impl ProblemInstance {
    /// Builds and validates an instance. `priors.len()` sets `H`.
    pub fn new(priors: Vec<f64>, actions: Vec<ActionSpec>) -> Result<Self, InstanceError> {
        let h = priors.len();
        if h < 2 {
            return Err(InstanceError::TooFewHypotheses(h));
        }
        if actions.is_empty() {
            return Err(InstanceError::Invalid("at least one action required".into()));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(InstanceError::Invalid(format!(
                "priors sum to {sum}, expected 1"
            )));
        }
        if priors.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(InstanceError::Invalid(
                "every prior must lie strictly inside (0, 1)".into(),
            ));
        }
        for (a, spec) in actions.iter().enumerate() {
            if spec.params.len() != h {
                return Err(InstanceError::Invalid(format!(
                    "action {a} has {} parameter vectors, expected {h}",
                    spec.params.len()
                )));
            }
            for (i, theta) in spec.params.iter().enumerate() {
                spec.family.validate(theta).map_err(|e| {
                    InstanceError::Invalid(format!("action {a}, hypothesis {i}: {e}"))
                })?;
            }
        }
        Ok(ProblemInstance {
            hypotheses: h,
            priors,
            actions,
        })
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn action(&self, a: usize) -> &ActionSpec {
        &self.actions[a]
    }

    /// θᵢ(a).
    pub fn theta(&self, i: usize, a: usize) -> &ParamVector {
        &self.actions[a].params[i]
    }

    /// Family label for reporting: the common family name, or `mixed`.
    pub fn family_label(&self) -> String {
        let first = self.actions[0].family;
        if self.actions.iter().all(|a| a.family == first) {
            first.as_str().to_string()
        } else {
            "mixed".to_string()
        }
    }
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("at least two hypotheses are required, got {0}")]
    TooFewHypotheses(usize),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("instance schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Generates the benchmark instance family used throughout the
/// simulations.
///
/// `H` hypotheses, `H + 1` actions. Action `a ∈ {0..H-1}` is dedicated
/// to hypothesis `a`: its mean is 3 under that hypothesis and an
/// independent uniform [0, 1) draw otherwise (drawn once, stored).
/// The last action assigns hypothesis `i` the mean `0.5 + 0.01·i`,
/// making every hypothesis barely distinguishable. Priors are uniform.
/// Deterministic in `seed`.
pub fn generate_paper_instance(
    h: usize,
    family: Family,
    seed: u64,
) -> Result<ProblemInstance, InstanceError> {
    if h < 2 {
        return Err(InstanceError::TooFewHypotheses(h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random();
        match family {
            Family::NormalUnitVariance => u,
            Family::ExponentialByMean => u.max(MIN_EXPONENTIAL_MEAN),
        }
    };
    let mut actions = Vec::with_capacity(h + 1);
    for a in 0..h {
        let params = (0..h)
            .map(|i| {
                if i == a {
                    ParamVector::scalar(3.0)
                } else {
                    ParamVector::scalar(draw(&mut rng))
                }
            })
            .collect();
        actions.push(ActionSpec { family, params });
    }
    let last = (0..h)
        .map(|i| ParamVector::scalar(0.5 + 0.01 * i as f64))
        .collect();
    actions.push(ActionSpec {
        family,
        params: last,
    });
    let priors = vec![1.0 / h as f64; h];
    ProblemInstance::new(priors, actions)
}

/// Empirical check of the model assumptions on a concrete instance.
///
/// `alpha`/`beta` bracket the nonzero KL divergences over all actions
/// and ordered pairs; `c1`/`c2` are the tightest constants sandwiching
/// ‖θᵢ−θⱼ‖² / KLD over nonidentical pairs. `a1_holds` fails if some
/// action has zero divergence for every pair; `a3_holds` fails if some
/// hypothesis pair is inseparable under every action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub alpha: Option<f64>,
    pub beta: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub a1_holds: bool,
    pub a3_holds: bool,
    /// Hypothesis pairs (i < j) with zero KLD under every action.
    pub violating_pairs: Vec<(usize, usize)>,
}

pub fn verify_assumptions(inst: &ProblemInstance) -> AssumptionReport {
    let h = inst.hypotheses();
    let mut alpha: Option<f64> = None;
    let mut beta = 0.0_f64;
    let mut c1: Option<f64> = None;
    let mut c2: Option<f64> = None;
    let mut a1_holds = true;
    // separated[i][j] = some action distinguishes i from j
    let mut separated = vec![vec![false; h]; h];

    for spec in inst.actions() {
        let mut action_informative = false;
        for i in 0..h {
            for j in 0..h {
                if i == j {
                    continue;
                }
                let kl = kl_divergence(spec.family, &spec.params[i], &spec.params[j])
                    .expect("validated instance");
                beta = beta.max(kl);
                if kl > 0.0 {
                    action_informative = true;
                    separated[i][j] = true;
                    alpha = Some(alpha.map_or(kl, |a: f64| a.min(kl)));
                }
                if !spec.params[i].identical(&spec.params[j]) && kl > 0.0 {
                    let ratio = squared_param_distance(&spec.params[i], &spec.params[j])
                        .expect("validated instance")
                        / kl;
                    c1 = Some(c1.map_or(ratio, |c: f64| c.min(ratio)));
                    c2 = Some(c2.map_or(ratio, |c: f64| c.max(ratio)));
                }
            }
        }
        if !action_informative {
            a1_holds = false;
        }
    }

    let mut violating_pairs = Vec::new();
    for i in 0..h {
        for j in (i + 1)..h {
            if !(separated[i][j] || separated[j][i]) {
                violating_pairs.push((i, j));
            }
        }
    }
    let a3_holds = violating_pairs.is_empty();
    if alpha.is_none() {
        a1_holds = false;
    }
    AssumptionReport {
        alpha,
        beta,
        c1,
        c2,
        a1_holds,
        a3_holds,
        violating_pairs,
    }
}

/// Draws the trial's true hypothesis from the priors.
pub fn draw_true_hypothesis<R: Rng + ?Sized>(inst: &ProblemInstance, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in inst.priors().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    inst.hypotheses() - 1
}

/// One observation obtained by taking an action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub value: f64,
    pub action: usize,
    /// 1-based draw counter within the owning environment.
    pub time_index: u64,
}

/// A live trial: the instance plus the realized true hypothesis and the
/// trial's private random stream. Each concurrent trial owns one.
pub struct Environment<'a, R: Rng> {
    inst: &'a ProblemInstance,
    true_hypothesis: usize,
    rng: R,
    time: u64,
}

impl<'a, R: Rng> Environment<'a, R> {
    pub fn new(inst: &'a ProblemInstance, true_hypothesis: usize, rng: R) -> Self {
        assert!(
            true_hypothesis < inst.hypotheses(),
            "true hypothesis {true_hypothesis} out of range (H = {})",
            inst.hypotheses()
        );
        Environment {
            inst,
            true_hypothesis,
            rng,
            time: 0,
        }
    }

    /// Draws the next observation under `action`.
    pub fn observe(&mut self, action: usize) -> Observation {
        assert!(
            action < self.inst.num_actions(),
            "action {action} out of range (|A| = {})",
            self.inst.num_actions()
        );
        let spec = self.inst.action(action);
        let value = sample(
            spec.family,
            &spec.params[self.true_hypothesis],
            &mut self.rng,
        )
        .expect("validated instance");
        self.time += 1;
        Observation {
            value,
            action,
            time_index: self.time,
        }
    }

    pub fn samples_drawn(&self) -> u64 {
        self.time
    }

    pub fn true_hypothesis(&self) -> usize {
        self.true_hypothesis
    }
}

/// Writes the instance as pretty-printed JSON (stable bytes for a given
/// instance; floats keep full round-trip precision).
pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<(), InstanceError> {
    let mut text = serde_json::to_string_pretty(inst)
        .map_err(|e| InstanceError::Schema(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| InstanceError::Schema(e.to_string()))
}
