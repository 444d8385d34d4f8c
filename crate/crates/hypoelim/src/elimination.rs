//! Multi-stage LLR-based hypothesis elimination.
//!
//! A run keeps a shrinking set of alive hypotheses. Each stage selects
//! the action with the largest minimum cross-cluster parameter distance
//! over the alive set, takes one cluster representative per alive
//! cluster as contestants, and repeatedly applies the action until one
//! contestant's accumulated LLR against every other reaches
//! γ = log₂(H/δ). The winner's whole cluster survives, everything else
//! is discarded; the loop ends when a single hypothesis remains.
//!
//! γ uses the initial hypothesis count `H` in every stage: the error
//! budget δ is split as δ/H per stage over at most H − 1 stages.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::clustering::{build_cluster_map, ClusterMap, ClusteringConfig};
use crate::distributions::{affine_log_density, squared_param_distance, AffineLogDensity};
use crate::instance::{Environment, ProblemInstance};

/// Elimination-stage threshold γ = log₂(H/δ) in bits.
pub fn elimination_threshold(h: usize, delta: f64) -> f64 {
    (h as f64 / delta).log2()
}

/// Tuning for one elimination run.
#[derive(Debug, Clone)]
pub struct PolicyConfig {
    /// Target error scale δ ∈ (0, 1); the stage threshold is log₂(H/δ).
    pub delta: f64,
    pub clustering: ClusteringConfig,
    /// A stage exceeding this many samples aborts the run; it signals a
    /// proximity parameter that merged hypotheses the stage action
    /// cannot actually separate (a non-positive ΔD margin).
    pub max_samples_per_stage: u64,
    /// Fixed actions for the leading stages (testing hook); later
    /// stages fall back to [`select_action`].
    pub action_override: Option<Vec<usize>>,
}

impl PolicyConfig {
    pub const DEFAULT_MAX_SAMPLES_PER_STAGE: u64 = 1_000_000_000;

    pub fn new(delta: f64, clustering: ClusteringConfig) -> Self {
        assert!(
            delta > 0.0 && delta < 1.0,
            "delta must lie in (0, 1), got {delta}"
        );
        PolicyConfig {
            delta,
            clustering,
            max_samples_per_stage: Self::DEFAULT_MAX_SAMPLES_PER_STAGE,
            action_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    /// Every action leaves the alive set in one cluster: the clustered
    /// analogue of an assumption-A3 violation.
    #[error("no action separates the alive hypotheses into more than one cluster")]
    NoSeparatingAction,
    /// The stage failed to produce a winner within the sample budget.
    #[error("stage overran {samples} samples under action {action} (suspect non-positive cluster margin)")]
    StageOverrun { action: usize, samples: u64 },
    /// The requested action has fewer than two contestants.
    #[error("action {action} yields fewer than two contestants for the alive set")]
    TooFewContestants { action: usize },
}

/// Running state of one stage: the contestants and their accumulated
/// log-likelihood scores.
///
/// Both supported families have log₂-densities of the form
/// `intercept + slope·x` up to a contestant-independent term, so the
/// pairwise accumulated LLR is `L_ij = τ·(αᵢ−αⱼ) + (βᵢ−βⱼ)·Σx`:
/// tracking the sample count and observation sum reconstructs the whole
/// antisymmetric LLR matrix exactly.
#[derive(Debug, Clone)]
pub struct StageState {
    action: usize,
    contestants: Vec<usize>,
    coeffs: Vec<AffineLogDensity>,
    tau: u64,
    sum_x: f64,
}

impl StageState {
    /// `contestants` must be sorted hypothesis indices, at least two.
    pub fn new(inst: &ProblemInstance, action: usize, contestants: Vec<usize>) -> Self {
        assert!(contestants.len() >= 2, "a stage needs at least two contestants");
        let spec = inst.action(action);
        let coeffs = contestants
            .iter()
            .map(|&i| affine_log_density(spec.family, &spec.params[i]).expect("validated instance"))
            .collect();
        StageState {
            action,
            contestants,
            coeffs,
            tau: 0,
            sum_x: 0.0,
        }
    }

    pub fn action(&self) -> usize {
        self.action
    }

    pub fn contestants(&self) -> &[usize] {
        &self.contestants
    }

    /// Samples absorbed so far (τ).
    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn absorb(&mut self, x: f64) {
        self.tau += 1;
        self.sum_x += x;
    }

    /// Accumulated score of contestant slot `c` (log-likelihood up to a
    /// shared additive term).
    fn score(&self, c: usize) -> f64 {
        self.tau as f64 * self.coeffs[c].intercept + self.coeffs[c].slope * self.sum_x
    }

    /// Accumulated LLR `L_ij` in bits between hypotheses `i` and `j`
    /// (both must be contestants). Exactly antisymmetric with
    /// `llr(i, i) = 0`.
    pub fn llr(&self, i: usize, j: usize) -> f64 {
        let ci = self.slot(i);
        let cj = self.slot(j);
        self.score(ci) - self.score(cj)
    }

    fn slot(&self, hypothesis: usize) -> usize {
        self.contestants
            .iter()
            .position(|&h| h == hypothesis)
            .unwrap_or_else(|| panic!("hypothesis {hypothesis} is not a contestant"))
    }

    /// The contestant whose LLR against every other reaches `gamma`, if
    /// any: equivalently the score leader with a lead of at least
    /// `gamma` over the runner-up.
    pub fn winner(&self, gamma: f64) -> Option<usize> {
        let (top, _, lead) = self.leader();
        (lead >= gamma).then(|| self.contestants[top])
    }

    /// How many contestants satisfy the winning condition; anything but
    /// 0 or 1 would contradict LLR antisymmetry.
    pub fn winning_contestants(&self, gamma: f64) -> usize {
        let (top, second, _) = self.leader();
        (0..self.contestants.len())
            .filter(|&c| {
                let rival = if c == top { second } else { top };
                self.score(c) - self.score(rival) >= gamma
            })
            .count()
    }

    /// (leader slot, runner-up slot, lead in bits).
    fn leader(&self) -> (usize, usize, f64) {
        let mut top = 0usize;
        let mut second = 1usize;
        if self.score(second) > self.score(top) {
            std::mem::swap(&mut top, &mut second);
        }
        for c in 2..self.contestants.len() {
            let s = self.score(c);
            if s > self.score(top) {
                second = top;
                top = c;
            } else if s > self.score(second) {
                second = c;
            }
        }
        (top, second, self.score(top) - self.score(second))
    }
}

/// Picks the action maximizing the minimum squared parameter distance
/// over alive cross-cluster pairs; actions whose alive hypotheses share
/// one cluster are excluded, ties go to the smallest action index.
pub fn select_action(
    inst: &ProblemInstance,
    map: &ClusterMap,
    alive: &[usize],
) -> Result<usize, PolicyError> {
    assert!(alive.len() >= 2, "action selection needs at least two alive hypotheses");
    let mut best: Option<(f64, usize)> = None;
    for (a, spec) in inst.actions().iter().enumerate() {
        let mut min_sq: Option<f64> = None;
        for (pos, &i) in alive.iter().enumerate() {
            for &j in &alive[pos + 1..] {
                if map.label(i, a) == map.label(j, a) {
                    continue;
                }
                let d = squared_param_distance(&spec.params[i], &spec.params[j])
                    .expect("validated instance");
                min_sq = Some(min_sq.map_or(d, |m: f64| m.min(d)));
            }
        }
        if let Some(score) = min_sq {
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, a));
            }
        }
    }
    best.map(|(_, a)| a).ok_or(PolicyError::NoSeparatingAction)
}

/// Result of one completed stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOutcome {
    pub winner: usize,
    pub tau: u64,
    /// Contestants meeting the winning condition at the stopping time;
    /// always 1 (asserted) — recorded so harnesses can account for it.
    pub winners_at_stop: usize,
}

/// Runs one stage: contestants are `repr(alive, action)`; observations
/// are drawn until some contestant's LLR against every other reaches
/// `gamma`.
pub fn run_stage<R: Rng>(
    inst: &ProblemInstance,
    map: &ClusterMap,
    alive: &[usize],
    action: usize,
    gamma: f64,
    env: &mut Environment<'_, R>,
    max_samples: u64,
) -> Result<StageOutcome, PolicyError> {
    let contestants = map.repr(alive, action);
    if contestants.len() < 2 {
        return Err(PolicyError::TooFewContestants { action });
    }
    let mut state = StageState::new(inst, action, contestants);
    loop {
        if state.tau() >= max_samples {
            return Err(PolicyError::StageOverrun {
                action,
                samples: state.tau(),
            });
        }
        state.absorb(env.observe(action).value);
        if let Some(winner) = state.winner(gamma) {
            let winners_at_stop = state.winning_contestants(gamma);
            assert_eq!(
                winners_at_stop, 1,
                "stage produced {winners_at_stop} simultaneous winners"
            );
            return Ok(StageOutcome {
                winner,
                tau: state.tau(),
                winners_at_stop,
            });
        }
    }
}

/// One stage in a run's trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub action: usize,
    pub tau: u64,
    pub winner: usize,
    pub alive_before: Vec<usize>,
    pub alive_after: Vec<usize>,
    pub winners_at_stop: usize,
}

impl StageRecord {
    pub fn eliminated(&self) -> usize {
        self.alive_before.len() - self.alive_after.len()
    }
}

/// Outcome of a full run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub declared: usize,
    pub total_samples: u64,
    pub correct: bool,
    pub stages: Vec<StageRecord>,
}

impl RunResult {
    /// Stages whose stopping time had other-than-one winner; zero by
    /// construction, tracked for auditability.
    pub fn uniqueness_violations(&self) -> u64 {
        self.stages
            .iter()
            .filter(|s| s.winners_at_stop != 1)
            .count() as u64
    }
}

/// Runs the elimination policy, building the cluster map from
/// `cfg.clustering` first. Prefer [`run_with_map`] when the same map
/// serves many trials.
pub fn run<R: Rng>(
    inst: &ProblemInstance,
    cfg: &PolicyConfig,
    true_hypothesis: usize,
    rng: R,
) -> Result<RunResult, PolicyError> {
    let map = build_cluster_map(inst, &cfg.clustering);
    run_with_map(inst, &map, cfg, true_hypothesis, rng)
}

pub fn run_with_map<R: Rng>(
    inst: &ProblemInstance,
    map: &ClusterMap,
    cfg: &PolicyConfig,
    true_hypothesis: usize,
    rng: R,
) -> Result<RunResult, PolicyError> {
    let h = inst.hypotheses();
    let gamma = elimination_threshold(h, cfg.delta);
    let mut env = Environment::new(inst, true_hypothesis, rng);
    let mut alive: Vec<usize> = (0..h).collect();
    let mut stages = Vec::new();

    while alive.len() >= 2 {
        let stage_index = stages.len();
        let action = match cfg
            .action_override
            .as_ref()
            .and_then(|seq| seq.get(stage_index))
        {
            Some(&a) => {
                assert!(a < inst.num_actions(), "override action {a} out of range");
                a
            }
            None => select_action(inst, map, &alive)?,
        };
        let outcome = run_stage(
            inst,
            map,
            &alive,
            action,
            gamma,
            &mut env,
            cfg.max_samples_per_stage,
        )?;
        let cluster = map.equiv(outcome.winner, action);
        let survivors: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|i| cluster.binary_search(i).is_ok())
            .collect();
        assert!(
            !survivors.is_empty() && survivors.len() < alive.len(),
            "stage must strictly shrink the alive set"
        );
        assert!(survivors.contains(&outcome.winner));
        stages.push(StageRecord {
            action,
            tau: outcome.tau,
            winner: outcome.winner,
            alive_before: alive.clone(),
            alive_after: survivors.clone(),
            winners_at_stop: outcome.winners_at_stop,
        });
        alive = survivors;
    }

    let declared = alive[0];
    let total_samples = env.samples_drawn();
    debug_assert_eq!(total_samples, stages.iter().map(|s| s.tau).sum::<u64>());
    Ok(RunResult {
        declared,
        total_samples,
        correct: declared == env.true_hypothesis(),
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{log_likelihood, Family, ParamVector};
    use crate::instance::{generate_paper_instance, ActionSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_instance(actions: Vec<Vec<f64>>) -> ProblemInstance {
        let h = actions[0].len();
        ProblemInstance::new(
            vec![1.0 / h as f64; h],
            actions
                .into_iter()
                .map(|vals| ActionSpec {
                    family: Family::NormalUnitVariance,
                    params: vals.into_iter().map(ParamVector::scalar).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn zero_eps(inst: &ProblemInstance) -> ClusterMap {
        build_cluster_map(inst, &ClusteringConfig::uniform(0.0, inst.num_actions()))
    }

    #[test]
    fn threshold_matches_definition() {
        approx::assert_relative_eq!(
            elimination_threshold(16, 1e-3),
            (16000.0f64).log2(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn select_action_prefers_larger_gap() {
        // Two hypotheses; action gaps squared: 0.04 vs 9.0.
        let inst = scalar_instance(vec![vec![0.0, 0.2], vec![0.0, 3.0]]);
        let map = zero_eps(&inst);
        assert_eq!(select_action(&inst, &map, &[0, 1]).unwrap(), 1);
    }

    #[test]
    fn select_action_ignores_within_cluster_pairs() {
        // Action 0 separates {0,1} from {2} once 0 and 1 are clustered;
        // its cross-cluster gap (≥ 4) then beats action 1's gap (1).
        let inst = scalar_instance(vec![vec![0.0, 0.25, 2.5], vec![0.0, 1.0, 2.0]]);
        let clustered = build_cluster_map(&inst, &ClusteringConfig::per_action(vec![0.1, 0.0]));
        assert_eq!(select_action(&inst, &clustered, &[0, 1, 2]).unwrap(), 0);
        // Without clustering the 0.0625 gap of action 0 loses to action 1.
        let plain = zero_eps(&inst);
        assert_eq!(select_action(&inst, &plain, &[0, 1, 2]).unwrap(), 1);
    }

    #[test]
    fn select_action_matches_bruteforce_on_paper_instance() {
        for seed in [0, 1, 2, 3] {
            let inst = generate_paper_instance(16, Family::NormalUnitVariance, seed).unwrap();
            for eps in [0.0, 0.1] {
                let map =
                    build_cluster_map(&inst, &ClusteringConfig::uniform(eps, inst.num_actions()));
                let alive: Vec<usize> = (0..16).collect();
                let got = select_action(&inst, &map, &alive).unwrap();
                // Independent re-derivation over all ordered pairs.
                let mut best: Option<(f64, usize)> = None;
                for a in 0..inst.num_actions() {
                    let mut m: Option<f64> = None;
                    for &i in &alive {
                        for &j in &alive {
                            if i == j || map.label(i, a) == map.label(j, a) {
                                continue;
                            }
                            let d = squared_param_distance(inst.theta(i, a), inst.theta(j, a))
                                .unwrap();
                            m = Some(m.map_or(d, |v: f64| v.min(d)));
                        }
                    }
                    if let Some(score) = m {
                        let better = match best {
                            None => true,
                            Some((s, _)) => score > s,
                        };
                        if better {
                            best = Some((score, a));
                        }
                    }
                }
                assert_eq!(got, best.unwrap().1, "seed {seed} eps {eps}");
            }
        }
    }

    #[test]
    fn select_action_errors_when_everything_merges() {
        let inst = scalar_instance(vec![vec![0.0, 0.1, 0.2]]);
        let map = build_cluster_map(&inst, &ClusteringConfig::uniform(10.0, 1));
        assert_eq!(
            select_action(&inst, &map, &[0, 1, 2]),
            Err(PolicyError::NoSeparatingAction)
        );
    }

    #[test]
    fn two_contestant_stage_is_a_wald_test() {
        // Contestants at means {0, 3}, true mean 3, γ = log₂(16/1e-3).
        // Oracle: an independent pairwise-LLR accumulation with the same
        // stopping rule, run side by side on fresh randomness.
        let inst = scalar_instance(vec![vec![0.0, 3.0]]);
        let map = zero_eps(&inst);
        let gamma = elimination_threshold(16, 1e-3);
        let trials = 10_000;

        let mut sum_tau = 0u64;
        for t in 0..trials {
            let rng = ChaCha8Rng::seed_from_u64(1000 + t);
            let mut env = Environment::new(&inst, 1, rng);
            let out = run_stage(&inst, &map, &[0, 1], 0, gamma, &mut env, 1 << 30).unwrap();
            assert_eq!(out.winner, 1);
            sum_tau += out.tau;
        }
        let mean_tau = sum_tau as f64 / trials as f64;
        assert!(
            (1.0..=6.0).contains(&mean_tau),
            "mean stage length {mean_tau} outside [1, 6]"
        );

        // Independent oracle with explicit per-sample LLR sums.
        let theta0 = ParamVector::scalar(0.0);
        let theta1 = ParamVector::scalar(3.0);
        let mut oracle_sum = 0u64;
        for t in 0..trials {
            let rng = ChaCha8Rng::seed_from_u64(500_000 + t);
            let mut env = Environment::new(&inst, 1, rng);
            let mut l10 = 0.0;
            let mut tau = 0u64;
            loop {
                let x = env.observe(0).value;
                l10 += log_likelihood(Family::NormalUnitVariance, &theta1, x).unwrap()
                    - log_likelihood(Family::NormalUnitVariance, &theta0, x).unwrap();
                tau += 1;
                if l10.abs() >= gamma {
                    break;
                }
            }
            oracle_sum += tau;
        }
        let oracle_mean = oracle_sum as f64 / trials as f64;
        assert!(
            (mean_tau - oracle_mean).abs() <= 0.10 * oracle_mean,
            "stage runner mean {mean_tau} vs oracle mean {oracle_mean}"
        );
    }

    #[test]
    fn llr_matrix_matches_naive_accumulation() {
        // Dual route: StageState's affine reconstruction vs a direct
        // pairwise sum of log-likelihood ratios.
        for family in [Family::NormalUnitVariance, Family::ExponentialByMean] {
            let params = [0.4, 0.9, 2.0, 3.0];
            let inst = ProblemInstance::new(
                vec![0.25; 4],
                vec![ActionSpec {
                    family,
                    params: params.iter().map(|&v| ParamVector::scalar(v)).collect(),
                }],
            )
            .unwrap();
            let mut state = StageState::new(&inst, 0, vec![0, 1, 2, 3]);
            let mut naive = vec![vec![0.0f64; 4]; 4];
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut env = Environment::new(&inst, 2, &mut rng);
            for _ in 0..5_000 {
                let x = env.observe(0).value;
                state.absorb(x);
                for i in 0..4 {
                    for j in 0..4 {
                        if i != j {
                            let li =
                                log_likelihood(family, &ParamVector::scalar(params[i]), x).unwrap();
                            let lj =
                                log_likelihood(family, &ParamVector::scalar(params[j]), x).unwrap();
                            naive[i][j] += li - lj;
                        }
                    }
                }
            }
            for i in 0..4 {
                assert_eq!(state.llr(i, i), 0.0);
                for j in 0..4 {
                    assert!(
                        (state.llr(i, j) - naive[i][j]).abs() <= 1e-9,
                        "{family} L[{i}][{j}]: {} vs naive {}",
                        state.llr(i, j),
                        naive[i][j]
                    );
                    assert!(
                        (state.llr(i, j) + state.llr(j, i)).abs() <= 1e-9,
                        "antisymmetry violated"
                    );
                }
            }
        }
    }

    #[test]
    fn winner_is_unique_at_stop() {
        let inst = scalar_instance(vec![vec![0.0, 1.0, 2.5]]);
        let map = zero_eps(&inst);
        let gamma = elimination_threshold(3, 1e-2);
        for t in 0..2_000 {
            let rng = ChaCha8Rng::seed_from_u64(t);
            let mut env = Environment::new(&inst, (t % 3) as usize, rng);
            let out = run_stage(&inst, &map, &[0, 1, 2], 0, gamma, &mut env, 1 << 30).unwrap();
            assert_eq!(out.winners_at_stop, 1);
        }
    }

    #[test]
    fn stage_overrun_is_an_error() {
        let inst = scalar_instance(vec![vec![0.0, 0.05]]);
        let map = zero_eps(&inst);
        let rng = ChaCha8Rng::seed_from_u64(3);
        let mut env = Environment::new(&inst, 0, rng);
        // γ needs ~5600 samples at this separation; cap at 10.
        let err = run_stage(&inst, &map, &[0, 1], 0, 20.0, &mut env, 10).unwrap_err();
        assert!(matches!(err, PolicyError::StageOverrun { action: 0, samples: 10 }));
    }

    #[test]
    fn two_hypotheses_terminate_in_one_stage() {
        let inst = scalar_instance(vec![vec![0.0, 3.0]]);
        let cfg = PolicyConfig::new(1e-3, ClusteringConfig::uniform(0.0, 1));
        for t in 0..50 {
            let res = run(&inst, &cfg, (t % 2) as usize, ChaCha8Rng::seed_from_u64(t)).unwrap();
            assert_eq!(res.stages.len(), 1);
            assert!(res.declared == 0 || res.declared == 1);
            assert_eq!(res.total_samples, res.stages[0].tau);
        }
    }

    #[test]
    fn alive_set_shrinks_monotonically() {
        let inst = generate_paper_instance(16, Family::NormalUnitVariance, 4).unwrap();
        let cfg = PolicyConfig::new(1e-2, ClusteringConfig::uniform(0.1, 17));
        let map = build_cluster_map(&inst, &cfg.clustering);
        for t in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(9_000 + t);
            let true_h = crate::instance::draw_true_hypothesis(&inst, &mut rng);
            let res = run_with_map(&inst, &map, &cfg, true_h, rng).unwrap();
            assert!(!res.stages.is_empty() && res.stages.len() <= 15);
            let mut prev = 16;
            for s in &res.stages {
                assert_eq!(s.alive_before.len(), prev);
                assert!(s.alive_after.len() < prev);
                assert!(s.eliminated() >= 1);
                prev = s.alive_after.len();
            }
            assert_eq!(prev, 1);
            assert_eq!(res.uniqueness_violations(), 0);
        }
    }

    #[test]
    fn clustered_runs_use_few_samples_at_small_delta() {
        // Order-of-magnitude check on the benchmark geometry: the
        // clustered policy resolves 16 hypotheses in on the order of
        // hundreds of samples even at δ = 1e-5.
        let inst = generate_paper_instance(16, Family::NormalUnitVariance, 4).unwrap();
        let cfg = PolicyConfig::new(1e-5, ClusteringConfig::uniform(0.1, 17));
        let map = build_cluster_map(&inst, &cfg.clustering);
        let trials = 300;
        let mut total = 0u64;
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(40_000 + t);
            let true_h = crate::instance::draw_true_hypothesis(&inst, &mut rng);
            let res = run_with_map(&inst, &map, &cfg, true_h, rng).unwrap();
            total += res.total_samples;
        }
        let mean = total as f64 / trials as f64;
        assert!(
            (20.0..=5_000.0).contains(&mean),
            "clustered mean sample count {mean} out of expected order"
        );
    }

    #[test]
    fn action_override_is_honored_then_released() {
        let inst = generate_paper_instance(8, Family::NormalUnitVariance, 1).unwrap();
        let mut cfg = PolicyConfig::new(1e-2, ClusteringConfig::uniform(0.0, 9));
        cfg.action_override = Some(vec![8]);
        let res = run(&inst, &cfg, 3, ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(res.stages[0].action, 8);
    }
}
