//! Structural invariants checked over randomized inputs, plus the
//! stage-level budget-dominance comparison against the baseline.

#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hypoelim::clustering::{build_cluster_map, ClusteringConfig};
use hypoelim::distributions::{
    log_likelihood, squared_param_distance, Family, ParamVector,
};
use hypoelim::elimination::{
    elimination_threshold, run_with_map, select_action, PolicyConfig, StageState,
};
use hypoelim::gjl::plan_stage;
use hypoelim::instance::{
    draw_true_hypothesis, generate_paper_instance, load_instance, save_instance, ActionSpec,
    Environment, ProblemInstance,
};

fn scalar_instance(actions: Vec<Vec<f64>>, family: Family) -> ProblemInstance {
    let h = actions[0].len();
    ProblemInstance::new(
        vec![1.0 / h as f64; h],
        actions
            .into_iter()
            .map(|vals| ActionSpec {
                family,
                params: vals.into_iter().map(ParamVector::scalar).collect(),
            })
            .collect(),
    )
    .unwrap()
}

/// Parameter tables with deliberate duplicates so ε = 0 classes are
/// exercised too.
fn param_table() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 2..10).prop_map(|mut v| {
        if v.len() >= 4 {
            v[1] = v[0];
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clustering_is_a_separated_partition(values in param_table(), eps in 0.0..0.3f64) {
        let h = values.len();
        let inst = scalar_instance(vec![values], Family::NormalUnitVariance);
        let map = build_cluster_map(&inst, &ClusteringConfig::uniform(eps, 1));
        let mut seen = vec![false; h];
        for c in 0..map.num_clusters(0) {
            for i in 0..h {
                if map.label(i, 0) == c {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        for i in 0..h {
            prop_assert!(map.equiv(i, 0).contains(&i));
            for j in 0..h {
                if map.label(i, 0) != map.label(j, 0) {
                    let d = squared_param_distance(inst.theta(i, 0), inst.theta(j, 0)).unwrap();
                    prop_assert!(d > eps);
                }
            }
        }
    }

    #[test]
    fn coarser_epsilon_coarsens_the_partition(values in param_table(), eps in 0.0..0.2f64, extra in 0.0..0.2f64) {
        let inst = scalar_instance(vec![values.clone()], Family::NormalUnitVariance);
        let fine = build_cluster_map(&inst, &ClusteringConfig::uniform(eps, 1));
        let coarse = build_cluster_map(&inst, &ClusteringConfig::uniform(eps + extra, 1));
        for i in 0..values.len() {
            for j in 0..values.len() {
                if fine.label(i, 0) == fine.label(j, 0) {
                    prop_assert_eq!(coarse.label(i, 0), coarse.label(j, 0));
                }
            }
        }
    }

    #[test]
    fn zero_epsilon_is_exact_equality(values in param_table()) {
        let inst = scalar_instance(vec![values.clone()], Family::NormalUnitVariance);
        let map = build_cluster_map(&inst, &ClusteringConfig::uniform(0.0, 1));
        for i in 0..values.len() {
            for j in 0..values.len() {
                prop_assert_eq!(
                    map.label(i, 0) == map.label(j, 0),
                    values[i].to_bits() == values[j].to_bits()
                );
            }
        }
    }

    #[test]
    fn llr_view_is_antisymmetric_and_consistent(
        params in prop::collection::vec(0.1..3.0f64, 3..6),
        xs in prop::collection::vec(0.0..5.0f64, 1..40),
        exponential in any::<bool>(),
    ) {
        let family = if exponential { Family::ExponentialByMean } else { Family::NormalUnitVariance };
        let inst = scalar_instance(vec![params.clone()], family);
        let contestants: Vec<usize> = (0..params.len()).collect();
        let mut state = StageState::new(&inst, 0, contestants.clone());
        let mut naive = vec![vec![0.0f64; params.len()]; params.len()];
        for &x in &xs {
            state.absorb(x);
            for i in 0..params.len() {
                for j in 0..params.len() {
                    if i != j {
                        naive[i][j] += log_likelihood(family, inst.theta(i, 0), x).unwrap()
                            - log_likelihood(family, inst.theta(j, 0), x).unwrap();
                    }
                }
            }
        }
        for &i in &contestants {
            prop_assert_eq!(state.llr(i, i), 0.0);
            for &j in &contestants {
                prop_assert!((state.llr(i, j) + state.llr(j, i)).abs() <= 1e-9);
                prop_assert!((state.llr(i, j) - naive[i][j]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn instances_survive_json_round_trip(
        values in prop::collection::vec(1e-6..4.0f64, 2..8),
        exponential in any::<bool>(),
    ) {
        let family = if exponential { Family::ExponentialByMean } else { Family::NormalUnitVariance };
        let inst = scalar_instance(vec![values], family);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        save_instance(&inst, &path).unwrap();
        let loaded = load_instance(&path).unwrap();
        prop_assert_eq!(inst.priors(), loaded.priors());
        for (a, b) in inst.actions().iter().zip(loaded.actions()) {
            prop_assert_eq!(a.family, b.family);
            for (x, y) in a.params.iter().zip(&b.params) {
                prop_assert!(x.identical(y));
            }
        }
    }

    #[test]
    fn squared_distance_is_a_symmetric_form(
        a in prop::collection::vec(-5.0..5.0f64, 1..4),
        shift in -1.0..1.0f64,
    ) {
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let ta = ParamVector::new(a.clone());
        let tb = ParamVector::new(b);
        let d_ab = squared_param_distance(&ta, &tb).unwrap();
        let d_ba = squared_param_distance(&tb, &ta).unwrap();
        prop_assert_eq!(d_ab.to_bits(), d_ba.to_bits());
        prop_assert!(d_ab >= 0.0);
        prop_assert_eq!(squared_param_distance(&ta, &ta).unwrap(), 0.0);
    }
}

/// Full elimination runs on small random instances keep their
/// structural promises: stage count in [1, H-1], strictly shrinking
/// alive sets, declared hypothesis alive at the end.
#[test]
fn elimination_runs_respect_stage_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for case in 0..40 {
        use rand::Rng;
        let h = 2 + (rng.random::<u64>() % 7) as usize;
        let inst = generate_paper_instance(h, Family::NormalUnitVariance, case).unwrap();
        let eps = if case % 2 == 0 { 0.0 } else { 0.1 };
        let cfg = PolicyConfig::new(
            1e-2,
            ClusteringConfig::uniform(eps, inst.num_actions()),
        );
        let map = build_cluster_map(&inst, &cfg.clustering);
        let true_h = draw_true_hypothesis(&inst, &mut rng);
        let trial_rng = ChaCha8Rng::seed_from_u64(10_000 + case);
        let res = run_with_map(&inst, &map, &cfg, true_h, trial_rng).unwrap();
        assert!(!res.stages.is_empty() && res.stages.len() < h);
        let mut alive_len = h;
        for s in &res.stages {
            assert_eq!(s.alive_before.len(), alive_len);
            assert!(s.alive_after.len() < alive_len);
            alive_len = s.alive_after.len();
            assert_eq!(s.winners_at_stop, 1);
        }
        assert_eq!(alive_len, 1);
        assert_eq!(res.stages.last().unwrap().alive_after, vec![res.declared]);
        assert_eq!(
            res.total_samples,
            res.stages.iter().map(|s| s.tau).sum::<u64>()
        );
    }
}

/// Stage-level comparison against the baseline budget: running the
/// clustered policy's first stage under the action it would pick, its
/// stopping time beats the baseline's fixed budget for that action in
/// at least 99% of trials (and in expectation by a wide margin).
#[test]
fn clustered_stage_rarely_exceeds_baseline_budget() {
    let inst = generate_paper_instance(16, Family::NormalUnitVariance, 5).unwrap();
    let clustering = ClusteringConfig::uniform(0.1, inst.num_actions());
    let map = build_cluster_map(&inst, &clustering);
    let alive: Vec<usize> = (0..16).collect();
    let action = select_action(&inst, &map, &alive).unwrap();
    let delta = 1e-2;
    let gamma = elimination_threshold(16, delta);
    let budget = plan_stage(&inst, &alive, action, gamma).tau_fixed;

    let mut cfg = PolicyConfig::new(delta, clustering);
    cfg.action_override = Some(vec![action]);

    let runs = 10_000u64;
    let mut within_budget = 0u64;
    let mut tau_sum = 0u64;
    for t in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(31_000 + t);
        let true_h = draw_true_hypothesis(&inst, &mut rng);
        let res = run_with_map(&inst, &map, &cfg, true_h, rng).unwrap();
        let tau = res.stages[0].tau;
        assert_eq!(res.stages[0].action, action);
        tau_sum += tau;
        if tau <= budget {
            within_budget += 1;
        }
    }
    let fraction = within_budget as f64 / runs as f64;
    assert!(
        fraction >= 0.99,
        "only {fraction} of stages stayed within the baseline budget {budget}"
    );
    assert!((tau_sum as f64 / runs as f64) < budget as f64);
}

/// The benchmark generator satisfies the model assumptions for both
/// families across seeds, with finite positive constants.
#[test]
fn benchmark_instances_satisfy_assumptions_across_seeds() {
    for family in [Family::NormalUnitVariance, Family::ExponentialByMean] {
        for seed in 0..20 {
            let inst = generate_paper_instance(16, family, seed).unwrap();
            let report = hypoelim::verify_assumptions(&inst);
            assert!(report.a1_holds && report.a3_holds, "{family} seed {seed}");
            let alpha = report.alpha.unwrap();
            assert!(alpha > 0.0 && alpha <= report.beta && report.beta.is_finite());
        }
    }
}

/// GJL stage: hypotheses with identical parameters under the stage
/// action always share fate, whatever the draws.
#[test]
fn baseline_ties_share_fate_under_randomness() {
    let inst = scalar_instance(
        vec![vec![0.3, 0.3, 0.3, 2.0, 2.0]],
        Family::ExponentialByMean,
    );
    let gamma = elimination_threshold(5, 1e-1);
    let alive = vec![0, 1, 2, 3, 4];
    let plan = plan_stage(&inst, &alive, 0, gamma);
    for t in 0..200 {
        let rng = ChaCha8Rng::seed_from_u64(t);
        let mut env = Environment::new(&inst, 3, rng);
        let survivors = hypoelim::gjl::gjl_stage(&inst, &alive, &plan, &mut env);
        assert!(
            survivors == vec![0, 1, 2] || survivors == vec![3, 4],
            "tied hypotheses split: {survivors:?}"
        );
    }
}
