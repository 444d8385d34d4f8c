//! One elimination run, stage by stage: which action each stage picked,
//! which representatives competed, how many samples the contest took,
//! and who survived.
//!
//! ```bash
//! cargo run --example single_run_trace
//! ```

use hypoelim::clustering::ClusteringConfig;
use hypoelim::distributions::Family;
use hypoelim::elimination::{elimination_threshold, run, PolicyConfig};
use hypoelim::instance::{draw_true_hypothesis, generate_paper_instance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let inst = generate_paper_instance(16, Family::NormalUnitVariance, 5).unwrap();
    let delta = 1e-3;
    let cfg = PolicyConfig::new(delta, ClusteringConfig::uniform(0.1, inst.num_actions()));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let true_h = draw_true_hypothesis(&inst, &mut rng);
    println!(
        "true hypothesis: {true_h}, threshold gamma = log2(H/delta) = {:.3} bits",
        elimination_threshold(inst.hypotheses(), delta)
    );

    let result = run(&inst, &cfg, true_h, rng).unwrap();
    for (r, s) in result.stages.iter().enumerate() {
        println!(
            "stage {r:2}: action {:2}, tau = {:3}, winner {:2}, alive {:2} -> {:2}  {:?}",
            s.action,
            s.tau,
            s.winner,
            s.alive_before.len(),
            s.alive_after.len(),
            s.alive_after
        );
    }
    println!(
        "declared {} after {} samples ({}); {} stages for 16 hypotheses",
        result.declared,
        result.total_samples,
        if result.correct { "correct" } else { "WRONG" },
        result.stages.len()
    );
}
