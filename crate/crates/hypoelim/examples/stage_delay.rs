//! Per-stage sample counts against the information-theoretic
//! prediction gamma / deltaD on a fixed two-cluster instance.
//!
//! With two clusters there is a single opposing representative, so the
//! predicted stage delay is unambiguous: the contest between the true
//! cluster's representative k and the outsider j accumulates LLR at
//! deltaD = D(true‖j) − D(true‖k) bits per sample and stops at
//! gamma = log2(H/delta). The empirical mean approaches the prediction
//! from above as delta shrinks.
//!
//! ```bash
//! cargo run --example stage_delay
//! ```

use hypoelim::clustering::{build_cluster_map, ClusteringConfig};
use hypoelim::distributions::Family;
use hypoelim::elimination::{elimination_threshold, run_stage};
use hypoelim::instance::{ActionSpec, Environment, ProblemInstance};
use hypoelim::ParamVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    // Clusters {0, 0.05} and {1.0, 1.05}; the true hypothesis (mean
    // 0.05) is represented by its cluster mate at mean 0.
    let inst = ProblemInstance::new(
        vec![0.25; 4],
        vec![ActionSpec {
            family: Family::NormalUnitVariance,
            params: [0.0, 0.05, 1.0, 1.05]
                .iter()
                .map(|&v| ParamVector::scalar(v))
                .collect(),
        }],
    )
    .unwrap();
    let map = build_cluster_map(&inst, &ClusteringConfig::uniform(0.01, 1));
    let delta_d = (0.95f64.powi(2) - 0.05f64.powi(2)) / (2.0 * std::f64::consts::LN_2);
    println!("deltaD = {delta_d:.4} bits per sample");
    println!("{:>8} {:>10} {:>10} {:>8}", "delta", "predicted", "mean tau", "ratio");

    for delta in [1e-1, 1e-2, 1e-3, 1e-4] {
        let gamma = elimination_threshold(4, delta);
        let predicted = gamma / delta_d;
        let runs = 10_000u64;
        let mut total = 0u64;
        for t in 0..runs {
            let rng = ChaCha8Rng::seed_from_u64(70_000 + t);
            let mut env = Environment::new(&inst, 1, rng);
            let outcome =
                run_stage(&inst, &map, &[0, 1, 2, 3], 0, gamma, &mut env, 1 << 40).unwrap();
            total += outcome.tau;
        }
        let mean = total as f64 / runs as f64;
        println!(
            "{delta:>8} {predicted:>10.2} {mean:>10.2} {:>8.4}",
            mean / predicted
        );
    }
}
