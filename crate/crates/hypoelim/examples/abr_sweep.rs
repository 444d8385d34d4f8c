//! A small Average-Bayes-Risk sweep: three algorithms over a δ grid,
//! written to CSV exactly as the `sweep` subcommand would, then ranked.
//!
//! ```bash
//! cargo run --example abr_sweep
//! ```

use hypoelim::distributions::Family;
use hypoelim::harness::{compare_report, sweep, write_csv, AlgorithmSpec, ExperimentConfig};
use hypoelim::instance::generate_paper_instance;

fn main() {
    let inst = generate_paper_instance(16, Family::NormalUnitVariance, 5).unwrap();
    let mut cfg = ExperimentConfig::new(
        vec![
            AlgorithmSpec::Elimination { epsilon: 0.1 },
            AlgorithmSpec::Elimination { epsilon: 0.0 },
            AlgorithmSpec::GjlAsDescribed,
        ],
        vec![1e-1, 1e-2, 1e-3],
    );
    cfg.trials_per_cell = 400;
    cfg.gjl_trials_per_cell = 10;
    cfg.master_seed = 1;

    let result = sweep(&inst, &cfg).unwrap();
    let path = std::env::temp_dir().join("hypoelim_abr_sweep.csv");
    write_csv(&result, &path).unwrap();
    println!("wrote {}", path.display());
    println!();
    print!("{}", compare_report(&result.cells));
    println!();
    println!(
        "abr = (delta/H^2) * mean_n + p_e per cell; every algorithm's abr falls as \
         delta shrinks, but the greedy baseline pays orders of magnitude more samples \
         at every point of the grid."
    );
}
