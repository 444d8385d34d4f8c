//! Head-to-head sample counts: clustered elimination vs plain
//! elimination vs the greedy fixed-budget baseline, same instance, same
//! target error scale.
//!
//! ```bash
//! cargo run --example baseline_comparison
//! ```

use hypoelim::distributions::Family;
use hypoelim::harness::{run_cell, AlgorithmSpec};
use hypoelim::instance::generate_paper_instance;

fn main() {
    let delta = 1e-2;
    for family in [Family::NormalUnitVariance, Family::ExponentialByMean] {
        let inst = generate_paper_instance(16, family, 5).unwrap();
        println!("== {family}, delta = {delta} ==");
        let cells = [
            (AlgorithmSpec::Elimination { epsilon: 0.1 }, 500u64),
            (AlgorithmSpec::Elimination { epsilon: 0.0 }, 500),
            (AlgorithmSpec::GjlAsDescribed, 25),
        ];
        let mut best = f64::INFINITY;
        for (i, (spec, trials)) in cells.iter().enumerate() {
            let cell = run_cell(&inst, spec, delta, *trials, 11, i as u64, 0, None).unwrap();
            best = best.min(cell.mean_n);
            println!(
                "  {:<24} mean N = {:>12.1}  (x{:>8.1} of best)  p_e = {:.4}  abr = {:.3e}",
                format!("{}(eps={})", cell.algorithm, cell.epsilon),
                cell.mean_n,
                cell.mean_n / best,
                cell.p_e_hat,
                cell.abr
            );
        }
        println!();
    }
    println!(
        "The baseline budgets every stage for its two closest distinguishable \
         hypotheses, so near-identical pairs cost it millions of draws. Elimination \
         stops each stage as soon as one contestant dominates, and clustering lets it \
         defer splitting near-identical hypotheses until a better action exists. \
         Where the margin diagnostic warns against eps = 0.1 (the exponential family; \
         see the clustering_preview example), the clustered variant trades its sample \
         savings for errors - pick eps per family, not globally."
    );
}
