//! Inspect how the proximity threshold ε reshapes each action's
//! hypothesis clusters, and read the per-action validity margins that
//! certify (or warn about) an ε choice.
//!
//! ```bash
//! cargo run --example clustering_preview
//! ```

use hypoelim::clustering::{build_cluster_map, validate_epsilon, ClusteringConfig, EpsilonValidation};
use hypoelim::distributions::Family;
use hypoelim::instance::generate_paper_instance;

fn main() {
    for family in [Family::NormalUnitVariance, Family::ExponentialByMean] {
        let inst = generate_paper_instance(16, family, 5).unwrap();
        println!("== {family} ==");
        for eps in [0.0, 0.05, 0.1, 1.0] {
            let map = build_cluster_map(&inst, &ClusteringConfig::uniform(eps, inst.num_actions()));
            let sizes: Vec<usize> = (0..inst.num_actions())
                .map(|a| map.num_clusters(a))
                .collect();
            println!("eps = {eps:<4}: clusters per action {sizes:?}");
        }

        // The engine compares cluster representatives, so an ε is only
        // safe for an action if every cross-cluster LLR drift stays
        // positive: a negative margin warns that some stage can favor
        // the wrong cluster.
        let map = build_cluster_map(&inst, &ClusteringConfig::uniform(0.1, inst.num_actions()));
        let all: Vec<usize> = (0..16).collect();
        println!("eps = 0.1 margins (bits):");
        for a in 0..inst.num_actions() {
            match validate_epsilon(&inst, &map, a) {
                EpsilonValidation::Margin(m) => {
                    let flag = if m > 0.0 { "ok     " } else { "WARNING" };
                    println!(
                        "  action {a:2}: {flag} margin {m:9.3}, contestants {:?}",
                        map.repr(&all, a)
                    );
                }
                EpsilonValidation::Uninformative => {
                    println!("  action {a:2}: uninformative (single cluster)");
                }
            }
        }
        println!();
    }
    println!(
        "Note how the exponential family flags negative margins at eps = 0.1: squared \
         parameter distance understates how asymmetric its divergences are, so wide \
         clusters can put a representative much closer to an outsider than to its own \
         cluster mates. The margin scan is exactly the diagnostic for tuning eps."
    );
}
