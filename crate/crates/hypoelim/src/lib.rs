//! Active sequential hypothesis testing by multi-stage elimination.
//!
//! A decision maker must identify the true hypothesis among `H`
//! candidates by choosing actions; each action yields i.i.d.
//! observations whose distribution depends on the true hypothesis. The
//! library implements:
//!
//! - [`distributions`] — the observation families (unit-variance
//!   normal, exponential-by-mean) with closed-form KL divergences, all
//!   in base-2 logarithms;
//! - [`instance`] — problem instances, the benchmark generator,
//!   assumption verification, and JSON persistence;
//! - [`clustering`] — per-action ε-reachability clustering of the
//!   hypothesis parameters (DBSCAN, `min_pts = 1` by default) with
//!   `equiv`/`repr` queries and ε-validity margins;
//! - [`elimination`] — the multi-stage LLR elimination policy: pick the
//!   action with maximal cross-cluster separation, run an Armitage-style
//!   contest among cluster representatives to threshold log₂(H/δ), keep
//!   the winner's cluster;
//! - [`gjl`] — the greedy fixed-budget baseline it is compared against;
//! - [`harness`] — a deterministic parallel Monte-Carlo engine
//!   estimating error probability, mean sample count, and the Average
//!   Bayes Risk (δ/H²)·E[N] + p_e over (algorithm, δ) grids, with CSV
//!   output;
//! - [`cli`] — the `hypoelim` binary (`gen`, `verify`, `run`, `sweep`,
//!   `report`).
//!
//! The `examples/` directory walks through each capability; start with
//! `generate_and_verify`.

// Pairwise scans over hypothesis indices read better as index loops.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod clustering;
pub mod distributions;
pub mod elimination;
pub mod gjl;
pub mod harness;
pub mod instance;

pub use clustering::{build_cluster_map, ClusterMap, ClusteringConfig, EpsilonValidation};
pub use distributions::{Family, ParamVector};
pub use elimination::{run as run_elimination, PolicyConfig, RunResult};
pub use gjl::run_gjl;
pub use harness::{sweep, AlgorithmSpec, ExperimentConfig, ExperimentResult};
pub use instance::{generate_paper_instance, verify_assumptions, ProblemInstance};
