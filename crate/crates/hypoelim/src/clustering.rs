//! Per-action proximity clustering of hypothesis parameters.
//!
//! For each action the hypothesis parameter vectors are partitioned by
//! ε-reachability: two parameters share a cluster when a chain of
//! parameters connects them with squared ℓ₂ distance at most ε_a
//! between consecutive links. This is DBSCAN with `min_pts = 1`, which
//! reduces to connected components of the ε-graph; with `min_pts > 1`
//! points DBSCAN would call noise get singleton clusters so the result
//! is always a total partition. At ε = 0 the clusters are exact
//! parameter-equality classes.
//!
//! The map is built once per instance as a preprocessing step; stage
//! queries (`equiv`, `repr`) are read-only.

use serde::Serialize;

use crate::distributions::{kl_divergence, squared_param_distance};
use crate::instance::ProblemInstance;

/// Thresholds are on SQUARED ℓ₂ distance, one per action.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringConfig {
    epsilon: Vec<f64>,
    min_pts: usize,
}

impl ClusteringConfig {
    /// Same ε for every action (`ε_a = ε`), `min_pts = 1`.
    pub fn uniform(epsilon: f64, num_actions: usize) -> Self {
        Self::per_action(vec![epsilon; num_actions])
    }

    pub fn per_action(epsilon: Vec<f64>) -> Self {
        assert!(
            epsilon.iter().all(|e| e.is_finite() && *e >= 0.0),
            "epsilon thresholds must be finite and nonnegative"
        );
        ClusteringConfig {
            epsilon,
            min_pts: 1,
        }
    }

    pub fn with_min_pts(mut self, min_pts: usize) -> Self {
        assert!(min_pts >= 1, "min_pts must be at least 1");
        self.min_pts = min_pts;
        self
    }

    pub fn epsilon(&self, action: usize) -> f64 {
        self.epsilon[action]
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilon
    }

    pub fn min_pts(&self) -> usize {
        self.min_pts
    }
}

/// Per-action partition of the hypotheses into proximity clusters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterMap {
    /// `labels[a][i]` = cluster id of hypothesis `i` under action `a`;
    /// ids are dense and ordered by first appearance.
    labels: Vec<Vec<usize>>,
    /// `members[a][c]` = sorted hypothesis indices of cluster `c`.
    members: Vec<Vec<Vec<usize>>>,
    num_hypotheses: usize,
}

impl ClusterMap {
    pub fn num_actions(&self) -> usize {
        self.labels.len()
    }

    pub fn num_hypotheses(&self) -> usize {
        self.num_hypotheses
    }

    pub fn label(&self, i: usize, a: usize) -> usize {
        self.check(i, a);
        self.labels[a][i]
    }

    /// Cluster labels of every hypothesis under action `a`.
    pub fn labels(&self, a: usize) -> &[usize] {
        &self.labels[a]
    }

    pub fn num_clusters(&self, a: usize) -> usize {
        self.members[a].len()
    }

    /// Hypotheses equivalent to `i` under action `a` (its cluster,
    /// sorted ascending; always contains `i`).
    pub fn equiv(&self, i: usize, a: usize) -> &[usize] {
        self.check(i, a);
        &self.members[a][self.labels[a][i]]
    }

    /// Stage contestants: the smallest alive index of each cluster that
    /// intersects `alive`, sorted ascending.
    pub fn repr(&self, alive: &[usize], a: usize) -> Vec<usize> {
        assert!(!alive.is_empty(), "repr of an empty alive set");
        assert!(a < self.labels.len(), "action {a} out of range");
        let mut min_per_cluster: Vec<Option<usize>> = vec![None; self.members[a].len()];
        for &i in alive {
            self.check(i, a);
            let slot = &mut min_per_cluster[self.labels[a][i]];
            match slot {
                Some(m) if *m <= i => {}
                _ => *slot = Some(i),
            }
        }
        let mut out: Vec<usize> = min_per_cluster.into_iter().flatten().collect();
        out.sort_unstable();
        out
    }

    fn check(&self, i: usize, a: usize) {
        assert!(a < self.labels.len(), "action {a} out of range");
        assert!(i < self.num_hypotheses, "hypothesis {i} out of range");
    }
}

/// Builds the per-action cluster map for `inst` under `cfg`.
pub fn build_cluster_map(inst: &ProblemInstance, cfg: &ClusteringConfig) -> ClusterMap {
    assert_eq!(
        cfg.epsilons().len(),
        inst.num_actions(),
        "one epsilon per action required"
    );
    let h = inst.hypotheses();
    let mut labels = Vec::with_capacity(inst.num_actions());
    let mut members = Vec::with_capacity(inst.num_actions());
    for (a, spec) in inst.actions().iter().enumerate() {
        let eps = cfg.epsilon(a);
        // Neighborhoods include the point itself.
        let neighborhoods: Vec<Vec<usize>> = (0..h)
            .map(|i| {
                (0..h)
                    .filter(|&j| {
                        squared_param_distance(&spec.params[i], &spec.params[j])
                            .expect("validated instance")
                            <= eps
                    })
                    .collect()
            })
            .collect();
        let core: Vec<bool> = neighborhoods
            .iter()
            .map(|n| n.len() >= cfg.min_pts())
            .collect();

        let mut uf = UnionFind::new(h);
        for i in 0..h {
            if !core[i] {
                continue;
            }
            for &j in &neighborhoods[i] {
                if core[j] {
                    uf.union(i, j);
                }
            }
        }
        // Border points attach to their smallest core neighbor; points
        // with no core neighbor stay singletons.
        for i in 0..h {
            if core[i] {
                continue;
            }
            if let Some(&c) = neighborhoods[i].iter().find(|&&j| core[j]) {
                uf.union(i, c);
            }
        }

        let mut action_labels = vec![usize::MAX; h];
        let mut action_members: Vec<Vec<usize>> = Vec::new();
        let mut root_to_id: Vec<Option<usize>> = vec![None; h];
        for i in 0..h {
            let root = uf.find(i);
            let id = match root_to_id[root] {
                Some(id) => id,
                None => {
                    let id = action_members.len();
                    root_to_id[root] = Some(id);
                    action_members.push(Vec::new());
                    id
                }
            };
            action_labels[i] = id;
            action_members[id].push(i);
        }
        labels.push(action_labels);
        members.push(action_members);
    }
    ClusterMap {
        labels,
        members,
        num_hypotheses: h,
    }
}

/// Outcome of the ε-validity scan for one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonValidation {
    /// Minimum over hypotheses `i` of D(i‖j) − D(i‖k) in bits, where
    /// `k` is the representative of `i`'s cluster and `j` ranges over
    /// hypotheses outside it. Positive certifies ε for the action: the
    /// true cluster's representative out-grows every outsider.
    Margin(f64),
    /// The action puts every hypothesis in one cluster; no stage can
    /// use it.
    Uninformative,
}

impl EpsilonValidation {
    pub fn margin(&self) -> Option<f64> {
        match self {
            EpsilonValidation::Margin(m) => Some(*m),
            EpsilonValidation::Uninformative => None,
        }
    }
}

pub fn validate_epsilon(
    inst: &ProblemInstance,
    map: &ClusterMap,
    a: usize,
) -> EpsilonValidation {
    let spec = inst.action(a);
    let h = inst.hypotheses();
    let mut margin: Option<f64> = None;
    for i in 0..h {
        let cluster = map.equiv(i, a);
        let k = cluster[0];
        let d_ik = kl_divergence(spec.family, &spec.params[i], &spec.params[k])
            .expect("validated instance");
        for j in 0..h {
            if cluster.binary_search(&j).is_ok() {
                continue;
            }
            let d_ij = kl_divergence(spec.family, &spec.params[i], &spec.params[j])
                .expect("validated instance");
            let delta = d_ij - d_ik;
            margin = Some(margin.map_or(delta, |m: f64| m.min(delta)));
        }
    }
    match margin {
        Some(m) => EpsilonValidation::Margin(m),
        None => EpsilonValidation::Uninformative,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so ids follow index order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
