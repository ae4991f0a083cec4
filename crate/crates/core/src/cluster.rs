//! Spatially constrained agglomerative clustering that pays the least
//! mutual information per merge.
//!
//! Merging two clusters replaces their service distributions with the
//! traffic-weighted mixture. The information paid is
//!
//! ```text
//! d(a, b) = (p_a + p_b) * H(mix) - p_a * H(dist_a) - p_b * H(dist_b)
//! ```
//!
//! which is exactly the drop in cluster-service mutual information caused by
//! the merge, independent of every other cluster, and also the weighted
//! generalized Jensen-Shannon divergence of the pair. It is nonnegative by
//! concavity of entropy.
//!
//! The algorithm runs in two phases. Phase 1 walks an adjacency graph,
//! repeatedly merging the cheapest adjacent pair; when two clusters merge,
//! the neighborhoods are rewired and only edges incident to the new cluster
//! are re-evaluated. Phase 2 treats the phase-1 survivors as fully
//! connected, letting distant look-alikes (two far-apart city centers, say)
//! collapse into one cluster. Stale heap entries are discarded lazily: a
//! merge allocates a fresh slot and kills the two old ones, so an entry is
//! current exactly when both its slots are still alive.
//!
//! Ties on merge cost break lexicographically on the pair of minimum member
//! indices, making every run reproducible.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::info::{mutual_information, InfoError, Nats};
use crate::math::{comp_sum, entropy_unchecked};
use crate::model::{build_joint, JointModel, ModelError, ServiceSubset, TrafficMatrix};
use crate::{CLAMP_TOL, NORM_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("graph has {graph} nodes but model has {model} areas")]
    GraphModelMismatch { graph: usize, model: usize },
    #[error("target of {target} clusters not reachable from {available}")]
    InvalidTarget { target: usize, available: usize },
    #[error("clusters share member area {0}")]
    OverlappingClusters(usize),
    #[error("cluster weight {0} is not a positive probability mass")]
    BadWeight(f64),
    #[error("cluster distribution sums to {0}, expected 1")]
    BadDistribution(f64),
    #[error("distributions have lengths {a} and {b}")]
    DistLengthMismatch { a: usize, b: usize },
    #[error("diversity {0} is negative beyond rounding tolerance")]
    NegativeDiversity(f64),
    #[error("graph edge ({a}, {b}) is a self loop")]
    SelfLoop { a: usize, b: usize },
    #[error("duplicate graph edge ({a}, {b})")]
    DuplicateEdge { a: usize, b: usize },
    #[error("edge endpoint {index} out of range for {nodes} nodes")]
    EdgeOutOfRange { index: usize, nodes: usize },
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("areas {areas} not covered exactly once by cluster members")]
    BadPartition { areas: String },
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// Undirected simple graph over area indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl AdjacencyGraph {
    /// Builds a graph from undirected edges. Endpoint order within an edge
    /// does not matter; edges are stored with the smaller index first.
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(ClusterError::EmptyGraph);
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(ClusterError::SelfLoop { a, b });
            }
            for index in [a, b] {
                if index >= n_nodes {
                    return Err(ClusterError::EdgeOutOfRange {
                        index,
                        nodes: n_nodes,
                    });
                }
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        for w in canon.windows(2) {
            if w[0] == w[1] {
                return Err(ClusterError::DuplicateEdge {
                    a: w[0].0,
                    b: w[0].1,
                });
            }
        }
        Ok(Self {
            n_nodes,
            edges: canon,
        })
    }

    /// 4-neighbor grid over `width * height` nodes in row-major order.
    pub fn grid(width: usize, height: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..height {
            for c in 0..width {
                let i = r * width + c;
                if c + 1 < width {
                    edges.push((i, i + 1));
                }
                if r + 1 < height {
                    edges.push((i, i + width));
                }
            }
        }
        Self::new(width * height, edges)
    }

    /// Complete graph over n nodes.
    pub fn complete(n_nodes: usize) -> Result<Self> {
        let mut edges = Vec::with_capacity(n_nodes * (n_nodes.saturating_sub(1)) / 2);
        for a in 0..n_nodes {
            for b in a + 1..n_nodes {
                edges.push((a, b));
            }
        }
        Self::new(n_nodes, edges)
    }

    /// Subgraph induced by the given original node indices, renumbered to
    /// their positions in `keep`.
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let mut map = vec![None; self.n_nodes];
        for (pos, &orig) in keep.iter().enumerate() {
            if orig >= self.n_nodes {
                return Err(ClusterError::EdgeOutOfRange {
                    index: orig,
                    nodes: self.n_nodes,
                });
            }
            map[orig] = Some(pos);
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(a, b)| match (map[a], map[b]) {
                (Some(x), Some(y)) => Some((x, y)),
                _ => None,
            })
            .collect();
        Self::new(keep.len(), edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// Sparsity statistic: `sqrt(2 |E|) / n`, the square root of the average
/// degree divided by the node count's square root scaling. On m x m grids
/// this behaves as `2 / m`, i.e. proportional to `n^(-1/2)`.
pub fn measure_tau(g: &AdjacencyGraph) -> f64 {
    (2.0 * g.n_edges() as f64).sqrt() / g.n_nodes() as f64
}

/// A cluster: member areas, total probability mass, mixture distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    members: Vec<usize>,
    min_member: usize,
    weight: f64,
    dist: Vec<f64>,
    entropy: f64,
}

impl ClusterNode {
    pub fn new(members: Vec<usize>, weight: f64, dist: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(ClusterError::BadPartition {
                areas: "cluster has no members".into(),
            });
        }
        if !(weight > 0.0 && weight.is_finite() && weight <= 1.0 + NORM_TOL) {
            return Err(ClusterError::BadWeight(weight));
        }
        let sum = comp_sum(dist.iter().copied());
        if (sum - 1.0).abs() > NORM_TOL || dist.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(ClusterError::BadDistribution(sum));
        }
        let min_member = *members.iter().min().expect("members nonempty");
        let entropy = entropy_unchecked(&dist);
        Ok(Self {
            members,
            min_member,
            weight,
            dist,
            entropy,
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Smallest member area index; the cluster's stable representative.
    pub fn min_member(&self) -> usize {
        self.min_member
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    /// Entropy of the mixture distribution, cached at construction.
    pub fn dist_entropy(&self) -> f64 {
        self.entropy
    }
}

/// Mutual information paid by merging `a` and `b`, assuming disjoint
/// members. Hot path: skips the disjointness scan.
fn diversity_unchecked(a: &ClusterNode, b: &ClusterNode) -> Result<Nats> {
    let wa = a.weight;
    let wb = b.weight;
    let w = wa + wb;
    let mix_entropy = -comp_sum(
        a.dist
            .iter()
            .zip(&b.dist)
            .map(|(&da, &db)| crate::math::xlnx((wa * da + wb * db) / w)),
    );
    let d = w * mix_entropy - wa * a.entropy - wb * b.entropy;
    if d < -CLAMP_TOL {
        return Err(ClusterError::NegativeDiversity(d));
    }
    Ok(Nats::from_computed(d)?)
}

/// Weighted diversity of two disjoint clusters.
///
/// # Examples
///
/// ```
/// use geodiv_core::cluster::{weighted_diversity, ClusterNode};
///
/// let a = ClusterNode::new(vec![0], 0.5, vec![1.0, 0.0]).unwrap();
/// let b = ClusterNode::new(vec![1], 0.5, vec![0.0, 1.0]).unwrap();
/// let d = weighted_diversity(&a, &b).unwrap();
/// assert!((d.value() - std::f64::consts::LN_2).abs() < 1e-12);
/// ```
pub fn weighted_diversity(a: &ClusterNode, b: &ClusterNode) -> Result<Nats> {
    if a.dist.len() != b.dist.len() {
        return Err(ClusterError::DistLengthMismatch {
            a: a.dist.len(),
            b: b.dist.len(),
        });
    }
    let small: std::collections::HashSet<usize> = a.members.iter().copied().collect();
    if let Some(&shared) = b.members.iter().find(|m| small.contains(m)) {
        return Err(ClusterError::OverlappingClusters(shared));
    }
    diversity_unchecked(a, b)
}

/// Merges two disjoint clusters into their traffic-weighted mixture.
pub fn merge(a: &ClusterNode, b: &ClusterNode) -> Result<ClusterNode> {
    if a.dist.len() != b.dist.len() {
        return Err(ClusterError::DistLengthMismatch {
            a: a.dist.len(),
            b: b.dist.len(),
        });
    }
    let small: std::collections::HashSet<usize> = a.members.iter().copied().collect();
    if let Some(&shared) = b.members.iter().find(|m| small.contains(m)) {
        return Err(ClusterError::OverlappingClusters(shared));
    }
    Ok(merge_unchecked(a, b))
}

fn merge_unchecked(a: &ClusterNode, b: &ClusterNode) -> ClusterNode {
    let w = a.weight + b.weight;
    let dist: Vec<f64> = a
        .dist
        .iter()
        .zip(&b.dist)
        .map(|(&da, &db)| (a.weight * da + b.weight * db) / w)
        .collect();
    // Append the smaller member list to the larger to keep total list
    // movement near-linear over a full merge run.
    let (mut members, other) = if a.members.len() >= b.members.len() {
        (a.members.clone(), &b.members)
    } else {
        (b.members.clone(), &a.members)
    };
    members.extend_from_slice(other);
    let entropy = entropy_unchecked(&dist);
    ClusterNode {
        members,
        min_member: a.min_member.min(b.min_member),
        weight: w,
        dist,
        entropy,
    }
}

/// A partition of the model's areas into clusters.
///
/// Clusters are ordered by minimum member index, so cluster ids are stable
/// across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    clusters: Vec<ClusterNode>,
    assignment: Vec<usize>,
}

impl Clustering {
    pub fn from_clusters(mut clusters: Vec<ClusterNode>, n_areas: usize) -> Result<Self> {
        clusters.sort_by_key(|c| c.min_member);
        let mut assignment = vec![usize::MAX; n_areas];
        for (k, cluster) in clusters.iter().enumerate() {
            for &i in cluster.members() {
                if i >= n_areas || assignment[i] != usize::MAX {
                    return Err(ClusterError::BadPartition {
                        areas: format!("area {i}"),
                    });
                }
                assignment[i] = k;
            }
        }
        if let Some(missing) = assignment.iter().position(|&k| k == usize::MAX) {
            return Err(ClusterError::BadPartition {
                areas: format!("area {missing}"),
            });
        }
        let mass = comp_sum(clusters.iter().map(|c| c.weight()));
        if (mass - 1.0).abs() > NORM_TOL {
            return Err(ClusterError::BadWeight(mass));
        }
        Ok(Self {
            clusters,
            assignment,
        })
    }

    /// One cluster per area of the model.
    pub fn singletons(m: &JointModel) -> Result<Self> {
        let clusters = singleton_nodes(m);
        Self::from_clusters(clusters, m.n_areas())
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[ClusterNode] {
        &self.clusters
    }

    /// Cluster index of each area.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

fn singleton_nodes(m: &JointModel) -> Vec<ClusterNode> {
    (0..m.n_areas())
        .map(|i| {
            let dist = m.conditional_row(i).to_vec();
            let entropy = entropy_unchecked(&dist);
            ClusterNode {
                members: vec![i],
                min_member: i,
                weight: m.area_weights()[i],
                dist,
                entropy,
            }
        })
        .collect()
}

/// One recorded merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeStep {
    /// Representatives (minimum member index) of the merged pair, smaller
    /// first.
    pub rep_a: usize,
    pub rep_b: usize,
    pub diversity: Nats,
    pub clusters_remaining: usize,
    /// Mutual information of the clustering after this merge, maintained by
    /// subtracting paid diversities from the phase total.
    pub retained_mi: Nats,
}

/// Full record of one merge phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTrace {
    pub steps: Vec<MergeStep>,
    /// Cluster-service mutual information at phase start.
    pub total_mi: Nats,
    /// Number of pair-diversity evaluations performed, including the
    /// initial edge sweep.
    pub edge_evaluations: u64,
}

struct EdgeEntry {
    diversity: f64,
    key: (usize, usize),
    slots: (usize, usize),
}

impl PartialEq for EdgeEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for EdgeEntry {}

impl PartialOrd for EdgeEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EdgeEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.diversity
            .total_cmp(&other.diversity)
            .then_with(|| self.key.cmp(&other.key))
            .then_with(|| self.slots.cmp(&other.slots))
    }
}

struct MergeEngine {
    slots: Vec<Option<ClusterNode>>,
    neighbors: Vec<BTreeSet<usize>>,
    heap: std::collections::BinaryHeap<std::cmp::Reverse<EdgeEntry>>,
    alive: usize,
    edge_evaluations: u64,
}

impl MergeEngine {
    fn new(nodes: Vec<ClusterNode>, g: &AdjacencyGraph) -> Result<Self> {
        let n = nodes.len();
        let mut engine = MergeEngine {
            slots: nodes.into_iter().map(Some).collect(),
            neighbors: vec![BTreeSet::new(); n],
            heap: std::collections::BinaryHeap::new(),
            alive: n,
            edge_evaluations: 0,
        };
        for &(a, b) in g.edges() {
            engine.neighbors[a].insert(b);
            engine.neighbors[b].insert(a);
            engine.push_pair(a, b)?;
        }
        Ok(engine)
    }

    fn node(&self, slot: usize) -> &ClusterNode {
        self.slots[slot].as_ref().expect("slot is alive")
    }

    fn push_pair(&mut self, sa: usize, sb: usize) -> Result<()> {
        let d = diversity_unchecked(self.node(sa), self.node(sb))?;
        self.edge_evaluations += 1;
        let ra = self.node(sa).min_member;
        let rb = self.node(sb).min_member;
        self.heap.push(std::cmp::Reverse(EdgeEntry {
            diversity: d.value(),
            key: (ra.min(rb), ra.max(rb)),
            slots: (sa, sb),
        }));
        Ok(())
    }

    /// Merges cheapest pairs until `target` clusters remain or no merge is
    /// possible. Returns the recorded steps.
    fn run(&mut self, target: usize, total_mi: Nats) -> Result<Vec<MergeStep>> {
        let mut steps = Vec::new();
        let mut retained = total_mi.value();
        while self.alive > target {
            let entry = match self.heap.pop() {
                Some(std::cmp::Reverse(e)) => e,
                None => break,
            };
            let (sa, sb) = entry.slots;
            if self.slots[sa].is_none() || self.slots[sb].is_none() {
                continue;
            }
            let a = self.slots[sa].take().expect("checked alive");
            let b = self.slots[sb].take().expect("checked alive");
            let merged = merge_unchecked(&a, &b);
            let new_slot = self.slots.len();
            self.slots.push(Some(merged));
            self.alive -= 1;

            let mut nbrs: BTreeSet<usize> = &self.neighbors[sa] | &self.neighbors[sb];
            nbrs.remove(&sa);
            nbrs.remove(&sb);
            for &x in &nbrs {
                self.neighbors[x].remove(&sa);
                self.neighbors[x].remove(&sb);
                self.neighbors[x].insert(new_slot);
            }
            self.neighbors[sa].clear();
            self.neighbors[sb].clear();
            self.neighbors.push(nbrs.clone());
            for &x in &nbrs {
                self.push_pair(new_slot, x)?;
            }

            retained -= entry.diversity;
            let retained_mi = Nats::from_computed(retained)?;
            steps.push(MergeStep {
                rep_a: a.min_member.min(b.min_member),
                rep_b: a.min_member.max(b.min_member),
                diversity: Nats::from_computed(entry.diversity)?,
                clusters_remaining: self.alive,
                retained_mi,
            });
        }
        Ok(steps)
    }

    fn into_clustering(self, n_areas: usize) -> Result<Clustering> {
        let clusters: Vec<ClusterNode> = self.slots.into_iter().flatten().collect();
        Clustering::from_clusters(clusters, n_areas)
    }
}

/// Phase 1: greedy merging constrained to the adjacency graph.
///
/// Stops when `n_k1` clusters remain, or earlier if the graph runs out of
/// edges (each connected component collapses to at most one cluster).
pub fn phase1(
    m: &JointModel,
    g: &AdjacencyGraph,
    n_k1: usize,
) -> Result<(Clustering, MergeTrace)> {
    if g.n_nodes() != m.n_areas() {
        return Err(ClusterError::GraphModelMismatch {
            graph: g.n_nodes(),
            model: m.n_areas(),
        });
    }
    if n_k1 == 0 || n_k1 > m.n_areas() {
        return Err(ClusterError::InvalidTarget {
            target: n_k1,
            available: m.n_areas(),
        });
    }
    let total_mi = mutual_information(m)?;
    let mut engine = MergeEngine::new(singleton_nodes(m), g)?;
    let steps = engine.run(n_k1, total_mi)?;
    let edge_evaluations = engine.edge_evaluations;
    let clustering = engine.into_clustering(m.n_areas())?;
    Ok((
        clustering,
        MergeTrace {
            steps,
            total_mi,
            edge_evaluations,
        },
    ))
}

/// Phase 2: greedy merging of existing clusters with no adjacency
/// constraint.
pub fn phase2(
    c: &Clustering,
    m: &JointModel,
    n_k2: usize,
) -> Result<(Clustering, MergeTrace)> {
    if n_k2 == 0 || n_k2 > c.n_clusters() {
        return Err(ClusterError::InvalidTarget {
            target: n_k2,
            available: c.n_clusters(),
        });
    }
    let (total_mi, _) = retained_mi(c, m)?;
    let g = AdjacencyGraph::complete(c.n_clusters())?;
    let mut engine = MergeEngine::new(c.clusters().to_vec(), &g)?;
    let steps = engine.run(n_k2, total_mi)?;
    let edge_evaluations = engine.edge_evaluations;
    let clustering = engine.into_clustering(m.n_areas())?;
    Ok((
        clustering,
        MergeTrace {
            steps,
            total_mi,
            edge_evaluations,
        },
    ))
}

/// Restricts the traffic to a service subset and runs both phases.
///
/// Areas whose restricted traffic is zero are dropped from the model, and
/// the graph is re-indexed onto the surviving areas before phase 1.
pub fn two_phase(
    t: &TrafficMatrix,
    g: &AdjacencyGraph,
    subset: &ServiceSubset,
    n_k1: usize,
    n_k2: usize,
) -> Result<(Clustering, MergeTrace, MergeTrace)> {
    if g.n_nodes() != t.n_areas() {
        return Err(ClusterError::GraphModelMismatch {
            graph: g.n_nodes(),
            model: t.n_areas(),
        });
    }
    let m = build_joint(&t.select_services(subset)?)?;
    let g = if m.n_areas() == t.n_areas() {
        g.clone()
    } else {
        let keep = retained_positions(t.area_ids(), m.area_ids());
        g.induced(&keep)?
    };
    let (c1, trace1) = phase1(&m, &g, n_k1)?;
    let (c2, trace2) = phase2(&c1, &m, n_k2)?;
    Ok((c2, trace1, trace2))
}

/// Positions in `all` of the ids in `kept`, assuming `kept` is an ordered
/// subsequence of `all`.
pub fn retained_positions(all: &[String], kept: &[String]) -> Vec<usize> {
    let mut out = Vec::with_capacity(kept.len());
    let mut cursor = 0;
    for id in kept {
        while all[cursor] != *id {
            cursor += 1;
        }
        out.push(cursor);
        cursor += 1;
    }
    out
}

/// Mutual information between cluster identity and service, and its
/// fraction of the model's full area-service information. The fraction is
/// zero when the model carries no information at all.
pub fn retained_mi(c: &Clustering, m: &JointModel) -> Result<(Nats, f64)> {
    assert_eq!(
        c.assignment().len(),
        m.n_areas(),
        "clustering does not cover the model's areas"
    );
    let h_s = entropy_unchecked(m.service_marginal());
    let h_s_given_k = comp_sum(c.clusters().iter().map(|k| k.weight() * k.dist_entropy()));
    let retained = Nats::from_computed(h_s - h_s_given_k)?;
    let total = mutual_information(m)?;
    let fraction = if total.value() > 0.0 {
        retained.value() / total.value()
    } else {
        0.0
    };
    Ok((retained, fraction))
}
