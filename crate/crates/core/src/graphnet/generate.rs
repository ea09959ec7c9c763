use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::digraph::{is_strongly_connected, Digraph, GraphSequence};
use crate::error::{Error, Result};

/// Cap on regenerations when a strongly connected sample is required.
pub const MAX_REJECTION_ATTEMPTS: usize = 1000;

/// Parameters of the clustered random graph model: each ordered pair inside a
/// cluster gets an arc with probability `p_intra`, across clusters `p_inter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub nodes: usize,
    pub clusters: usize,
    pub p_intra: f64,
    pub p_inter: f64,
}

impl ClusterSpec {
    pub fn new(nodes: usize, clusters: usize, p_intra: f64, p_inter: f64) -> Self {
        Self {
            nodes,
            clusters,
            p_intra,
            p_inter,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::InvalidParameter("node count must be ≥ 1".into()));
        }
        if self.clusters == 0 || self.clusters > self.nodes {
            return Err(Error::InvalidParameter(format!(
                "cluster count {} must lie in 1..={}",
                self.clusters, self.nodes
            )));
        }
        for p in [self.p_intra, self.p_inter] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "edge probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Cluster label per node. When the count does not divide the node count,
    /// the first `nodes mod clusters` clusters get one extra node.
    pub fn labels(&self) -> Vec<usize> {
        let base = self.nodes / self.clusters;
        let extra = self.nodes % self.clusters;
        let mut labels = Vec::with_capacity(self.nodes);
        for c in 0..self.clusters {
            let size = base + usize::from(c < extra);
            labels.extend(std::iter::repeat_n(c, size));
        }
        labels
    }
}

/// Samples a clustered digraph; arcs are drawn independently per ordered pair
/// in `(source, target)` lexicographic order.
pub fn generate_clustered_digraph(spec: &ClusterSpec, seed: u64) -> Result<Digraph> {
    spec.validate()?;
    let labels = spec.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Digraph::empty(spec.nodes)?;
    for j in 0..spec.nodes {
        for i in 0..spec.nodes {
            if i == j {
                continue;
            }
            let p = if labels[i] == labels[j] {
                spec.p_intra
            } else {
                spec.p_inter
            };
            if rng.random::<f64>() < p {
                g.add_edge(j, i)?;
            }
        }
    }
    Ok(g)
}

/// Undirected variant: one draw per unordered pair, stored in both directions.
pub fn generate_clustered_undirected(spec: &ClusterSpec, seed: u64) -> Result<Digraph> {
    spec.validate()?;
    let labels = spec.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Digraph::empty(spec.nodes)?;
    for j in 0..spec.nodes {
        for i in (j + 1)..spec.nodes {
            let p = if labels[i] == labels[j] {
                spec.p_intra
            } else {
                spec.p_inter
            };
            if rng.random::<f64>() < p {
                g.add_edge(j, i)?;
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

/// Rejection sampling: regenerates with `seed, seed+1, ...` until the sample
/// is strongly connected. Returns the graph and the seed that produced it.
pub fn generate_strongly_connected_clustered(
    spec: &ClusterSpec,
    seed: u64,
    undirected: bool,
) -> Result<(Digraph, u64)> {
    for attempt in 0..MAX_REJECTION_ATTEMPTS as u64 {
        let s = seed.wrapping_add(attempt);
        let g = if undirected {
            generate_clustered_undirected(spec, s)?
        } else {
            generate_clustered_digraph(spec, s)?
        };
        if is_strongly_connected(&g) {
            return Ok((g, s));
        }
    }
    Err(Error::Graph(format!(
        "no strongly connected sample in {MAX_REJECTION_ATTEMPTS} attempts"
    )))
}

pub fn complete_digraph(n: usize) -> Result<Digraph> {
    Digraph::from_edges(n, (0..n).flat_map(|j| (0..n).map(move |i| (j, i))))
}

pub fn directed_ring(n: usize) -> Result<Digraph> {
    Digraph::from_edges(n, (0..n).map(|j| (j, (j + 1) % n)))
}

/// Splits `g` into `slots` graphs by source node: slot `k` keeps the arcs
/// leaving nodes `j ≡ k (mod slots)`. The union is `g`; with `slots ≥ 2` and
/// more than `slots` nodes no slot is strongly connected, since some node in
/// it has no outgoing arc.
pub fn partition_by_source(g: &Digraph, slots: usize) -> Result<GraphSequence> {
    if slots == 0 {
        return Err(Error::InvalidParameter("slot count must be ≥ 1".into()));
    }
    let mut parts = vec![Digraph::empty(g.num_nodes())?; slots];
    for (j, i) in g.edges() {
        parts[j % slots].add_edge(j, i)?;
    }
    Ok(GraphSequence::new(parts)?.with_window(slots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphnet::check_b_strong_connectivity;

    #[test]
    fn full_intra_probability_gives_complete_graph() {
        let g = generate_clustered_digraph(&ClusterSpec::new(4, 1, 1.0, 0.0), 3).unwrap();
        assert_eq!(g, complete_digraph(4).unwrap());
    }

    #[test]
    fn zero_inter_probability_separates_clusters() {
        let spec = ClusterSpec::new(6, 2, 1.0, 0.0);
        let g = generate_clustered_digraph(&spec, 0).unwrap();
        assert_eq!(g.num_edges(), 2 * 3 * 2);
        assert!(!is_strongly_connected(&g));
    }

    #[test]
    fn uneven_clusters_front_load_the_remainder() {
        let spec = ClusterSpec::new(7, 3, 0.5, 0.5);
        assert_eq!(spec.labels(), vec![0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_clustered_digraph(&ClusterSpec::new(4, 5, 0.5, 0.5), 0).is_err());
        assert!(generate_clustered_digraph(&ClusterSpec::new(4, 2, 1.5, 0.5), 0).is_err());
        assert!(generate_clustered_digraph(&ClusterSpec::new(4, 2, 0.5, -0.1), 0).is_err());
        assert!(generate_clustered_digraph(&ClusterSpec::new(4, 0, 0.5, 0.5), 0).is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let spec = ClusterSpec::new(10, 2, 0.9, 0.3);
        let a = generate_clustered_digraph(&spec, 42).unwrap();
        let b = generate_clustered_digraph(&spec, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn n4_scenario_is_strongly_connected_after_rejection() {
        let spec = ClusterSpec::new(10, 2, 0.9, 0.3);
        let (g, _) = generate_strongly_connected_clustered(&spec, 1, false).unwrap();
        assert_eq!(g.num_nodes(), 10);
        assert!(is_strongly_connected(&g));
    }

    #[test]
    fn undirected_generator_is_symmetric() {
        let spec = ClusterSpec::new(12, 3, 0.6, 0.1);
        let g = generate_clustered_undirected(&spec, 5).unwrap();
        assert!(g.is_symmetric());
    }

    #[test]
    fn source_partition_slots_are_disconnected_but_union_is_not() {
        let spec = ClusterSpec::new(10, 2, 0.9, 0.3);
        let (g, _) = generate_strongly_connected_clustered(&spec, 11, false).unwrap();
        let seq = partition_by_source(&g, 3).unwrap();
        assert_eq!(seq.len(), 3);
        for slot in seq.slots() {
            assert!(!is_strongly_connected(slot));
        }
        assert!(check_b_strong_connectivity(&seq, 3));
    }
}
