use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed graph on `0..num_nodes`. An edge `(j, i)` means "j sends to i".
///
/// Self-loops are implicit: they are never stored but every node belongs to
/// its own in- and out-neighborhood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digraph {
    num_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    pub fn empty(num_nodes: usize) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Graph("a digraph needs at least one node".into()));
        }
        Ok(Self {
            num_nodes,
            edges: BTreeSet::new(),
        })
    }

    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(num_nodes)?;
        for (j, i) in edges {
            g.add_edge(j, i)?;
        }
        Ok(g)
    }

    /// Adds `j -> i`. Self-loops are accepted and ignored.
    pub fn add_edge(&mut self, j: usize, i: usize) -> Result<()> {
        if j >= self.num_nodes || i >= self.num_nodes {
            return Err(Error::Graph(format!(
                "edge ({j}, {i}) out of range for {} nodes",
                self.num_nodes
            )));
        }
        if j != i {
            self.edges.insert((j, i));
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored (non-self) edges.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        j == i || self.edges.contains(&(j, i))
    }

    /// In-neighbors of `i` in ascending order, including `i`.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges
            .iter()
            .filter(|&&(_, t)| t == i)
            .map(|&(s, _)| s)
            .collect();
        v.push(i);
        v.sort_unstable();
        v
    }

    /// Out-neighbors of `j` in ascending order, including `j`.
    pub fn out_neighbors(&self, j: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges
            .range((j, 0)..(j + 1, 0))
            .map(|&(_, t)| t)
            .collect();
        v.push(j);
        v.sort_unstable();
        v
    }

    /// Out-degree counting the self-loop.
    pub fn out_degree(&self, j: usize) -> usize {
        self.edges.range((j, 0)..(j + 1, 0)).count() + 1
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(j, i)| self.edges.contains(&(i, j)))
    }

    /// Union of edge sets; both graphs must share the node count.
    pub fn union(&self, other: &Digraph) -> Result<Digraph> {
        if self.num_nodes != other.num_nodes {
            return Err(Error::Graph("union of graphs with different sizes".into()));
        }
        let mut g = self.clone();
        g.edges.extend(other.edges.iter().copied());
        Ok(g)
    }

    fn adjacency(&self, reversed: bool) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(j, i) in &self.edges {
            if reversed {
                adj[i].push(j);
            } else {
                adj[j].push(i);
            }
        }
        adj
    }
}

fn reaches_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}

/// True iff every node reaches every other node along directed edges.
///
/// Node 0 must reach everything in the graph and in its reverse.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    reaches_all(&g.adjacency(false), 0) && reaches_all(&g.adjacency(true), 0)
}

/// Time-varying digraph: a finite list of slots cycled forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSequence {
    slots: Vec<Digraph>,
    pub window_b: Option<usize>,
}

impl GraphSequence {
    pub fn new(slots: Vec<Digraph>) -> Result<Self> {
        let first = slots
            .first()
            .ok_or_else(|| Error::Graph("graph sequence needs at least one slot".into()))?;
        let n = first.num_nodes();
        if slots.iter().any(|g| g.num_nodes() != n) {
            return Err(Error::Graph("all slots must share the node count".into()));
        }
        Ok(Self {
            slots,
            window_b: None,
        })
    }

    pub fn single(g: Digraph) -> Self {
        Self {
            slots: vec![g],
            window_b: Some(1),
        }
    }

    pub fn with_window(mut self, b: usize) -> Self {
        self.window_b = Some(b);
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.slots[0].num_nodes()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Digraph] {
        &self.slots
    }

    /// Graph in force at iteration `iter`.
    pub fn at(&self, iter: usize) -> &Digraph {
        &self.slots[iter % self.slots.len()]
    }

    pub fn slot_index(&self, iter: usize) -> usize {
        iter % self.slots.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.slots.iter().all(Digraph::is_symmetric)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// True iff the union over every window `[kB, (k+1)B − 1]` is strongly
/// connected. The window pattern repeats after `lcm(len, B) / B` windows, so
/// checking those decides the property for the infinite cycled sequence.
pub fn check_b_strong_connectivity(seq: &GraphSequence, b: usize) -> bool {
    if b == 0 {
        return false;
    }
    let len = seq.len();
    let windows = len / gcd(len, b);
    (0..windows).all(|k| {
        let mut union = seq.at(k * b).clone();
        for t in 1..b {
            union = union
                .union(seq.at(k * b + t))
                .expect("slots share the node count");
        }
        is_strongly_connected(&union)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Digraph {
        Digraph::from_edges(n, (0..n).map(|j| (j, (j + 1) % n))).unwrap()
    }

    #[test]
    fn self_loops_are_implicit() {
        let g = Digraph::from_edges(3, [(0, 1), (2, 2)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.in_neighbors(1), vec![0, 1]);
        assert_eq!(g.out_neighbors(0), vec![0, 1]);
        assert_eq!(g.in_neighbors(2), vec![2]);
        assert_eq!(g.out_degree(0), 2);
        assert_eq!(g.out_degree(1), 1);
    }

    #[test]
    fn out_of_range_edge_rejected() {
        assert!(Digraph::from_edges(2, [(0, 2)]).is_err());
        assert!(Digraph::empty(0).is_err());
    }

    #[test]
    fn complete_graph_is_strongly_connected() {
        let g = Digraph::from_edges(
            4,
            (0..4).flat_map(|j| (0..4).map(move |i| (j, i))),
        )
        .unwrap();
        assert!(is_strongly_connected(&g));
    }

    #[test]
    fn two_isolated_nodes_are_not_connected() {
        let g = Digraph::empty(2).unwrap();
        assert!(!is_strongly_connected(&g));
    }

    #[test]
    fn directed_ring_is_strongly_connected() {
        assert!(is_strongly_connected(&ring(5)));
        let path = Digraph::from_edges(5, (0..4).map(|j| (j, j + 1))).unwrap();
        assert!(!is_strongly_connected(&path));
    }

    #[test]
    fn single_node_is_connected() {
        assert!(is_strongly_connected(&Digraph::empty(1).unwrap()));
    }

    #[test]
    fn b_connectivity_single_slot() {
        let seq = GraphSequence::single(ring(4));
        assert!(check_b_strong_connectivity(&seq, 1));
    }

    #[test]
    fn b_connectivity_union_forms_ring() {
        // even edges in slot 0, odd edges in slot 1
        let a = Digraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let b = Digraph::from_edges(4, [(1, 2), (3, 0)]).unwrap();
        let seq = GraphSequence::new(vec![a, b]).unwrap();
        assert!(!check_b_strong_connectivity(&seq, 1));
        assert!(check_b_strong_connectivity(&seq, 2));
    }

    #[test]
    fn b_connectivity_disjoint_components() {
        let a = Digraph::from_edges(4, [(0, 1), (1, 0)]).unwrap();
        let b = Digraph::from_edges(4, [(2, 3), (3, 2)]).unwrap();
        let seq = GraphSequence::new(vec![a, b]).unwrap();
        assert!(!check_b_strong_connectivity(&seq, 2));
    }

    #[test]
    fn b_connectivity_checks_misaligned_windows() {
        // len 3, B = 2: windows {0,1}, {2,0}, {1,2}
        let a = Digraph::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let e = Digraph::empty(3).unwrap();
        let seq = GraphSequence::new(vec![a, e.clone(), e]).unwrap();
        assert!(!check_b_strong_connectivity(&seq, 2));
        assert!(check_b_strong_connectivity(&seq, 3));
    }

    #[test]
    fn sequence_rejects_mixed_sizes() {
        let seq = GraphSequence::new(vec![ring(3), ring(4)]);
        assert!(seq.is_err());
    }
}
