//! Network topology and static combination rules.
//!
//! Neighborhoods always contain the node itself, so every combination sum
//! runs over a single list. Weights are stored sparsely, aligned with the
//! neighbor list of the receiving node.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, StreamRole, NETWORK_STREAM};

/// Redraws attempted by [`build_random_geometric`] before giving up.
pub const MAX_GRAPH_DRAWS: usize = 1000;

/// Undirected, connected graph with explicit self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from undirected edges between `0..nodes`.
    ///
    /// Self-loops are added, duplicate edges are ignored, and the result must
    /// be connected.
    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Topology("node count must be positive".into()));
        }
        let mut neighbors: Vec<Vec<usize>> = (0..nodes).map(|k| vec![k]).collect();
        for &(j, k) in edges {
            if j >= nodes || k >= nodes {
                return Err(Error::Topology(format!(
                    "edge ({j}, {k}) references a node outside 0..{nodes}"
                )));
            }
            if j != k {
                neighbors[j].push(k);
                neighbors[k].push(j);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let topology = Self { neighbors };
        if !topology.is_connected() {
            return Err(Error::Topology("graph is not connected".into()));
        }
        Ok(topology)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted neighborhood of `k`, including `k`.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// Neighborhood size |N_k|, self included.
    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len()
    }

    pub fn is_neighbor(&self, j: usize, k: usize) -> bool {
        self.neighbors[k].binary_search(&j).is_ok()
    }

    /// Position of `j` inside the neighbor list of `k`.
    pub fn slot(&self, j: usize, k: usize) -> Option<usize> {
        self.neighbors[k].binary_search(&j).ok()
    }

    /// Undirected edges `(j, k)` with `j < k`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(j, list)| list.iter().filter(move |&&k| k > j).map(move |&k| (j, k)))
            .collect()
    }

    /// Number of directed node-to-neighbor links, Σ_k (|N_k| − 1).
    pub fn directed_link_count(&self) -> usize {
        self.neighbors.iter().map(|n| n.len() - 1).sum()
    }

    pub fn mean_degree(&self) -> f64 {
        self.directed_link_count() as f64 / self.node_count() as f64
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &j in &self.neighbors[k] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Plain-text edge list: node count on the first line, then one
    /// `j k` pair (0-based) per undirected edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.node_count());
        for (j, k) in self.edges() {
            let _ = writeln!(out, "{j} {k}");
        }
        out
    }

    /// Parses the format written by [`Topology::to_edge_list`]. Blank lines
    /// and `#` comments are skipped.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(Error::EdgeList {
            line: 1,
            reason: "missing node count header".into(),
        })?;
        let nodes: usize = header.parse().map_err(|_| Error::EdgeList {
            line,
            reason: format!("expected node count, found `{header}`"),
        })?;
        let mut edges = Vec::new();
        for (line, body) in lines {
            let parsed: Vec<usize> = body
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::EdgeList {
                    line,
                    reason: format!("expected `j k`, found `{body}`"),
                })?;
            match parsed[..] {
                [j, k] => edges.push((j, k)),
                _ => {
                    return Err(Error::EdgeList {
                        line,
                        reason: format!("expected two indices, found `{body}`"),
                    })
                }
            }
        }
        Self::from_edges(nodes, &edges)
    }
}

/// Places `nodes` points uniformly in the unit square and links every pair
/// within `radius`. Draws are repeated until the graph is connected.
pub fn build_random_geometric(nodes: usize, radius: f64, seed: u64) -> Result<Topology> {
    if nodes == 0 {
        return Err(Error::Topology("node count must be positive".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Topology(format!("radius must be positive, got {radius}")));
    }
    let mut rng = rng::stream(seed, 0, NETWORK_STREAM, StreamRole::Topology);
    for _ in 0..MAX_GRAPH_DRAWS {
        let points: Vec<(f64, f64)> = (0..nodes).map(|_| (rng.random(), rng.random())).collect();
        let mut edges = Vec::new();
        for j in 0..nodes {
            for k in j + 1..nodes {
                let (dx, dy) = (points[j].0 - points[k].0, points[j].1 - points[k].1);
                if dx.hypot(dy) <= radius {
                    edges.push((j, k));
                }
            }
        }
        if let Ok(topology) = Topology::from_edges(nodes, &edges) {
            return Ok(topology);
        }
    }
    Err(Error::Disconnected {
        nodes,
        radius,
        attempts: MAX_GRAPH_DRAWS,
    })
}

/// Column-stochastic combination weights c_{jk}, stored per receiving node
/// `k` and aligned with `Topology::neighbors(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    columns: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
}

impl CombinationMatrix {
    /// Weights used by node `k`, aligned with its neighbor list.
    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    /// c_{jk}; zero when `j` is not a neighbor of `k`.
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.neighbors[k]
            .binary_search(&j)
            .map_or(0.0, |slot| self.columns[k][slot])
    }

    pub fn node_count(&self) -> usize {
        self.columns.len()
    }
}

/// c_{jk} = 1/|N_k| over the neighborhood.
pub fn uniform_weights(topology: &Topology) -> CombinationMatrix {
    let columns = (0..topology.node_count())
        .map(|k| {
            let n = topology.degree(k);
            vec![1.0 / n as f64; n]
        })
        .collect();
    CombinationMatrix {
        columns,
        neighbors: topology.neighbors.clone(),
    }
}

/// Metropolis rule: c_{jk} = 1/max(n_k, n_j) off the diagonal, and the
/// self-weight takes the remainder.
pub fn metropolis_weights(topology: &Topology) -> CombinationMatrix {
    let columns = (0..topology.node_count())
        .map(|k| {
            let nk = topology.degree(k);
            let mut column: Vec<f64> = topology
                .neighbors(k)
                .iter()
                .map(|&j| {
                    if j == k {
                        0.0
                    } else {
                        1.0 / nk.max(topology.degree(j)) as f64
                    }
                })
                .collect();
            let self_slot = topology.slot(k, k).expect("self-loop present");
            column[self_slot] = 1.0 - column.iter().sum::<f64>();
            column
        })
        .collect();
    CombinationMatrix {
        columns,
        neighbors: topology.neighbors.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(leaves: usize) -> Topology {
        let edges: Vec<_> = (1..=leaves).map(|j| (0, j)).collect();
        Topology::from_edges(leaves + 1, &edges).unwrap()
    }

    fn assert_stochastic(t: &Topology, c: &CombinationMatrix) {
        for k in 0..t.node_count() {
            let mut total = 0.0;
            for j in 0..t.node_count() {
                let w = c.weight(j, k);
                assert!(w >= 0.0);
                if !t.is_neighbor(j, k) {
                    assert_eq!(w, 0.0);
                }
                total += w;
            }
            assert!((total - 1.0).abs() <= 1e-12, "column {k} sums to {total}");
        }
    }

    #[test]
    fn single_node_is_its_own_neighborhood() {
        let t = build_random_geometric(1, 0.5, 3).unwrap();
        assert_eq!(t.neighbors(0), &[0]);
        assert_eq!(uniform_weights(&t).weight(0, 0), 1.0);
    }

    #[test]
    fn large_radius_links_both_nodes() {
        let t = build_random_geometric(2, 1.5, 11).unwrap();
        assert_eq!(t.neighbors(0), &[0, 1]);
        assert_eq!(t.neighbors(1), &[0, 1]);
    }

    #[test]
    fn geometric_graph_invariants() {
        let t = build_random_geometric(20, 0.35, 42).unwrap();
        assert_eq!(t.node_count(), 20);
        for k in 0..20 {
            assert!(t.is_neighbor(k, k));
            for j in 0..20 {
                assert_eq!(t.is_neighbor(j, k), t.is_neighbor(k, j));
            }
        }
        assert!(t.is_connected());
        assert_eq!(t, build_random_geometric(20, 0.35, 42).unwrap());
    }

    #[test]
    fn tiny_radius_fails() {
        let err = build_random_geometric(20, 0.01, 1).unwrap_err();
        assert!(matches!(err, Error::Disconnected { attempts: MAX_GRAPH_DRAWS, .. }));
    }

    #[test]
    fn disconnected_edges_rejected() {
        assert!(Topology::from_edges(3, &[(0, 1)]).is_err());
        assert!(Topology::from_edges(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn uniform_weights_split_evenly() {
        let t = star(3);
        let c = uniform_weights(&t);
        assert_eq!(t.degree(0), 4);
        assert!(c.column(0).iter().all(|&w| w == 0.25));
        assert_stochastic(&t, &c);
    }

    #[test]
    fn metropolis_pair() {
        let t = Topology::from_edges(2, &[(0, 1)]).unwrap();
        let c = metropolis_weights(&t);
        for (j, k) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(c.weight(j, k), 0.5);
        }
    }

    #[test]
    fn metropolis_star() {
        // center degree 5 (self included), leaves degree 2
        let t = star(4);
        let c = metropolis_weights(&t);
        assert_eq!(c.weight(0, 1), 1.0 / 5.0);
        assert_eq!(c.weight(1, 0), 1.0 / 5.0);
        assert!((c.weight(1, 1) - 0.8).abs() < 1e-15);
        assert!((c.weight(0, 0) - 0.2).abs() < 1e-15);
        assert_stochastic(&t, &c);
    }

    #[test]
    fn edge_list_round_trip() {
        let t = build_random_geometric(12, 0.45, 5).unwrap();
        let text = t.to_edge_list();
        assert!(text.starts_with("12\n"));
        assert_eq!(Topology::from_edge_list(&text).unwrap(), t);
    }

    #[test]
    fn edge_list_errors_carry_line() {
        let err = Topology::from_edge_list("3\n0 1\n1 x\n").unwrap_err();
        assert!(matches!(err, Error::EdgeList { line: 3, .. }));
        assert!(Topology::from_edge_list("").is_err());
        assert!(Topology::from_edge_list("2\n0 1 1\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weight_rules_are_column_stochastic(nodes in 1usize..25, seed in 0u64..500) {
                let t = build_random_geometric(nodes, 0.6, seed).unwrap();
                assert_stochastic(&t, &uniform_weights(&t));
                assert_stochastic(&t, &metropolis_weights(&t));
            }
        }
    }
}
