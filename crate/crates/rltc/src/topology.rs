//! Communication graphs: 2D square lattices for experiments, arbitrary
//! connected graphs for tests and the exact oracle.
//!
//! Node IDs are 1-based. Neighbor lists are kept in ascending ID order;
//! that order is the positional basis for every trust bit-vector and
//! action index in the rest of the crate.

use crate::error::{Error, Result};

/// 1-based node identifier.
pub type NodeId = usize;

/// Undirected connected communication graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    /// `adjacency[i - 1]` lists the neighbors of node `i`, ascending.
    adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Row-major `d x d` square lattice with 4-connectivity.
    ///
    /// Node 1 sits top-left; node `i` is at row `(i-1)/d`, column `(i-1)%d`.
    pub fn grid(d: usize) -> Result<Topology> {
        if d < 2 {
            return Err(Error::GridTooSmall(d));
        }
        let n = d * d;
        let mut adjacency = vec![Vec::with_capacity(4); n];
        for (idx, list) in adjacency.iter_mut().enumerate() {
            let id = idx + 1;
            let (row, col) = (idx / d, idx % d);
            // ascending neighbor IDs: up, left, right, down
            if row > 0 {
                list.push(id - d);
            }
            if col > 0 {
                list.push(id - 1);
            }
            if col + 1 < d {
                list.push(id + 1);
            }
            if row + 1 < d {
                list.push(id + d);
            }
        }
        Ok(Topology {
            node_count: n,
            adjacency,
        })
    }

    /// Arbitrary connected graph from an undirected edge list.
    ///
    /// Meant for tests and oracle fixtures, not the experiment path.
    pub fn custom(edges: &[(NodeId, NodeId)], node_count: usize) -> Result<Topology> {
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a < 1 || a > node_count || b < 1 || b > node_count {
                return Err(Error::EdgeOutOfRange(a, b, node_count));
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if adjacency[a - 1].contains(&b) {
                return Err(Error::DuplicateEdge(a, b));
            }
            adjacency[a - 1].push(b);
            adjacency[b - 1].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let t = Topology {
            node_count,
            adjacency,
        };
        if !t.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(t)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Node IDs `1..=N`.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.node_count
    }

    /// Neighbors of `i` in ascending ID order.
    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.adjacency[i - 1]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.adjacency[i - 1].len()
    }

    /// Position of `j` within `neighbors(i)`, if adjacent. This index is the
    /// bit position of `j` in node `i`'s trust bit-vector.
    pub fn neighbor_position(&self, i: NodeId, j: NodeId) -> Option<usize> {
        self.adjacency[i - 1].binary_search(&j).ok()
    }

    /// Every undirected edge exactly once as `(i, j)` with `i < j`,
    /// ascending lexicographically.
    pub fn edge_list(&self) -> Vec<(NodeId, NodeId)> {
        let mut edges = Vec::new();
        for i in self.nodes() {
            for &j in self.neighbors(i) {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return false;
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![1];
        seen[0] = true;
        let mut visited = 1;
        while let Some(i) = stack.pop() {
            for &j in self.neighbors(i) {
                if !seen[j - 1] {
                    seen[j - 1] = true;
                    visited += 1;
                    stack.push(j);
                }
            }
        }
        visited == self.node_count
    }
}
