use std::fmt;

use crate::error::{Error, Result};

/// Simple undirected graph over nodes `0..d`, stored as a dense adjacency
/// matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UndirectedGraph {
    d: usize,
    adj: Vec<bool>,
}

impl UndirectedGraph {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            adj: vec![false; d * d],
        }
    }

    pub fn complete(d: usize) -> Self {
        let mut g = Self::empty(d);
        for i in 0..d {
            for j in i + 1..d {
                g.set(i, j, true);
            }
        }
        g
    }

    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(d);
        for &(i, j) in edges {
            g.check_pair(i, j)?;
            g.set(i, j, true);
        }
        Ok(g)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::structure(format!("self-loop on node {i}")));
        }
        if i >= self.d || j >= self.d {
            return Err(Error::structure(format!(
                "edge ({i}, {j}) references a node outside 0..{}",
                self.d
            )));
        }
        Ok(())
    }

    fn set(&mut self, i: usize, j: usize, on: bool) {
        self.adj[i * self.d + j] = on;
        self.adj[j * self.d + i] = on;
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && i < self.d && j < self.d && self.adj[i * self.d + j]
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        self.set(i, j, true);
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_pair(i, j)?;
        self.set(i, j, false);
        Ok(())
    }

    /// Copy with the edge `{i, j}` flipped.
    pub fn toggled(&self, i: usize, j: usize) -> Self {
        let mut g = self.clone();
        let on = !g.has_edge(i, j);
        g.set(i, j, on);
        g
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in i + 1..self.d {
                if self.adj[i * self.d + j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&a| a).count() / 2
    }

    /// The Markov blanket `mb(j)`, ascending.
    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        (0..self.d).filter(|&i| self.adj[j * self.d + i]).collect()
    }

    /// `cn(i, j) = mb(i) ∩ mb(j)`, ascending.
    pub fn common_neighbors(&self, i: usize, j: usize) -> Vec<usize> {
        (0..self.d)
            .filter(|&k| k != i && k != j && self.has_edge(i, k) && self.has_edge(j, k))
            .collect()
    }

    /// Whether every pair in `nodes` is adjacent.
    pub fn is_complete(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(a, &u)| nodes[a + 1..].iter().all(|&v| self.has_edge(u, v)))
    }

    /// All graphs one edge flip away, paired with the flipped pair, in
    /// lexicographic pair order.
    pub fn neighbor_graphs(&self) -> Vec<((usize, usize), UndirectedGraph)> {
        let mut out = Vec::with_capacity(self.d * self.d.saturating_sub(1) / 2);
        for i in 0..self.d {
            for j in i + 1..self.d {
                out.push(((i, j), self.toggled(i, j)));
            }
        }
        out
    }

    /// Number of node pairs on which the two graphs disagree.
    pub fn hamming(&self, other: &UndirectedGraph) -> usize {
        assert_eq!(self.d, other.d);
        self.adj
            .iter()
            .zip(&other.adj)
            .filter(|(a, b)| a != b)
            .count()
            / 2
    }
}

impl fmt::Debug for UndirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UndirectedGraph(d={}, edges={:?})", self.d, self.edges())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Six nodes, two triangles sharing edge 1-4.
    fn six_node() -> UndirectedGraph {
        UndirectedGraph::from_edges(6, &[(0, 1), (1, 2), (0, 3), (3, 4), (1, 4), (2, 4)]).unwrap()
    }

    #[test]
    fn neighbor_graph_counts() {
        let n = UndirectedGraph::empty(3).neighbor_graphs();
        assert_eq!(n.len(), 3);
        assert!(n.iter().all(|(_, g)| g.edge_count() == 1));
        let n = UndirectedGraph::complete(3).neighbor_graphs();
        assert!(n.iter().all(|(_, g)| g.edge_count() == 2));

        let path = UndirectedGraph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let n = path.neighbor_graphs();
        assert_eq!(n.len(), 15);
        for ((i, j), g) in &n {
            assert_eq!(g.hamming(&path), 1);
            assert_ne!(g.has_edge(*i, *j), path.has_edge(*i, *j));
        }
        let pairs: Vec<_> = n.iter().map(|(p, _)| *p).collect();
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(pairs, sorted);
    }

    #[test]
    fn common_neighbors_examples() {
        let g = six_node();
        assert_eq!(g.common_neighbors(1, 4), vec![2]);
        let fig2 = UndirectedGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(fig2.common_neighbors(0, 2), vec![1, 3]);
        assert_eq!(g.common_neighbors(0, 3), Vec::<usize>::new());
    }

    #[test]
    fn blankets_symmetric() {
        let g = six_node();
        for i in 0..6 {
            for j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
            }
        }
        assert_eq!(g.neighbors(1), vec![0, 2, 4]);
        assert!(g.neighbors(5).is_empty());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(UndirectedGraph::from_edges(3, &[(1, 1)]).is_err());
        assert!(UndirectedGraph::from_edges(3, &[(1, 3)]).is_err());
    }
}
