use super::structure::ContextualStructure;
use crate::error::{Error, Result};
use crate::radix::Radix;

/// Largest Markov-blanket outcome space that will be enumerated.
pub const MAX_BLANKET_CONFIGS: usize = 1 << 16;

/// Partition of `𝒳_mb(j)` into classes that share the conditional
/// distribution of `X_j`.
///
/// Blanket configurations are indexed in lexicographic order over the
/// ascending blanket; class ids are assigned in order of each class's
/// smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlanketPartition {
    node: usize,
    blanket: Vec<usize>,
    radix: Radix,
    classes: Vec<u32>,
    q: usize,
}

impl BlanketPartition {
    pub fn node(&self) -> usize {
        self.node
    }

    pub fn blanket(&self) -> &[usize] {
        &self.blanket
    }

    pub fn radix(&self) -> &Radix {
        &self.radix
    }

    /// Class id of every blanket configuration.
    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn class_of(&self, blanket_config: &[u32]) -> u32 {
        self.classes[self.radix.index(blanket_config)]
    }

    /// Members of each class as blanket configurations, ordered by class id.
    pub fn members(&self) -> Vec<Vec<Vec<u32>>> {
        let mut out = vec![Vec::new(); self.q];
        for (idx, &c) in self.classes.iter().enumerate() {
            out[c as usize].push(self.radix.decode(idx));
        }
        out
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.q];
        for &c in &self.classes {
            sizes[c as usize] += 1;
        }
        sizes
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Partition the blanket outcome space of node `j` according to the
/// contexts on the edges incident to `j`.
///
/// For a neighbour `i` and an element `x_cn(i,j)` of `𝒞(i, j)`, all blanket
/// configurations that match the element on `cn(i, j)` and agree on the
/// rest of the blanket apart from `X_i` are merged into one class.
pub fn build_blanket_partition(s: &ContextualStructure, j: usize) -> Result<BlanketPartition> {
    let graph = s.graph();
    if j >= s.d() {
        return Err(Error::invalid(format!("node {j} outside 0..{}", s.d())));
    }
    let cards = s.cardinalities();
    let blanket = graph.neighbors(j);
    let bcards: Vec<usize> = blanket.iter().map(|&k| cards[k]).collect();
    let radix = Radix::new(&bcards, MAX_BLANKET_CONFIGS)?;
    let strides = radix.strides().to_vec();
    let size = radix.len();
    let pos = |node: usize| blanket.binary_search(&node).expect("node in blanket");

    let mut uf = UnionFind::new(size);
    for (i, ctx) in s.local_contexts(j) {
        let cn = graph.common_neighbors(i, j);
        if cn != ctx.cn {
            return Err(Error::structure(format!(
                "context of edge ({}, {}) is over {:?} but the common neighbours are {:?}",
                i.min(j),
                i.max(j),
                ctx.cn,
                cn
            )));
        }
        let pi = pos(i);
        let cn_pos: Vec<usize> = cn.iter().map(|&k| pos(k)).collect();
        let (stride_i, r_i) = (strides[pi], bcards[pi]);
        for element in &ctx.elements {
            if element.len() != cn.len() {
                return Err(Error::structure(format!(
                    "context element {element:?} does not match common neighbours {cn:?}"
                )));
            }
            for base in 0..size {
                if (base / stride_i) % r_i != 0 {
                    continue;
                }
                let matches = cn_pos
                    .iter()
                    .zip(element)
                    .all(|(&p, &v)| (base / strides[p]) % bcards[p] == v as usize);
                if !matches {
                    continue;
                }
                for v in 1..r_i {
                    uf.union(base as u32, (base + v * stride_i) as u32);
                }
            }
        }
    }

    let mut ids = vec![u32::MAX; size];
    let mut classes = vec![0u32; size];
    let mut q = 0u32;
    for (idx, class) in classes.iter_mut().enumerate() {
        let root = uf.find(idx as u32) as usize;
        if ids[root] == u32::MAX {
            ids[root] = q;
            q += 1;
        }
        *class = ids[root];
    }
    Ok(BlanketPartition {
        node: j,
        blanket,
        radix,
        classes,
        q: q as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UndirectedGraph;

    /// Six ternary nodes with contexts 𝒞(1,4)={0} and 𝒞(2,4)={1,2}
    /// (zero-based).
    pub(crate) fn six_node_ternary() -> ContextualStructure {
        let g = UndirectedGraph::from_edges(6, &[(0, 1), (1, 2), (0, 3), (3, 4), (1, 4), (2, 4)]).unwrap();
        ContextualStructure::new(g, vec![3; 6])
            .unwrap()
            .with_context(1, 4, &[&[0]])
            .unwrap()
            .with_context(2, 4, &[&[1], &[2]])
            .unwrap()
    }

    #[test]
    fn six_node_final_partition() {
        let p = build_blanket_partition(&six_node_ternary(), 4).unwrap();
        assert_eq!(p.blanket(), &[1, 2, 3]);
        assert_eq!(p.q(), 9);
        let mut sizes = p.class_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![1, 1, 1, 1, 1, 1, 7, 7, 7]);
        let members = p.members();
        for x4 in 0..3u32 {
            let big = vec![
                vec![0, 0, x4],
                vec![1, 0, x4],
                vec![1, 1, x4],
                vec![1, 2, x4],
                vec![2, 0, x4],
                vec![2, 1, x4],
                vec![2, 2, x4],
            ];
            assert!(members.contains(&big));
            assert!(members.contains(&vec![vec![0, 1, x4]]));
            assert!(members.contains(&vec![vec![0, 2, x4]]));
        }
    }

    #[test]
    fn empty_contexts_singletons() {
        let s = ContextualStructure::new(UndirectedGraph::complete(4), vec![2, 3, 2, 4]).unwrap();
        let p = build_blanket_partition(&s, 0).unwrap();
        assert_eq!(p.q(), 24);
        assert_eq!(p.classes(), (0..24).collect::<Vec<u32>>().as_slice());
    }

    #[test]
    fn three_class_example() {
        // j = 0, mb = {1, 2}, cn(1, 0) = {2}, 𝒞(0, 1) = {0}
        let s = ContextualStructure::new(UndirectedGraph::complete(3), vec![2; 3])
            .unwrap()
            .with_context(0, 1, &[&[0]])
            .unwrap();
        let p = build_blanket_partition(&s, 0).unwrap();
        assert_eq!(p.q(), 3);
        assert_eq!(
            p.members(),
            vec![vec![vec![0, 0], vec![1, 0]], vec![vec![0, 1]], vec![vec![1, 1]]]
        );
    }

    #[test]
    fn stale_context_errors() {
        let s = six_node_ternary();
        let mut json = s.to_json();
        json.edges.retain(|e| *e != [2, 4]);
        json.contexts.retain(|c| c.edge != [2, 4]);
        // cn(1,4) was {2}; now empty
        let stale = ContextualStructure::from_json(&json).unwrap();
        assert!(matches!(build_blanket_partition(&stale, 4), Err(Error::Structure(_))));
    }

    #[test]
    fn blanket_guard() {
        let s = ContextualStructure::new(UndirectedGraph::complete(18), vec![2; 18]).unwrap();
        assert!(matches!(build_blanket_partition(&s, 0), Err(Error::Capacity { .. })));
    }
}
