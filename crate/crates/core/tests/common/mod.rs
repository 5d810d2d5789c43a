#![allow(dead_code)]

use cmnet::model::{ContextualStructure, UndirectedGraph};
use cmnet::params::{constraint_system, LogLinearModel};
use cmnet::DEFAULT_TABLE_CAP as CAP;

/// Seven binary variables; edges and contexts of the reference labelled
/// graph (zero-based here).
pub fn reference_structure() -> ContextualStructure {
    let edges = [
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 2),
        (1, 3),
        (2, 3),
        (2, 4),
        (3, 4),
        (4, 5),
        (4, 6),
        (5, 6),
    ];
    let g = UndirectedGraph::from_edges(7, &edges).unwrap();
    ContextualStructure::new(g, vec![2; 7])
        .unwrap()
        .with_context(0, 1, &[&[1, 0]])
        .unwrap()
        .with_context(0, 2, &[&[1, 0], &[1, 1]])
        .unwrap()
        .with_context(3, 4, &[&[0]])
        .unwrap()
        .with_context(4, 6, &[&[0]])
        .unwrap()
        .with_context(5, 6, &[&[1]])
        .unwrap()
}

/// Hand-set parameters satisfying every context restriction. Outside the
/// contexts every conditional pairwise log-odds ratio is at least 1.5 in
/// magnitude; main effects put every marginal near one half.
pub fn reference_model() -> LogLinearModel {
    let s = reference_structure();
    let mut m = LogLinearModel::zeros(s.clone()).unwrap();
    let terms: &[(&[usize], f64)] = &[
        (&[0], -1.0),
        (&[1], -1.0),
        (&[2], -5.0),
        (&[3], -2.25),
        (&[4], -2.75),
        (&[5], -0.75),
        (&[6], 0.25),
        (&[0, 1], 1.5),
        (&[0, 2], 1.5),
        (&[0, 3], 1.5),
        (&[1, 2], 3.0),
        (&[1, 3], -1.5),
        (&[2, 3], 2.0),
        (&[2, 4], 1.5),
        (&[3, 4], 0.0),
        (&[4, 5], 2.0),
        (&[4, 6], 0.0),
        (&[5, 6], -1.5),
        (&[0, 1, 2], -1.5),
        (&[0, 1, 3], -3.0),
        (&[0, 2, 3], 1.5),
        (&[1, 2, 3], 3.0),
        (&[2, 3, 4], 1.5),
        (&[4, 5, 6], 1.5),
        (&[0, 1, 2, 3], -1.5),
    ];
    let mut phi = m.phi_vector().to_vec();
    for (a, v) in terms {
        let x = vec![1u32; a.len()];
        phi[m.index_of(a, &x).expect("stored term")] = *v;
    }
    m.set_phi(phi, CAP).unwrap();
    let sys = constraint_system(&s).unwrap();
    assert!(sys.max_residual(m.phi_vector()) < 1e-12);
    m
}

/// Structure from an edge bitmask over the pairs `(i, j)`, `i < j`, in
/// lexicographic order, with contexts drawn from `seed`: each element of
/// each common-neighbour space joins with probability `density`, keeping
/// every context regular.
pub fn random_structure(cards: &[usize], edge_mask: u64, seed: u64, density: f64) -> ContextualStructure {
    use rand::Rng;
    let d = cards.len();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let edges: Vec<(usize, usize)> = pairs
        .iter()
        .enumerate()
        .filter(|(b, _)| edge_mask >> b & 1 == 1)
        .map(|(_, &e)| e)
        .collect();
    let g = UndirectedGraph::from_edges(d, &edges).unwrap();
    let mut s = ContextualStructure::new(g.clone(), cards.to_vec()).unwrap();
    let mut rng = cmnet::data::rng_from_seed(seed);
    for &(i, j) in &edges {
        let cn = g.common_neighbors(i, j);
        if cn.is_empty() {
            continue;
        }
        let space = cmnet::radix::Radix::new(&cn.iter().map(|&k| cards[k]).collect::<Vec<_>>(), usize::MAX).unwrap();
        let mut chosen = 0;
        for idx in 0..space.len() {
            if chosen + 1 < space.len() && rng.gen_bool(density) {
                s.add_context_element(i, j, space.decode(idx)).unwrap();
                chosen += 1;
            }
        }
    }
    s
}

/// Brute-force blanket classes of node `j`: configurations linked when they
/// differ only at one neighbour `i` and agree with an element of `𝒞(i, j)`
/// on `cn(i, j)`, closed under transitivity by repeated relabelling.
pub fn oracle_classes(s: &ContextualStructure, j: usize) -> Vec<Vec<Vec<u32>>> {
    let g = s.graph();
    let mb = g.neighbors(j);
    let cards: Vec<usize> = mb.iter().map(|&k| s.cardinalities()[k]).collect();
    let mut configs: Vec<Vec<u32>> = vec![vec![]];
    for &r in &cards {
        configs = configs
            .into_iter()
            .flat_map(|c| (0..r as u32).map(move |v| [c.clone(), vec![v]].concat()))
            .collect();
    }
    let mut label: Vec<usize> = (0..configs.len()).collect();
    loop {
        let mut changed = false;
        for a in 0..configs.len() {
            for b in a + 1..configs.len() {
                let diff: Vec<usize> = (0..mb.len()).filter(|&p| configs[a][p] != configs[b][p]).collect();
                if diff.len() != 1 {
                    continue;
                }
                let i = mb[diff[0]];
                let Some(ctx) = s.context(i, j) else { continue };
                let at: Vec<u32> = ctx
                    .cn
                    .iter()
                    .map(|k| configs[a][mb.iter().position(|m| m == k).unwrap()])
                    .collect();
                if ctx.elements.contains(&at) && label[a] != label[b] {
                    let (lo, hi) = (label[a].min(label[b]), label[a].max(label[b]));
                    for l in label.iter_mut() {
                        if *l == hi {
                            *l = lo;
                        }
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut classes: std::collections::BTreeMap<usize, Vec<Vec<u32>>> = Default::default();
    for (c, l) in configs.into_iter().zip(label) {
        classes.entry(l).or_default().push(c);
    }
    let mut out: Vec<Vec<Vec<u32>>> = classes.into_values().collect();
    out.sort();
    out
}
