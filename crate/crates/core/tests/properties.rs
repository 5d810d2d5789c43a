mod common;

use cmnet::data::{make_folds, sample_joint, Dataset, JointTable};
use cmnet::eval::kl_divergence;
use cmnet::model::{ContextualStructure, StructureJson, UndirectedGraph};
use cmnet::params::{constraint_system, fit_mle, FitOptions, Objective};
use cmnet::scoring::{log_context_prior, log_mpl, Kappa, ScoreConfig, Scorer};
use cmnet::DEFAULT_TABLE_CAP as CAP;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_table(cards: &[usize], seed: u64, floor: f64) -> JointTable {
    let mut rng = cmnet::data::rng_from_seed(seed);
    let len: usize = cards.iter().product();
    let w: Vec<f64> = (0..len).map(|_| floor + rng.gen::<f64>()).collect();
    let t: f64 = w.iter().sum();
    JointTable::new(cards.to_vec(), w.iter().map(|v| v / t).collect(), CAP).unwrap()
}

/// Move variable `k` to position `perm[k]`, remapping contexts.
fn relabel(s: &ContextualStructure, perm: &[usize]) -> ContextualStructure {
    let j = s.to_json();
    let mut cards = vec![0; j.d];
    for k in 0..j.d {
        cards[perm[k]] = j.cardinalities[k];
    }
    let edges: Vec<[usize; 2]> = j
        .edges
        .iter()
        .map(|e| {
            let (a, b) = (perm[e[0]], perm[e[1]]);
            [a.min(b), a.max(b)]
        })
        .collect();
    let contexts = j
        .contexts
        .iter()
        .map(|c| {
            let (a, b) = (perm[c.edge[0]], perm[c.edge[1]]);
            let mut order: Vec<(usize, usize)> = c.cn.iter().enumerate().map(|(p, &k)| (perm[k], p)).collect();
            order.sort();
            cmnet::model::ContextJson {
                edge: [a.min(b), a.max(b)],
                cn: order.iter().map(|o| o.0).collect(),
                elements: c.elements.iter().map(|e| order.iter().map(|o| e[o.1]).collect()).collect(),
            }
        })
        .collect();
    ContextualStructure::from_json(&StructureJson {
        d: j.d,
        cardinalities: cards,
        edges,
        contexts,
        variable_names: None,
    })
    .unwrap()
}

fn case_strategy() -> impl Strategy<Value = (ContextualStructure, Dataset)> {
    (3usize..=5)
        .prop_flat_map(|d| {
            (
                proptest::collection::vec(2usize..=3, d),
                any::<u64>(),
                any::<u64>(),
                0.1f64..0.7,
                5usize..80,
            )
        })
        .prop_map(|(cards, mask, seed, density, n)| {
            let s = common::random_structure(&cards, mask, seed, density);
            let t = random_table(&cards, seed ^ 0x5eed, 0.0);
            (s, sample_joint(&t, n, seed, CAP).unwrap())
        })
}

const CFG: ScoreConfig = ScoreConfig {
    alpha: 0.5,
    kappa: Kappa::Value(0.5),
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mpl_invariant_to_row_order((s, ds) in case_strategy(), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..ds.n()).collect();
        idx.shuffle(&mut cmnet::data::rng_from_seed(seed));
        let shuffled = ds.select_rows(&idx).unwrap();
        let a = log_mpl(&ds, &s, &CFG).unwrap().total;
        let b = log_mpl(&shuffled, &s, &CFG).unwrap().total;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn mpl_decomposes_over_nodes((s, ds) in case_strategy()) {
        let full = log_mpl(&ds, &s, &CFG).unwrap();
        let scorer = Scorer::new(&ds, 0.5);
        let nodes = scorer.node_scores(&s).unwrap();
        prop_assert_eq!(full.per_node.len(), s.d());
        for (a, b) in full.per_node.iter().zip(&nodes) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let sum: f64 = nodes.iter().sum();
        prop_assert!((full.total - sum).abs() <= 1e-9 * sum.abs().max(1.0));
    }

    #[test]
    fn mpl_and_prior_invariant_to_relabelling((s, ds) in case_strategy(), seed in any::<u64>()) {
        let d = s.d();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut cmnet::data::rng_from_seed(seed));
        let t = relabel(&s, &perm);
        let mut values = vec![0u32; ds.n() * d];
        for r in 0..ds.n() {
            for k in 0..d {
                values[r * d + perm[k]] = ds.get(r, k);
            }
        }
        let pds = Dataset::new(values, t.cardinalities().to_vec()).unwrap();
        let a = log_mpl(&ds, &s, &CFG).unwrap().total;
        let b = log_mpl(&pds, &t, &CFG).unwrap().total;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        prop_assert!((log_context_prior(&s, &CFG) - log_context_prior(&t, &CFG)).abs() < 1e-12);
    }

    #[test]
    fn folds_partition_rows(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let f = make_folds(n, k, seed).unwrap();
        prop_assert_eq!(&f, &make_folds(n, k, seed).unwrap());
        let sizes = f.fold_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for fold in 0..k {
            let mut all = f.test_rows(fold);
            all.extend(f.train_rows(fold));
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn kl_nonnegative_and_zero_only_on_equality(cards in proptest::collection::vec(2usize..=3, 1..4), a in any::<u64>(), b in any::<u64>()) {
        let p = random_table(&cards, a, 0.0);
        let q = random_table(&cards, b, 0.0);
        let kl = kl_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        if p.total_variation(&q).unwrap() > 1e-12 {
            prop_assert!(kl > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fitted_parameters_satisfy_restrictions((s, ds) in case_strategy()) {
        let fit = fit_mle(&ds, &s, &FitOptions::default()).unwrap();
        prop_assert!(fit.gradient_norm < 1e-8);
        let sys = constraint_system(&s).unwrap();
        prop_assert!(sys.max_residual(fit.model.phi_vector()) < 1e-8);
        let total: f64 = fit.model.joint_of(CAP).unwrap().probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contexts_never_raise_likelihood((s, ds) in case_strategy()) {
        let mut plain = s.clone();
        plain.clear_contexts();
        let with = fit_mle(&ds, &s, &FitOptions::default()).unwrap().log_lik;
        let without = fit_mle(&ds, &plain, &FitOptions::default()).unwrap().log_lik;
        prop_assert!(with <= without + 1e-6 * without.abs().max(1.0));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences((s, ds) in case_strategy(), seed in any::<u64>()) {
        let obj = Objective::new(&ds, &s, &FitOptions::default()).unwrap();
        let mut rng = cmnet::data::rng_from_seed(seed);
        let theta = DVector::from_fn(obj.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let an = obj.gradient(&theta);
        let h = 1e-5;
        let fd = DVector::from_fn(obj.dim(), |k, _| {
            let mut e = DVector::zeros(obj.dim());
            e[k] = h;
            (obj.value(&(&theta + &e)) - obj.value(&(&theta - &e))) / (2.0 * h)
        });
        prop_assert!((&fd - &an).norm() <= 1e-4 * an.norm().max(1.0));
    }
}

#[test]
fn likelihood_equal_when_restriction_already_holds() {
    // X0 ⟂ X1 given X2 = 0 holds exactly in the empirical table
    let mut rows = Vec::new();
    for (x, c) in [
        ([0, 0, 0], 4),
        ([0, 1, 0], 4),
        ([1, 0, 0], 2),
        ([1, 1, 0], 2),
        ([0, 0, 1], 5),
        ([0, 1, 1], 1),
        ([1, 0, 1], 1),
        ([1, 1, 1], 3),
    ] {
        for _ in 0..c {
            rows.push(x.to_vec());
        }
    }
    let ds = Dataset::from_rows(&rows).unwrap();
    let plain = ContextualStructure::new(UndirectedGraph::complete(3), vec![2; 3]).unwrap();
    let ctx = plain.clone().with_context(0, 1, &[&[0]]).unwrap();
    let opts = FitOptions {
        smoothing: None,
        ..FitOptions::default()
    };
    let a = fit_mle(&ds, &plain, &opts).unwrap().log_lik;
    let b = fit_mle(&ds, &ctx, &opts).unwrap().log_lik;
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn fitted_triangle_shows_the_context_independence() {
    let truth = random_table(&[2, 2, 2], 17, 0.2);
    let ds = sample_joint(&truth, 2000, 4, CAP).unwrap();
    let s = ContextualStructure::new(UndirectedGraph::complete(3), vec![2; 3])
        .unwrap()
        .with_context(0, 1, &[&[0]])
        .unwrap();
    let t = fit_mle(&ds, &s, &FitOptions::default()).unwrap().model.joint_of(CAP).unwrap();
    // p(X0 = 1 | X1 = x1, X2 = 0) does not depend on x1
    let cond = |x1: u32| t.prob(&[1, x1, 0]) / (t.prob(&[0, x1, 0]) + t.prob(&[1, x1, 0]));
    assert!((cond(0) - cond(1)).abs() < 1e-6, "{} vs {}", cond(0), cond(1));
}

#[test]
fn sampling_round_trip_recovers_table() {
    let t = random_table(&[2, 2, 2], 99, 0.05);
    let ds = sample_joint(&t, 100_000, 8, CAP).unwrap();
    let s = ContextualStructure::new(UndirectedGraph::complete(3), vec![2; 3]).unwrap();
    let fitted = fit_mle(&ds, &s, &FitOptions::default()).unwrap().model.joint_of(CAP).unwrap();
    assert!(fitted.total_variation(&t).unwrap() < 0.02);
}

#[test]
fn saturated_fit_equals_empirical_table() {
    let t = random_table(&[2, 3, 2], 5, 0.1);
    let ds = sample_joint(&t, 3000, 1, CAP).unwrap();
    let emp = cmnet::data::empirical_joint(&ds, CAP).unwrap();
    assert!(emp.probabilities().iter().all(|&p| p > 0.0));
    let s = ContextualStructure::new(UndirectedGraph::complete(3), vec![2, 3, 2]).unwrap();
    let opts = FitOptions {
        smoothing: None,
        ..FitOptions::default()
    };
    let fitted = fit_mle(&ds, &s, &opts).unwrap().model.joint_of(CAP).unwrap();
    assert!(fitted.total_variation(&emp).unwrap() < 1e-6);
}
