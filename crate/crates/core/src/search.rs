//! Greedy structure search.
//!
//! The outer climb moves between graphs one edge flip apart, starting from
//! the empty graph; every candidate graph gets its own context climb that
//! starts from the empty context and adds single context elements. Both
//! climbs take the best move of a full sweep and stop when no move improves
//! the score by more than [`TIE_THRESHOLD`]. Scans follow canonical edge
//! order and lexicographic element order, and ties keep the incumbent, so
//! results are deterministic even though candidate graphs are scored in
//! parallel.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ContextualStructure, UndirectedGraph};
use crate::params::{fit_mle, FitOptions};
use crate::radix::Radix;
use crate::scoring::{self, context_exponent, Kappa, KappaSpec, ScoreConfig, ScoredModel, Scorer};

/// Score differences at or below this count as ties.
pub const TIE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Cap on graph-climb iterations; `None` means `10·d²`.
    pub max_iter: Option<usize>,
    /// Score candidate graphs on the rayon pool.
    pub parallel: bool,
    pub cache_capacity: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_iter: None,
            parallel: true,
            cache_capacity: Scorer::DEFAULT_CAPACITY,
        }
    }
}

/// A structure found by a climb together with its score terms.
#[derive(Debug, Clone)]
pub struct ClimbResult {
    pub structure: ContextualStructure,
    pub node_scores: Vec<f64>,
    pub log_mpl: f64,
    pub log_prior: f64,
    /// Accepted scores, in order; strictly increasing.
    pub trace: Vec<f64>,
}

impl ClimbResult {
    pub fn score(&self) -> f64 {
        self.log_mpl + self.log_prior
    }
}

/// Find a context for graph `g` by greedy element additions.
pub fn context_hill_climb(scorer: &Scorer<'_>, g: &UndirectedGraph, config: &ScoreConfig) -> Result<ClimbResult> {
    let cards = scorer.dataset().cardinalities().to_vec();
    let mut s = ContextualStructure::new(g.clone(), cards.clone())?;
    let mut nodes = scorer.node_scores(&s)?;
    let mut log_prior = 0.0;
    let mut trace = vec![nodes.iter().sum::<f64>()];

    let ln_kappa = match config.kappa {
        Kappa::Epsilon => {
            return Ok(finish(s, nodes, log_prior, trace));
        }
        Kappa::Value(k) => k.ln(),
    };

    // edges that can carry a context, with their common-neighbour spaces
    let slots: Vec<((usize, usize), Radix)> = g
        .edges()
        .into_iter()
        .filter_map(|(i, j)| {
            let cn = g.common_neighbors(i, j);
            if cn.is_empty() {
                return None;
            }
            let cn_cards: Vec<usize> = cn.iter().map(|&k| cards[k]).collect();
            Radix::new(&cn_cards, usize::MAX).ok().map(|r| ((i, j), r))
        })
        .collect();
    if slots.is_empty() {
        return Ok(finish(s, nodes, log_prior, trace));
    }

    let mut deltas: HashMap<((usize, usize), usize), f64> = HashMap::new();
    loop {
        let mut best: Option<((usize, usize), Vec<u32>, f64)> = None;
        let mut best_delta = 0.0;
        for ((i, j), radix) in &slots {
            let (i, j) = (*i, *j);
            let current = s.context(i, j).map_or(0, |c| c.len());
            if current + 1 >= radix.len() {
                continue;
            }
            for idx in 0..radix.len() {
                let element = radix.decode(idx);
                if s.context(i, j).is_some_and(|c| c.elements.contains(&element)) {
                    continue;
                }
                let delta = match deltas.get(&((i, j), idx)) {
                    Some(&d) => d,
                    None => {
                        let mut cand = s.clone();
                        cand.add_context_element(i, j, element.clone())?;
                        let d = scorer.node_score(&cand, i)? + scorer.node_score(&cand, j)?
                            - nodes[i]
                            - nodes[j]
                            + context_exponent(&cards, i, j) * ln_kappa;
                        deltas.insert(((i, j), idx), d);
                        d
                    }
                };
                if delta > best_delta + TIE_THRESHOLD {
                    best_delta = delta;
                    best = Some(((i, j), element, delta));
                }
            }
        }
        let Some(((i, j), element, _)) = best else {
            break;
        };
        s.add_context_element(i, j, element)?;
        nodes[i] = scorer.node_score(&s, i)?;
        nodes[j] = scorer.node_score(&s, j)?;
        log_prior += context_exponent(&cards, i, j) * ln_kappa;
        // only candidates touching i or j see a different score
        deltas.retain(|&((a, b), _), _| a != i && a != j && b != i && b != j);
        let total = nodes.iter().sum::<f64>() + log_prior;
        debug_assert!(total > *trace.last().expect("non-empty"));
        trace.push(total);
        #[cfg(debug_assertions)]
        {
            let full = scoring::log_mpl(scorer.dataset(), &s, &ScoreConfig { alpha: scorer.alpha(), ..*config })?;
            debug_assert!(
                (full.total - nodes.iter().sum::<f64>()).abs() <= 1e-9 * full.total.abs().max(1.0),
                "incremental score {} differs from full recomputation {}",
                nodes.iter().sum::<f64>(),
                full.total
            );
        }
    }
    Ok(finish(s, nodes, log_prior, trace))
}

fn finish(structure: ContextualStructure, node_scores: Vec<f64>, log_prior: f64, trace: Vec<f64>) -> ClimbResult {
    let log_mpl = node_scores.iter().sum();
    ClimbResult {
        structure,
        node_scores,
        log_mpl,
        log_prior,
        trace,
    }
}

/// Graph hill climb from the empty graph, with a context climb for every
/// candidate graph.
pub fn graph_hill_climb(dataset: &Dataset, config: &ScoreConfig, options: &SearchOptions) -> Result<ClimbResult> {
    let scorer = Scorer::with_capacity(dataset, config.alpha, options.cache_capacity);
    graph_hill_climb_with(&scorer, config, options)
}

/// As [`graph_hill_climb`], reusing the caches of `scorer`.
pub fn graph_hill_climb_with(scorer: &Scorer<'_>, config: &ScoreConfig, options: &SearchOptions) -> Result<ClimbResult> {
    let d = scorer.dataset().d();
    let max_iter = options.max_iter.unwrap_or(10 * d * d);
    let mut best = context_hill_climb(scorer, &UndirectedGraph::empty(d), config)?;
    let mut trace = vec![best.score()];

    for _ in 0..max_iter {
        let neighbours = best.structure.graph().neighbor_graphs();
        let climb = |(_, g): &((usize, usize), UndirectedGraph)| context_hill_climb(scorer, g, config);
        let results: Vec<Result<ClimbResult>> = if options.parallel {
            neighbours.par_iter().map(climb).collect()
        } else {
            neighbours.iter().map(climb).collect()
        };
        let mut winner: Option<ClimbResult> = None;
        let mut winner_score = best.score();
        for r in results {
            let r = r?;
            if r.score() > winner_score + TIE_THRESHOLD {
                winner_score = r.score();
                winner = Some(r);
            }
        }
        match winner {
            Some(w) => {
                trace.push(w.score());
                best = w;
            }
            None => break,
        }
    }
    best.trace = trace;
    Ok(best)
}

/// All models of a kappa sweep plus the indices of the BIC winner and of
/// the plain Markov network (`κ = ε`).
#[derive(Debug, Clone)]
pub struct KappaSweep {
    pub models: Vec<ScoredModel>,
    pub selected: usize,
    /// Index into `models`; the ε model is appended (and excluded from the
    /// selection) when the grid lacks ε.
    pub mn: usize,
    /// Number of leading entries of `models` that came from the grid.
    pub grid_len: usize,
}

impl KappaSweep {
    pub fn selected(&self) -> &ScoredModel {
        &self.models[self.selected]
    }

    pub fn mn(&self) -> &ScoredModel {
        &self.models[self.mn]
    }
}

/// Learn and fit one structure.
pub fn learn_one(
    scorer: &Scorer<'_>,
    kappa: Kappa,
    search: &SearchOptions,
    fit: &FitOptions,
) -> Result<ScoredModel> {
    let config = ScoreConfig {
        alpha: scorer.alpha(),
        kappa,
    };
    let climb = graph_hill_climb_with(scorer, &config, search)?;
    let dataset = scorer.dataset();
    let fitted = fit_mle(dataset, &climb.structure, fit)?;
    let dimension = fitted.constraints.nominal_dimension - fitted.constraints.rank;
    let n = dataset.n();
    Ok(ScoredModel {
        structure: climb.structure,
        kappa,
        log_mpl: climb.log_mpl,
        log_prior: climb.log_prior,
        dimension,
        log_lik: fitted.log_lik,
        bic: scoring::bic(fitted.log_lik, dimension, n),
        sbic: scoring::sbic(fitted.log_lik, dimension, n),
        model: Some(fitted.model),
    })
}

/// Run the search for each kappa, fit each result, and pick the model with
/// the highest BIC (first in grid order on ties).
pub fn kappa_sweep(
    dataset: &Dataset,
    grid: &[KappaSpec],
    alpha: f64,
    search: &SearchOptions,
    fit: &FitOptions,
) -> Result<KappaSweep> {
    if grid.is_empty() {
        return Err(Error::invalid("kappa grid is empty"));
    }
    ScoreConfig::new(alpha, Kappa::Epsilon)?;
    let scorer = Scorer::with_capacity(dataset, alpha, search.cache_capacity);
    let n = dataset.n();
    let mut models = Vec::with_capacity(grid.len() + 1);
    for spec in grid {
        models.push(learn_one(&scorer, spec.resolve(n), search, fit)?);
    }
    let grid_len = models.len();
    let mut selected = 0;
    for (k, m) in models.iter().enumerate() {
        if m.bic > models[selected].bic {
            selected = k;
        }
    }
    let mn = match models.iter().position(|m| m.kappa.is_epsilon()) {
        Some(k) => k,
        None => {
            models.push(learn_one(&scorer, Kappa::Epsilon, search, fit)?);
            models.len() - 1
        }
    };
    Ok(KappaSweep {
        models,
        selected,
        mn,
        grid_len,
    })
}
