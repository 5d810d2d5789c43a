//! Marginal pseudo-likelihood scoring of contextual structures.
//!
//! The MPL of a structure factorises over nodes. For node `j` the blanket
//! outcome space is partitioned into classes by the contexts around `j`;
//! each class carries a Dirichlet–multinomial term over the values of
//! `X_j`:
//!
//! ```text
//! Σ_l [ lnΓ(α_jl) − lnΓ(n_jl + α_jl) + Σ_i ( lnΓ(n_ijl + α_ijl) − lnΓ(α_ijl) ) ]
//! ```
//!
//! with `α_ijl = alpha` and `α_jl = r_j · alpha`. The structure prior
//! penalises each context element on `{i, j}` by `κ^{(r_i−1)(r_j−1)}`.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{build_blanket_partition, BlanketPartition, ContextualStructure};
use crate::params::LogLinearModel;

/// Strength of the context prior. `Epsilon` forbids context elements
/// outright instead of using a tiny float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    Epsilon,
    Value(f64),
}

impl Kappa {
    pub fn value(v: f64) -> Result<Self> {
        if v > 0.0 && v <= 1.0 {
            Ok(Kappa::Value(v))
        } else {
            Err(Error::invalid(format!("kappa {v} outside (0, 1]")))
        }
    }

    pub fn is_epsilon(&self) -> bool {
        matches!(self, Kappa::Epsilon)
    }

    /// `{ε, n⁻¹, n⁻¹ᐟ², n⁻¹ᐟ⁴}`.
    pub fn default_grid(n: usize) -> Vec<Kappa> {
        let n = n as f64;
        vec![
            Kappa::Epsilon,
            Kappa::Value(1.0 / n),
            Kappa::Value(n.powf(-0.5)),
            Kappa::Value(n.powf(-0.25)),
        ]
    }
}

/// A precision (`{:.3}`) switches numbers to scientific notation with that
/// many fractional digits.
impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self, f.precision()) {
            (Kappa::Epsilon, _) => f.write_str("eps"),
            (Kappa::Value(v), Some(p)) => write!(f, "{v:.p$e}"),
            (Kappa::Value(v), None) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Kappa {
    type Err = Error;

    /// Accepts `eps` or a number in `(0, 1]`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eps" | "epsilon" | "ε" => Ok(Kappa::Epsilon),
            t => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::invalid(format!("cannot parse kappa {t:?}")))?;
                Kappa::value(v)
            }
        }
    }
}

impl Serialize for Kappa {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Kappa::Epsilon => s.serialize_str("eps"),
            Kappa::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Kappa {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Kappa::value(v).map_err(serde::de::Error::custom),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A kappa that may depend on the training-set size (`n^-p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaSpec {
    Fixed(Kappa),
    PowerOfN(f64),
}

impl KappaSpec {
    pub fn resolve(&self, n: usize) -> Kappa {
        match *self {
            KappaSpec::Fixed(k) => k,
            KappaSpec::PowerOfN(p) => Kappa::Value((n as f64).powf(-p)),
        }
    }

    pub fn default_grid() -> Vec<KappaSpec> {
        vec![
            KappaSpec::Fixed(Kappa::Epsilon),
            KappaSpec::PowerOfN(1.0),
            KappaSpec::PowerOfN(0.5),
            KappaSpec::PowerOfN(0.25),
        ]
    }
}

impl fmt::Display for KappaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaSpec::Fixed(k) => k.fmt(f),
            KappaSpec::PowerOfN(p) => write!(f, "n^-{p}"),
        }
    }
}

impl FromStr for KappaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(rest) = t.strip_prefix("n^-") {
            let p = match rest.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.parse().map_err(|_| Error::invalid(format!("bad exponent in {t:?}")))?;
                    let b: f64 = b.parse().map_err(|_| Error::invalid(format!("bad exponent in {t:?}")))?;
                    a / b
                }
                None => rest
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad exponent in {t:?}")))?,
            };
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::invalid(format!("exponent in {t:?} must be non-negative")));
            }
            return Ok(KappaSpec::PowerOfN(p));
        }
        Ok(KappaSpec::Fixed(t.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Dirichlet pseudo-count per cell; ½ gives Jeffreys' prior.
    pub alpha: f64,
    pub kappa: Kappa,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            kappa: Kappa::Value(1.0),
        }
    }
}

impl ScoreConfig {
    pub fn new(alpha: f64, kappa: Kappa) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha {alpha} must be positive")));
        }
        if let Kappa::Value(v) = kappa {
            Kappa::value(v)?;
        }
        Ok(Self { alpha, kappa })
    }

    pub fn kappa_is_epsilon(&self) -> bool {
        self.kappa.is_epsilon()
    }
}

/// Per-class counts `n_ijl` of node `j`, stored `q × r_j` row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub node: usize,
    pub q: usize,
    pub r: usize,
    pub counts: Vec<u64>,
    pub totals: Vec<u64>,
}

impl ClassCounts {
    pub fn row(&self, l: usize) -> &[u64] {
        &self.counts[l * self.r..(l + 1) * self.r]
    }

    fn from_counts(node: usize, q: usize, r: usize, counts: Vec<u64>) -> Self {
        let totals = counts.chunks(r).map(|c| c.iter().sum()).collect();
        Self {
            node,
            q,
            r,
            counts,
            totals,
        }
    }
}

/// Single pass over the rows of `dataset`.
pub fn class_counts(dataset: &Dataset, partition: &BlanketPartition) -> ClassCounts {
    let j = partition.node();
    let r = dataset.cardinalities()[j];
    let q = partition.q();
    let blanket = partition.blanket();
    let strides = partition.radix().strides();
    let classes = partition.classes();
    let mut counts = vec![0u64; q * r];
    for row in dataset.rows() {
        let idx: usize = blanket
            .iter()
            .zip(strides)
            .map(|(&b, &s)| row[b] as usize * s)
            .sum();
        counts[classes[idx] as usize * r + row[j] as usize] += 1;
    }
    ClassCounts::from_counts(j, q, r, counts)
}

/// Aggregate per-configuration counts (`|𝒳_mb| × r_j`) into class counts.
fn aggregate(partition: &BlanketPartition, r: usize, config_counts: &[u32]) -> ClassCounts {
    let q = partition.q();
    let mut counts = vec![0u64; q * r];
    for (idx, &c) in partition.classes().iter().enumerate() {
        let src = &config_counts[idx * r..(idx + 1) * r];
        let dst = &mut counts[c as usize * r..(c as usize + 1) * r];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += s as u64;
        }
    }
    ClassCounts::from_counts(partition.node(), q, r, counts)
}

/// Closed-form log marginal pseudo-likelihood term of one node.
pub fn local_log_mpl(counts: &ClassCounts, alpha: f64) -> f64 {
    let r = counts.r as f64;
    let lg_a = ln_gamma(alpha);
    let lg_ra = ln_gamma(r * alpha);
    let mut total = 0.0;
    for l in 0..counts.q {
        let n_l = counts.totals[l];
        if n_l == 0 {
            continue;
        }
        let mut term = lg_ra - ln_gamma(n_l as f64 + r * alpha);
        for &n_il in counts.row(l) {
            if n_il > 0 {
                term += ln_gamma(n_il as f64 + alpha) - lg_a;
            }
        }
        total += term;
    }
    total
}

/// Log-MPL of a structure with its per-node terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MplBreakdown {
    pub total: f64,
    pub per_node: Vec<f64>,
}

fn check_shape(dataset: &Dataset, s: &ContextualStructure) -> Result<()> {
    if dataset.cardinalities() != s.cardinalities() {
        return Err(Error::ShapeMismatch(format!(
            "data has {} variables with cardinalities {:?}; structure has {} with {:?}",
            dataset.d(),
            dataset.cardinalities(),
            s.d(),
            s.cardinalities()
        )));
    }
    Ok(())
}

pub fn log_mpl(dataset: &Dataset, s: &ContextualStructure, config: &ScoreConfig) -> Result<MplBreakdown> {
    check_shape(dataset, s)?;
    let mut per_node = Vec::with_capacity(s.d());
    for j in 0..s.d() {
        let p = build_blanket_partition(s, j)?;
        per_node.push(local_log_mpl(&class_counts(dataset, &p), config.alpha));
    }
    Ok(MplBreakdown {
        total: per_node.iter().sum(),
        per_node,
    })
}

/// Exponent `(r_i − 1)(r_j − 1)` of one context element on `{i, j}`.
pub fn context_exponent(cards: &[usize], i: usize, j: usize) -> f64 {
    ((cards[i] - 1) * (cards[j] - 1)) as f64
}

/// Unnormalised log of `p(𝒞 | G)`. With `κ = ε`, any context element makes
/// the structure impossible (`-∞`).
pub fn log_context_prior(s: &ContextualStructure, config: &ScoreConfig) -> f64 {
    let cards = s.cardinalities();
    match config.kappa {
        Kappa::Epsilon => {
            if s.context_element_count() > 0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        }
        Kappa::Value(k) => {
            let ln_k = k.ln();
            s.contexts()
                .map(|((i, j), c)| c.len() as f64 * context_exponent(cards, i, j) * ln_k)
                .sum()
        }
    }
}

/// `log MPL + log p(𝒞 | G)`; the graph prior is uniform and dropped.
pub fn total_score(dataset: &Dataset, s: &ContextualStructure, config: &ScoreConfig) -> Result<f64> {
    Ok(log_mpl(dataset, s, config)?.total + log_context_prior(s, config))
}

pub fn bic(log_lik: f64, dimension: usize, n: usize) -> f64 {
    log_lik - 0.5 * dimension as f64 * (n as f64).ln()
}

/// BIC divided by the sample size.
pub fn sbic(log_lik: f64, dimension: usize, n: usize) -> f64 {
    bic(log_lik, dimension, n) / n as f64
}

/// A learned structure with its scores and, once fitted, its parameters.
#[derive(Debug, Clone)]
pub struct ScoredModel {
    pub structure: ContextualStructure,
    pub kappa: Kappa,
    pub log_mpl: f64,
    pub log_prior: f64,
    pub dimension: usize,
    pub log_lik: f64,
    pub bic: f64,
    pub sbic: f64,
    pub model: Option<LogLinearModel>,
}

impl ScoredModel {
    pub fn score(&self) -> f64 {
        self.log_mpl + self.log_prior
    }
}

/// Node and sorted blanket.
type ConfigKey = (usize, Vec<usize>);

type NodeKey = (usize, Vec<usize>, Vec<(usize, Vec<usize>, Vec<Vec<u32>>)>);

/// Cached node-wise scorer used by the search.
///
/// Per-configuration counts of each (node, blanket) pair are computed once
/// from the data; node scores are memoised by (node, blanket, local
/// contexts with their common neighbours) in an LRU cache. Safe to share
/// across threads.
pub struct Scorer<'a> {
    dataset: &'a Dataset,
    alpha: f64,
    config_counts: Mutex<LruCache<ConfigKey, Arc<Vec<u32>>>>,
    node_scores: Mutex<LruCache<NodeKey, f64>>,
}

impl<'a> Scorer<'a> {
    pub const DEFAULT_CAPACITY: usize = 1 << 16;

    pub fn new(dataset: &'a Dataset, alpha: f64) -> Self {
        Self::with_capacity(dataset, alpha, Self::DEFAULT_CAPACITY)
    }

    pub fn with_capacity(dataset: &'a Dataset, alpha: f64, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("nonzero");
        let count_cap = NonZeroUsize::new((capacity / 16).max(64)).expect("nonzero");
        Self {
            dataset,
            alpha,
            config_counts: Mutex::new(LruCache::new(count_cap)),
            node_scores: Mutex::new(LruCache::new(cap)),
        }
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn counts_for(&self, j: usize, blanket: &[usize], strides: &[usize], size: usize) -> Arc<Vec<u32>> {
        let key = (j, blanket.to_vec());
        if let Some(c) = self.config_counts.lock().expect("poisoned").get(&key) {
            return Arc::clone(c);
        }
        let r = self.dataset.cardinalities()[j];
        let mut table = vec![0u32; size * r];
        for row in self.dataset.rows() {
            let idx: usize = blanket.iter().zip(strides).map(|(&b, &s)| row[b] as usize * s).sum();
            table[idx * r + row[j] as usize] += 1;
        }
        let table = Arc::new(table);
        self.config_counts
            .lock()
            .expect("poisoned")
            .put(key, Arc::clone(&table));
        table
    }

    /// Local log-MPL of node `j` under `s`.
    pub fn node_score(&self, s: &ContextualStructure, j: usize) -> Result<f64> {
        let blanket = s.graph().neighbors(j);
        let local: Vec<(usize, Vec<usize>, Vec<Vec<u32>>)> = s
            .local_contexts(j)
            .into_iter()
            .map(|(i, c)| (i, c.cn.clone(), c.elements.iter().cloned().collect()))
            .collect();
        let key = (j, blanket, local);
        if let Some(&v) = self.node_scores.lock().expect("poisoned").get(&key) {
            return Ok(v);
        }
        let p = build_blanket_partition(s, j)?;
        let r = s.cardinalities()[j];
        let table = self.counts_for(j, p.blanket(), p.radix().strides(), p.radix().len());
        let v = local_log_mpl(&aggregate(&p, r, &table), self.alpha);
        self.node_scores.lock().expect("poisoned").put(key, v);
        Ok(v)
    }

    pub fn node_scores(&self, s: &ContextualStructure) -> Result<Vec<f64>> {
        (0..s.d()).map(|j| self.node_score(s, j)).collect()
    }
}
