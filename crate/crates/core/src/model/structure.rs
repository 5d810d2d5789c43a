use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::graph::UndirectedGraph;
use crate::error::{Error, Result};
use crate::radix;

/// Configurations of `cn(i, j)` under which the edge `{i, j}` is cut.
///
/// Coordinates of every element follow the ascending order of `cn`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct EdgeContext {
    pub cn: Vec<usize>,
    pub elements: BTreeSet<Vec<u32>>,
}

impl EdgeContext {
    pub fn new(cn: Vec<usize>) -> Self {
        Self {
            cn,
            elements: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// One failed invariant of a [`ContextualStructure`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub edge: (usize, usize),
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::structure(format!(
                "edge ({}, {}): {}",
                v.edge.0, v.edge.1, v.message
            ))),
        }
    }
}

/// A graph together with its edge contexts. Edges without an entry in
/// `contexts` have the empty context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextualStructure {
    cardinalities: Vec<usize>,
    graph: UndirectedGraph,
    contexts: BTreeMap<(usize, usize), EdgeContext>,
}

fn canonical(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl ContextualStructure {
    pub fn new(graph: UndirectedGraph, cardinalities: Vec<usize>) -> Result<Self> {
        if graph.d() != cardinalities.len() {
            return Err(Error::ShapeMismatch(format!(
                "graph has {} nodes but {} cardinalities were given",
                graph.d(),
                cardinalities.len()
            )));
        }
        if let Some(j) = cardinalities.iter().position(|&r| r < 2) {
            return Err(Error::invalid(format!("variable {j} has cardinality below 2")));
        }
        Ok(Self {
            cardinalities,
            graph,
            contexts: BTreeMap::new(),
        })
    }

    pub fn empty(cardinalities: Vec<usize>) -> Result<Self> {
        Self::new(UndirectedGraph::empty(cardinalities.len()), cardinalities)
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn d(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn context(&self, i: usize, j: usize) -> Option<&EdgeContext> {
        self.contexts.get(&canonical(i, j))
    }

    /// Non-empty contexts keyed by canonical edge.
    pub fn contexts(&self) -> impl Iterator<Item = ((usize, usize), &EdgeContext)> {
        self.contexts.iter().map(|(&e, c)| (e, c))
    }

    pub fn context_element_count(&self) -> usize {
        self.contexts.values().map(EdgeContext::len).sum()
    }

    /// Non-empty contexts of the edges incident to `j`, ordered by the
    /// neighbour index.
    pub fn local_contexts(&self, j: usize) -> Vec<(usize, &EdgeContext)> {
        self.graph
            .neighbors(j)
            .into_iter()
            .filter_map(|i| self.context(i, j).map(|c| (i, c)))
            .collect()
    }

    /// Size of the outcome space of `cn(i, j)` in the current graph.
    pub fn cn_space(&self, i: usize, j: usize) -> usize {
        self.graph
            .common_neighbors(i, j)
            .iter()
            .map(|&k| self.cardinalities[k])
            .product()
    }

    /// Add one element to the context of `{i, j}`. Returns `false` when it
    /// was already present. Rejects elements that would make the context
    /// cover all of `𝒳_cn(i,j)`.
    pub fn add_context_element(&mut self, i: usize, j: usize, element: Vec<u32>) -> Result<bool> {
        let key = canonical(i, j);
        if !self.graph.has_edge(i, j) {
            return Err(Error::structure(format!("no edge ({}, {})", key.0, key.1)));
        }
        let cn = self.graph.common_neighbors(i, j);
        self.check_element(key, &cn, &element)?;
        let space = self.cn_space(i, j);
        let ctx = self
            .contexts
            .entry(key)
            .or_insert_with(|| EdgeContext::new(cn.clone()));
        if ctx.cn != cn {
            return Err(Error::structure(format!(
                "context of ({}, {}) is over stale common neighbours {:?}; current are {:?}",
                key.0, key.1, ctx.cn, cn
            )));
        }
        if ctx.elements.contains(&element) {
            return Ok(false);
        }
        if ctx.elements.len() + 1 >= space {
            if ctx.elements.is_empty() {
                self.contexts.remove(&key);
            }
            return Err(Error::structure(format!(
                "context of ({}, {}) would cover the whole common-neighbour space",
                key.0, key.1
            )));
        }
        ctx.elements.insert(element);
        Ok(true)
    }

    pub fn remove_context_element(&mut self, i: usize, j: usize, element: &[u32]) -> bool {
        let key = canonical(i, j);
        let Some(ctx) = self.contexts.get_mut(&key) else {
            return false;
        };
        let removed = ctx.elements.remove(element);
        if ctx.elements.is_empty() {
            self.contexts.remove(&key);
        }
        removed
    }

    /// Builder form of [`add_context_element`](Self::add_context_element).
    pub fn with_context(mut self, i: usize, j: usize, elements: &[&[u32]]) -> Result<Self> {
        for e in elements {
            self.add_context_element(i, j, e.to_vec())?;
        }
        Ok(self)
    }

    pub fn clear_contexts(&mut self) {
        self.contexts.clear();
    }

    /// Flip edge `{i, j}` and drop every context whose edge disappeared or
    /// whose common-neighbour set changed.
    pub fn toggle_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if self.graph.has_edge(i, j) {
            self.graph.remove_edge(i, j)?;
        } else {
            self.graph.add_edge(i, j)?;
        }
        let graph = &self.graph;
        self.contexts
            .retain(|&(a, b), ctx| graph.has_edge(a, b) && graph.common_neighbors(a, b) == ctx.cn);
        Ok(())
    }

    fn check_element(&self, edge: (usize, usize), cn: &[usize], element: &[u32]) -> Result<()> {
        if element.len() != cn.len() {
            return Err(Error::structure(format!(
                "context element {element:?} of ({}, {}) has {} coordinates; cn has {}",
                edge.0,
                edge.1,
                element.len(),
                cn.len()
            )));
        }
        for (&k, &v) in cn.iter().zip(element) {
            if v as usize >= self.cardinalities[k] {
                return Err(Error::structure(format!(
                    "context element {element:?} of ({}, {}) has value {v} for node {k} of cardinality {}",
                    edge.0, edge.1, self.cardinalities[k]
                )));
            }
        }
        Ok(())
    }

    /// Check every context invariant, including regularity. Maximality is
    /// not checked.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (&edge, ctx) in &self.contexts {
            let (i, j) = edge;
            let mut push = |message: String| violations.push(Violation { edge, message });
            if !self.graph.has_edge(i, j) {
                push("context on an edge that is not in the graph".into());
                continue;
            }
            let cn = self.graph.common_neighbors(i, j);
            if cn != ctx.cn {
                push(format!(
                    "context is over {:?} but the common neighbours are {:?}",
                    ctx.cn, cn
                ));
                continue;
            }
            if cn.is_empty() && !ctx.elements.is_empty() {
                push("non-empty context on an edge without common neighbours".into());
                continue;
            }
            for e in &ctx.elements {
                if let Err(Error::Structure(m)) = self.check_element(edge, &cn, e) {
                    push(m);
                }
            }
            let space: usize = cn.iter().map(|&k| self.cardinalities[k]).product();
            if !cn.is_empty() && ctx.elements.len() >= space {
                push(format!(
                    "context has {} elements, covering the whole space of size {space} (not regular)",
                    ctx.elements.len()
                ));
            }
        }
        ValidationReport { violations }
    }

    /// Assemble from raw parts, checking shapes only. Use
    /// [`validate`](Self::validate) for the context invariants.
    pub fn from_parts(
        graph: UndirectedGraph,
        cardinalities: Vec<usize>,
        contexts: Vec<((usize, usize), EdgeContext)>,
    ) -> Result<Self> {
        let mut s = Self::new(graph, cardinalities)?;
        for ((i, j), ctx) in contexts {
            if i == j {
                return Err(Error::structure(format!("context on self-pair ({i}, {j})")));
            }
            if !ctx.elements.is_empty() {
                s.contexts.insert(canonical(i, j), ctx);
            }
        }
        Ok(s)
    }

    pub fn to_json(&self) -> StructureJson {
        StructureJson {
            d: self.d(),
            cardinalities: self.cardinalities.clone(),
            edges: self.graph.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            contexts: self
                .contexts
                .iter()
                .map(|(&(i, j), c)| ContextJson {
                    edge: [i, j],
                    cn: c.cn.clone(),
                    elements: c.elements.iter().cloned().collect(),
                })
                .collect(),
            variable_names: None,
        }
    }

    pub fn from_json(json: &StructureJson) -> Result<Self> {
        if json.d != json.cardinalities.len() {
            return Err(Error::ShapeMismatch(format!(
                "d = {} but {} cardinalities",
                json.d,
                json.cardinalities.len()
            )));
        }
        let edges: Vec<_> = json.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = UndirectedGraph::from_edges(json.d, &edges)?;
        let contexts = json
            .contexts
            .iter()
            .map(|c| {
                (
                    (c.edge[0], c.edge[1]),
                    EdgeContext {
                        cn: c.cn.clone(),
                        elements: c.elements.iter().cloned().collect(),
                    },
                )
            })
            .collect();
        Self::from_parts(graph, json.cardinalities.clone(), contexts)
    }

    /// Text rendering of the labelled graph, one line per edge:
    /// `i–j: {label,…}`. Nodes are printed one-based, or by name when
    /// `names` is given. A `*` in a label stands for every value of that
    /// common neighbour.
    pub fn render_labeled_graph(&self, names: Option<&[String]>) -> String {
        let label = |k: usize| match names {
            Some(n) => n[k].clone(),
            None => (k + 1).to_string(),
        };
        let mut out = String::new();
        for (i, j) in self.graph.edges() {
            let body = match self.context(i, j) {
                Some(ctx) => {
                    let cards: Vec<usize> = ctx.cn.iter().map(|&k| self.cardinalities[k]).collect();
                    let wide = cards.iter().any(|&r| r > 10);
                    compress_stars(&ctx.elements, &cards)
                        .iter()
                        .map(|p| format_pattern(p, wide))
                        .collect::<Vec<_>>()
                        .join(",")
                }
                None => String::new(),
            };
            let _ = writeln!(out, "{}–{}: {{{}}}", label(i), label(j), body);
        }
        out
    }
}

/// Replace groups of elements that differ only in one coordinate and cover
/// that coordinate's full range by a single starred pattern, until no such
/// group remains.
fn compress_stars(elements: &BTreeSet<Vec<u32>>, cards: &[usize]) -> Vec<Vec<Option<u32>>> {
    let mut patterns: BTreeSet<Vec<Option<u32>>> =
        elements.iter().map(|e| e.iter().map(|&v| Some(v)).collect()).collect();
    loop {
        let mut changed = false;
        'coords: for k in 0..cards.len() {
            let mut groups: BTreeMap<Vec<Option<u32>>, Vec<Vec<Option<u32>>>> = BTreeMap::new();
            for p in patterns.iter().filter(|p| p[k].is_some()) {
                let mut key = p.clone();
                key[k] = None;
                groups.entry(key).or_default().push(p.clone());
            }
            for (key, members) in groups {
                if members.len() == cards[k] {
                    for m in &members {
                        patterns.remove(m);
                    }
                    patterns.insert(key);
                    changed = true;
                    break 'coords;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out: Vec<_> = patterns.into_iter().collect();
    // digits before stars, position by position
    out.sort_by_key(|p| p.iter().map(|v| v.map_or(u32::MAX, |x| x)).collect::<Vec<_>>());
    out
}

fn format_pattern(p: &[Option<u32>], wide: bool) -> String {
    let parts: Vec<String> = p
        .iter()
        .map(|v| v.map_or_else(|| "*".to_string(), |x| x.to_string()))
        .collect();
    parts.join(if wide { "." } else { "" })
}

/// Persisted structure format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureJson {
    pub d: usize,
    pub cardinalities: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub contexts: Vec<ContextJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextJson {
    pub edge: [usize; 2],
    pub cn: Vec<usize>,
    pub elements: Vec<Vec<u32>>,
}

/// Size of `𝒳_S` for the nodes `s`.
pub fn space_size(cards: &[usize], s: &[usize]) -> u128 {
    radix::cells(&s.iter().map(|&k| cards[k]).collect::<Vec<_>>())
}
