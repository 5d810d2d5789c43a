use serde::{Deserialize, Serialize};

use crate::data::JointTable;
use crate::error::{Error, Result};
use crate::model::{ContextualStructure, StructureJson, UndirectedGraph};
use crate::radix::Radix;

/// Every non-empty complete subset of `g`, ordered by size and then
/// lexicographically.
pub fn complete_subsets(g: &UndirectedGraph) -> Vec<Vec<usize>> {
    fn extend(g: &UndirectedGraph, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(current.clone());
        let last = *current.last().expect("non-empty");
        for w in last + 1..g.d() {
            if current.iter().all(|&u| g.has_edge(u, w)) {
                current.push(w);
                extend(g, current, out);
                current.pop();
            }
        }
    }
    let mut out = Vec::new();
    for v in 0..g.d() {
        extend(g, &mut vec![v], &mut out);
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Log-linear parameterisation of a contextual structure.
///
/// Only φ-terms over complete subsets of the graph with every coordinate
/// non-zero are stored; all others are identically zero. `φ_∅` is carried
/// as `-log_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearModel {
    structure: ContextualStructure,
    support: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    phi: Vec<f64>,
    log_z: f64,
}

impl LogLinearModel {
    /// All φ equal to zero, i.e. the uniform distribution.
    pub fn zeros(structure: ContextualStructure) -> Result<Self> {
        let support = complete_subsets(structure.graph());
        let cards = structure.cardinalities();
        let mut offsets = Vec::with_capacity(support.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for a in &support {
            let block = a
                .iter()
                .try_fold(1usize, |p, &k| p.checked_mul(cards[k] - 1))
                .ok_or_else(|| Error::invalid("parameter count overflows"))?;
            acc = acc
                .checked_add(block)
                .ok_or_else(|| Error::invalid("parameter count overflows"))?;
            offsets.push(acc);
        }
        let log_z = structure
            .cardinalities()
            .iter()
            .map(|&r| (r as f64).ln())
            .sum();
        Ok(Self {
            structure,
            support,
            offsets,
            phi: vec![0.0; acc],
            log_z,
        })
    }

    pub fn structure(&self) -> &ContextualStructure {
        &self.structure
    }

    pub fn cardinalities(&self) -> &[usize] {
        self.structure.cardinalities()
    }

    pub fn support(&self) -> &[Vec<usize>] {
        &self.support
    }

    /// Number of stored φ coordinates before context restrictions.
    pub fn nominal_dimension(&self) -> usize {
        self.phi.len()
    }

    pub fn phi_vector(&self) -> &[f64] {
        &self.phi
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    fn block_radix(&self, a: &[usize]) -> Radix {
        let cards = self.cardinalities();
        let dims: Vec<usize> = a.iter().map(|&k| cards[k] - 1).collect();
        Radix::new(&dims, usize::MAX).expect("no cap")
    }

    /// Flat index of `φ_A(x_A)`, or `None` when the term is identically zero.
    pub fn index_of(&self, a: &[usize], x: &[u32]) -> Option<usize> {
        if a.len() != x.len() || x.contains(&0) {
            return None;
        }
        let pos = self.support.binary_search_by(|s| s.len().cmp(&a.len()).then_with(|| s.as_slice().cmp(a)));
        let pos = pos.ok()?;
        let cards = self.cardinalities();
        if a.iter().zip(x).any(|(&k, &v)| v as usize >= cards[k]) {
            return None;
        }
        let shifted: Vec<u32> = x.iter().map(|v| v - 1).collect();
        Some(self.offsets[pos] + self.block_radix(a).index(&shifted))
    }

    pub fn phi(&self, a: &[usize], x: &[u32]) -> f64 {
        self.index_of(a, x).map_or(0.0, |i| self.phi[i])
    }

    /// `(A, x_A, index)` for every stored coordinate, in storage order.
    pub fn coordinates(&self) -> Vec<(Vec<usize>, Vec<u32>)> {
        let mut out = Vec::with_capacity(self.phi.len());
        for a in &self.support {
            let r = self.block_radix(a);
            for local in r.configs() {
                out.push((a.clone(), local.iter().map(|v| v + 1).collect()));
            }
        }
        out
    }

    /// Indices of the coordinates active (non-zero feature) at the joint
    /// configuration `x`.
    pub fn active(&self, x: &[u32]) -> Vec<usize> {
        let mut out = Vec::new();
        for (s, a) in self.support.iter().enumerate() {
            if a.iter().all(|&k| x[k] > 0) {
                let shifted: Vec<u32> = a.iter().map(|&k| x[k] - 1).collect();
                out.push(self.offsets[s] + self.block_radix(a).index(&shifted));
            }
        }
        out
    }

    /// Replace φ and recompute the normaliser.
    pub fn set_phi(&mut self, phi: Vec<f64>, cap: usize) -> Result<()> {
        if phi.len() != self.phi.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters given, model has {}",
                phi.len(),
                self.phi.len()
            )));
        }
        self.phi = phi;
        self.log_z = log_sum_exp(&self.unnormalized_log_probs(cap)?);
        Ok(())
    }

    pub fn set_phi_term(&mut self, a: &[usize], x: &[u32], value: f64, cap: usize) -> Result<()> {
        let i = self
            .index_of(a, x)
            .ok_or_else(|| Error::invalid(format!("φ_{a:?}({x:?}) is not a free coordinate of this model")))?;
        let mut phi = self.phi.clone();
        phi[i] = value;
        self.set_phi(phi, cap)
    }

    fn unnormalized_log_probs(&self, cap: usize) -> Result<Vec<f64>> {
        let radix = Radix::new(self.cardinalities(), cap)?;
        Ok(radix
            .configs()
            .map(|x| self.active(&x).iter().map(|&i| self.phi[i]).sum())
            .collect())
    }

    /// `log p(x)`.
    pub fn log_prob(&self, x: &[u32]) -> f64 {
        self.active(x).iter().map(|&i| self.phi[i]).sum::<f64>() - self.log_z
    }

    /// The full joint distribution.
    pub fn joint_of(&self, cap: usize) -> Result<JointTable> {
        let logits = self.unnormalized_log_probs(cap)?;
        let lz = log_sum_exp(&logits);
        let probs: Vec<f64> = logits.iter().map(|l| (l - lz).exp()).collect();
        let total: f64 = probs.iter().sum();
        JointTable::new(
            self.cardinalities().to_vec(),
            probs.iter().map(|p| p / total).collect(),
            cap,
        )
    }

    pub(crate) fn from_raw(structure: ContextualStructure, phi: Vec<f64>, log_z: f64) -> Result<Self> {
        let mut m = Self::zeros(structure)?;
        if phi.len() != m.phi.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters given, model has {}",
                phi.len(),
                m.phi.len()
            )));
        }
        m.phi = phi;
        m.log_z = log_z;
        Ok(m)
    }

    pub fn to_json(&self) -> LogLinearJson {
        LogLinearJson {
            phi: self
                .coordinates()
                .into_iter()
                .zip(&self.phi)
                .map(|((a, x), &value)| PhiTerm { a, x, value })
                .collect(),
            log_z: self.log_z,
        }
    }

    pub fn from_json(structure: &StructureJson, params: &LogLinearJson) -> Result<Self> {
        let s = ContextualStructure::from_json(structure)?;
        let mut m = Self::zeros(s)?;
        for t in &params.phi {
            let i = m
                .index_of(&t.a, &t.x)
                .ok_or_else(|| Error::invalid(format!("φ_{:?}({:?}) is not a coordinate of this structure", t.a, t.x)))?;
            m.phi[i] = t.value;
        }
        m.log_z = params.log_z;
        Ok(m)
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiTerm {
    #[serde(rename = "A")]
    pub a: Vec<usize>,
    pub x: Vec<u32>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLinearJson {
    pub phi: Vec<PhiTerm>,
    #[serde(rename = "logZ")]
    pub log_z: f64,
}
