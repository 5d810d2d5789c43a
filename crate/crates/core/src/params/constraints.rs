use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::loglinear::LogLinearModel;
use crate::error::{Error, Result};
use crate::model::ContextualStructure;
use crate::radix::Radix;

/// One φ-term of a restriction: `φ_A(x_A)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub subset: Vec<usize>,
    pub x: Vec<u32>,
}

/// `Σ terms = 0`; every coefficient is +1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Equation {
    /// Edge `{i, j}` and context element that produced the equation.
    pub edge: (usize, usize),
    pub element: Vec<u32>,
    pub terms: Vec<Term>,
}

/// Linear restrictions imposed on the φ-terms by the edge contexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub equations: Vec<Equation>,
    /// Column indices (into the model's φ vector) of each equation.
    pub rows: Vec<Vec<usize>>,
    pub rank: usize,
    pub nominal_dimension: usize,
}

impl ConstraintSystem {
    /// Exact reduced row echelon form of the coefficient matrix and its
    /// pivot columns.
    fn rref(&self) -> (Vec<Vec<BigRational>>, Vec<usize>) {
        let ncols = self.nominal_dimension;
        let mut m: Vec<Vec<BigRational>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![BigRational::zero(); ncols];
                for &c in r {
                    row[c] += BigRational::one();
                }
                row
            })
            .collect();
        let mut pivots = Vec::new();
        let mut lead = 0;
        for col in 0..ncols {
            if lead == m.len() {
                break;
            }
            let Some(p) = (lead..m.len()).find(|&r| !m[r][col].is_zero()) else {
                continue;
            };
            m.swap(lead, p);
            let inv = m[lead][col].recip();
            for v in m[lead].iter_mut() {
                *v *= &inv;
            }
            let pivot_row = m[lead].clone();
            for (r, row) in m.iter_mut().enumerate() {
                if r != lead && !row[col].is_zero() {
                    let f = row[col].clone();
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        if !pv.is_zero() {
                            *v -= &f * pv;
                        }
                    }
                }
            }
            pivots.push(col);
            lead += 1;
        }
        m.truncate(lead);
        (m, pivots)
    }

    /// Orthonormal basis (columns) of the null space of the restrictions.
    pub fn null_space_basis(&self) -> DMatrix<f64> {
        let n = self.nominal_dimension;
        if self.rows.is_empty() {
            return DMatrix::identity(n, n);
        }
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        let mut basis = DMatrix::<f64>::zeros(n, free.len());
        for (k, &f) in free.iter().enumerate() {
            basis[(f, k)] = 1.0;
            for (row, &p) in r.iter().zip(&pivots) {
                let v = &row[f];
                if !v.is_zero() {
                    basis[(p, k)] = -to_f64(v);
                }
            }
        }
        if free.is_empty() {
            return basis;
        }
        // Gram–Schmidt twice for numerical orthogonality
        let mut q = basis;
        for _ in 0..2 {
            for k in 0..q.ncols() {
                for prev in 0..k {
                    let dot = q.column(prev).dot(&q.column(k));
                    let p = q.column(prev).clone_owned();
                    q.column_mut(k).axpy(-dot, &p, 1.0);
                }
                let norm = q.column(k).norm();
                q.column_mut(k).scale_mut(1.0 / norm);
            }
        }
        q
    }

    /// Largest absolute residual of the restrictions at `phi`.
    pub fn max_residual(&self, phi: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&c| phi[c]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

fn to_f64(v: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    let s = if v.is_negative() { -1.0 } else { 1.0 };
    let a = v.abs();
    s * (a.numer().to_f64().unwrap_or(f64::NAN) / a.denom().to_f64().unwrap_or(f64::NAN))
}

/// For each edge `{i, j}`, each `x_cn ∈ 𝒞(i, j)` and each non-zero pair
/// `(x'_i, x'_j)`: `Σ_{A ⊆ cn(i,j)} φ_{A∪{i,j}}(x_A, x'_i, x'_j) = 0`, where
/// terms with a zero coordinate or a non-complete index set vanish.
pub fn constraint_system(s: &ContextualStructure) -> Result<ConstraintSystem> {
    s.validate().into_result()?;
    let model = LogLinearModel::zeros(s.clone())?;
    let cards = s.cardinalities();
    let g = s.graph();
    let mut equations = Vec::new();
    let mut rows = Vec::new();
    for ((i, j), ctx) in s.contexts() {
        let cn = &ctx.cn;
        let pair = Radix::new(&[cards[i] - 1, cards[j] - 1], usize::MAX)?;
        for element in &ctx.elements {
            // nodes of cn whose context value is non-zero; other A vanish
            let usable: Vec<usize> = (0..cn.len()).filter(|&k| element[k] != 0).collect();
            for xij in pair.configs() {
                let (xi, xj) = (xij[0] + 1, xij[1] + 1);
                let mut terms = Vec::new();
                let mut cols = Vec::new();
                for mask in 0u64..(1u64 << usable.len()) {
                    let mut subset = vec![i, j];
                    for (b, &k) in usable.iter().enumerate() {
                        if mask >> b & 1 == 1 {
                            subset.push(cn[k]);
                        }
                    }
                    subset.sort_unstable();
                    if !g.is_complete(&subset) {
                        continue;
                    }
                    let x: Vec<u32> = subset
                        .iter()
                        .map(|&v| {
                            if v == i {
                                xi
                            } else if v == j {
                                xj
                            } else {
                                element[cn.binary_search(&v).expect("cn member")]
                            }
                        })
                        .collect();
                    let col = model
                        .index_of(&subset, &x)
                        .ok_or_else(|| Error::structure(format!("φ_{subset:?}({x:?}) missing from support")))?;
                    cols.push(col);
                    terms.push(Term { subset, x });
                }
                equations.push(Equation {
                    edge: (i, j),
                    element: element.clone(),
                    terms,
                });
                rows.push(cols);
            }
        }
    }
    let mut sys = ConstraintSystem {
        equations,
        rows,
        rank: 0,
        nominal_dimension: model.nominal_dimension(),
    };
    sys.rank = if sys.rows.is_empty() { 0 } else { sys.rref().1.len() };
    Ok(sys)
}

/// Free-parameter count: complete-subset coordinates minus the rank of the
/// context restrictions.
pub fn model_dimension(s: &ContextualStructure) -> Result<usize> {
    let sys = constraint_system(s)?;
    Ok(sys.nominal_dimension - sys.rank)
}

/// `Σ |𝒞(i,j)| (r_i − 1)(r_j − 1)`, the restriction count the prior charges.
pub fn nominal_restrictions(s: &ContextualStructure) -> usize {
    let cards = s.cardinalities();
    s.contexts()
        .map(|((i, j), c)| c.len() * (cards[i] - 1) * (cards[j] - 1))
        .sum()
}
