//! Maximum-likelihood fitting of the constrained log-linear model.
//!
//! The free parameters θ live in an orthonormal basis `B` of the null
//! space of the context restrictions, `φ = Bθ`, so every iterate satisfies
//! the restrictions. The log-likelihood
//! `ℓ(θ) = n [ Σ_x p̂(x) η_x − log Σ_x exp η_x ]`, `η = F B θ`, is concave;
//! it is maximised by damped Newton steps with a backtracking line search.

use nalgebra::{DMatrix, DVector};

use super::constraints::{constraint_system, ConstraintSystem};
use super::loglinear::{log_sum_exp, LogLinearModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ContextualStructure;
use crate::radix::Radix;
use crate::DEFAULT_TABLE_CAP;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop once the Euclidean norm of the gradient in θ falls below this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Mass spread uniformly over the empirical table before fitting
    /// (`None` disables it). Keeps the optimum finite when cells are empty.
    pub smoothing: Option<f64>,
    pub cap: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 500,
            smoothing: Some(1e-6),
            cap: DEFAULT_TABLE_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: LogLinearModel,
    /// Log-likelihood of the (unsmoothed) data under the fitted model.
    pub log_lik: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub constraints: ConstraintSystem,
}

/// The fitting objective in θ coordinates.
pub struct Objective {
    n: f64,
    target: Vec<f64>,
    counts: Vec<u64>,
    /// Active φ indices per cell (CSR).
    feat_ptr: Vec<usize>,
    feat_idx: Vec<u32>,
    basis: DMatrix<f64>,
    model: LogLinearModel,
    constraints: ConstraintSystem,
}

impl Objective {
    pub fn new(dataset: &Dataset, s: &ContextualStructure, options: &FitOptions) -> Result<Self> {
        if dataset.cardinalities() != s.cardinalities() {
            return Err(Error::ShapeMismatch(format!(
                "data has {} variables with cardinalities {:?}; structure has {} with {:?}",
                dataset.d(),
                dataset.cardinalities(),
                s.d(),
                s.cardinalities()
            )));
        }
        let radix = Radix::new(s.cardinalities(), options.cap)?;
        let counts = dataset.joint_counts(options.cap)?;
        let n = dataset.n() as f64;
        let cells = radix.len() as f64;
        let target: Vec<f64> = match options.smoothing {
            Some(eps) if eps > 0.0 => counts
                .iter()
                .map(|&c| (c as f64 / n + eps / cells) / (1.0 + eps))
                .collect(),
            _ => counts.iter().map(|&c| c as f64 / n).collect(),
        };

        let model = LogLinearModel::zeros(s.clone())?;
        let constraints = constraint_system(s)?;
        let basis = constraints.null_space_basis();

        let mut feat_ptr = Vec::with_capacity(radix.len() + 1);
        let mut feat_idx = Vec::new();
        feat_ptr.push(0);
        for x in radix.configs() {
            feat_idx.extend(model.active(&x).into_iter().map(|i| i as u32));
            feat_ptr.push(feat_idx.len());
        }
        Ok(Self {
            n,
            target,
            counts,
            feat_ptr,
            feat_idx,
            basis,
            model,
            constraints,
        })
    }

    /// Number of free parameters.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    fn features(&self, c: usize) -> &[u32] {
        &self.feat_idx[self.feat_ptr[c]..self.feat_ptr[c + 1]]
    }

    pub fn phi_of(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.basis * theta
    }

    fn logits(&self, phi: &DVector<f64>) -> Vec<f64> {
        (0..self.target.len())
            .map(|c| self.features(c).iter().map(|&i| phi[i as usize]).sum())
            .collect()
    }

    /// Model probabilities at θ and the objective value.
    fn evaluate(&self, theta: &DVector<f64>) -> (Vec<f64>, f64) {
        let eta = self.logits(&self.phi_of(theta));
        let lz = log_sum_exp(&eta);
        let p: Vec<f64> = eta.iter().map(|e| (e - lz).exp()).collect();
        let fit: f64 = self.target.iter().zip(&eta).map(|(t, e)| t * e).sum();
        (p, self.n * (fit - lz))
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        self.evaluate(theta).1
    }

    fn gradient_from(&self, p: &[f64]) -> DVector<f64> {
        let mut g_phi = DVector::<f64>::zeros(self.basis.nrows());
        for (c, (t, q)) in self.target.iter().zip(p).enumerate() {
            let diff = t - q;
            if diff != 0.0 {
                for &i in self.features(c) {
                    g_phi[i as usize] += diff;
                }
            }
        }
        self.basis.tr_mul(&g_phi) * self.n
    }

    /// Analytic gradient `n Bᵀ Fᵀ (p̂ − p_θ)`.
    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let (p, _) = self.evaluate(theta);
        self.gradient_from(&p)
    }

    /// Negative Hessian `n Bᵀ (Fᵀ diag(p) F − μ μᵀ) B`, `μ = Fᵀ p`.
    fn neg_hessian(&self, p: &[f64]) -> DMatrix<f64> {
        let dim = self.basis.nrows();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let mut mu = DVector::<f64>::zeros(dim);
        for (c, &pc) in p.iter().enumerate() {
            if pc == 0.0 {
                continue;
            }
            let f = self.features(c);
            for &a in f {
                mu[a as usize] += pc;
                for &b in f {
                    h[(a as usize, b as usize)] += pc;
                }
            }
        }
        h -= &mu * mu.transpose();
        let reduced = self.basis.tr_mul(&(h * &self.basis));
        reduced * self.n
    }

    fn log_lik_of(&self, p: &[f64]) -> f64 {
        self.counts
            .iter()
            .zip(p)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &q)| c as f64 * q.ln())
            .sum()
    }
}

/// Fit maximum-likelihood φ for `s` on `dataset`.
pub fn fit_mle(dataset: &Dataset, s: &ContextualStructure, options: &FitOptions) -> Result<FitResult> {
    let obj = Objective::new(dataset, s, options)?;
    let k = obj.dim();
    let mut theta = DVector::<f64>::zeros(k);
    let (mut p, mut value) = obj.evaluate(&theta);
    let mut grad = obj.gradient_from(&p);
    let mut iterations = 0;

    while grad.norm() >= options.tolerance {
        if iterations >= options.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: grad.norm(),
            });
        }
        iterations += 1;

        let h = obj.neg_hessian(&p);
        let scale = h.diagonal().amax().max(1e-300);
        let mut step = None;
        let mut lambda = 0.0f64;
        for _ in 0..60 {
            let mut m = h.clone();
            for i in 0..k {
                m[(i, i)] += lambda * scale;
            }
            if let Some(ch) = m.cholesky() {
                let dir = ch.solve(&grad);
                if dir.iter().all(|v| v.is_finite()) {
                    step = Some(dir);
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-12 } else { lambda * 10.0 };
        }
        let dir = step.unwrap_or_else(|| grad.clone() / scale);
        let slope = grad.dot(&dir);

        // below this predicted gain the objective cannot resolve the step
        let resolution = 1e-13 * value.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &dir * t;
            let (cp, cv) = obj.evaluate(&cand);
            let ok = if slope <= resolution {
                cv.is_finite() && cv >= value - resolution
            } else {
                cv.is_finite() && cv >= value + 1e-4 * t * slope
            };
            if ok {
                theta = cand;
                p = cp;
                value = cv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let new_grad = obj.gradient_from(&p);
        if !accepted {
            // no ascent possible at working precision
            if new_grad.norm() < options.tolerance {
                grad = new_grad;
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: new_grad.norm(),
            });
        }
        grad = new_grad;
    }

    let phi = obj.phi_of(&theta);
    let eta = obj.logits(&phi);
    let log_z = log_sum_exp(&eta);
    let log_lik = obj.log_lik_of(&p);
    let model = LogLinearModel::from_raw(obj.model.structure().clone(), phi.iter().cloned().collect(), log_z)?;
    Ok(FitResult {
        model,
        log_lik,
        gradient_norm: grad.norm(),
        iterations,
        constraints: obj.constraints,
    })
}
