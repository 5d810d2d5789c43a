//! Model-quality metrics and experiment reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldPlan, JointTable};
use crate::error::{Error, Result};
use crate::params::{nominal_restrictions, FitOptions};
use crate::scoring::{KappaSpec, ScoredModel};
use crate::search::{kappa_sweep, KappaSweep, SearchOptions};

/// `Σ p(x) ln(p(x)/q(x))`. Returns `f64::INFINITY` when `q` vanishes where
/// `p` does not.
pub fn kl_divergence(p: &JointTable, q: &JointTable) -> Result<f64> {
    if p.cardinalities() != q.cardinalities() {
        return Err(Error::ShapeMismatch(format!(
            "tables over cardinalities {:?} and {:?}",
            p.cardinalities(),
            q.cardinalities()
        )));
    }
    let mut kl = 0.0;
    for (&a, &b) in p.probabilities().iter().zip(q.probabilities()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += a * (a / b).ln();
    }
    // rounding can push an exact zero slightly negative
    Ok(kl.max(0.0))
}

/// Everything needed to learn a model from a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub grid: Vec<KappaSpec>,
    pub alpha: f64,
    pub search: SearchOptions,
    pub fit: FitOptions,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            grid: KappaSpec::default_grid(),
            alpha: 0.5,
            search: SearchOptions::default(),
            fit: FitOptions::default(),
        }
    }
}

impl LearnConfig {
    pub fn sweep(&self, dataset: &Dataset) -> Result<KappaSweep> {
        kappa_sweep(dataset, &self.grid, self.alpha, &self.search, &self.fit)
    }
}

/// Mean held-out log-probability per test row, per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: usize,
    pub seed: u64,
    /// Selected (BIC-best) model.
    pub cmn: Vec<f64>,
    /// The `κ = ε` model.
    pub mn: Vec<f64>,
    pub cmn_mean: f64,
    pub mn_mean: f64,
}

fn mean_test_log_prob(sm: &ScoredModel, test: &Dataset) -> Result<f64> {
    let m = sm.model.as_ref().ok_or(Error::Unfitted)?;
    let total: f64 = test.rows().map(|x| m.log_prob(x)).sum();
    Ok(total / test.n() as f64)
}

/// Learn on each fold's complement and score the fold.
pub fn cross_validated_accuracy(dataset: &Dataset, folds: &FoldPlan, config: &LearnConfig) -> Result<CvResult> {
    if folds.n() != dataset.n() {
        return Err(Error::ShapeMismatch(format!(
            "fold plan covers {} rows, dataset has {}",
            folds.n(),
            dataset.n()
        )));
    }
    let per_fold: Vec<Result<(f64, f64)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train = dataset.select_rows(&folds.train_rows(f))?;
            let test = dataset.select_rows(&folds.test_rows(f))?;
            let sweep = config.sweep(&train)?;
            Ok((
                mean_test_log_prob(sweep.selected(), &test)?,
                mean_test_log_prob(sweep.mn(), &test)?,
            ))
        })
        .collect();
    let mut cmn = Vec::with_capacity(folds.k);
    let mut mn = Vec::with_capacity(folds.k);
    for r in per_fold {
        let (c, m) = r?;
        cmn.push(c);
        mn.push(m);
    }
    let k = folds.k as f64;
    Ok(CvResult {
        folds: folds.k,
        seed: folds.seed,
        cmn_mean: cmn.iter().sum::<f64>() / k,
        mn_mean: mn.iter().sum::<f64>() / k,
        cmn,
        mn,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub kappa: String,
    pub log_mpl: f64,
    pub log_prior: f64,
    pub log_lik: f64,
    pub bic: f64,
    pub sbic: f64,
    /// Present only when a true distribution was supplied; `null` in JSON
    /// when infinite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl: Option<f64>,
    pub edges: usize,
    pub parameters: usize,
    pub nominal_restrictions: usize,
    pub context_elements: usize,
    pub bic_winner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub rows: Vec<ReportRow>,
}

/// Tabulate labelled models. The row with the highest BIC is marked (the
/// first one on ties).
pub fn experiment_report(
    n: usize,
    models: &[(String, &ScoredModel)],
    truth: Option<&JointTable>,
    cap: usize,
) -> Result<ExperimentReport> {
    let mut winner = None;
    for (k, (_, m)) in models.iter().enumerate() {
        if winner.is_none_or(|w: usize| m.bic > models[w].1.bic) {
            winner = Some(k);
        }
    }
    let mut rows = Vec::with_capacity(models.len());
    for (k, (label, m)) in models.iter().enumerate() {
        let kl = match truth {
            Some(t) => {
                let fitted = m.model.as_ref().ok_or(Error::Unfitted)?;
                Some(kl_divergence(t, &fitted.joint_of(cap)?)?)
            }
            None => None,
        };
        rows.push(ReportRow {
            label: label.clone(),
            kappa: m.kappa.to_string(),
            log_mpl: m.log_mpl,
            log_prior: m.log_prior,
            log_lik: m.log_lik,
            bic: m.bic,
            sbic: m.sbic,
            kl,
            edges: m.structure.graph().edge_count(),
            parameters: m.dimension,
            nominal_restrictions: nominal_restrictions(&m.structure),
            context_elements: m.structure.context_element_count(),
            bic_winner: winner == Some(k),
        });
    }
    Ok(ExperimentReport { n, rows })
}

impl ExperimentReport {
    /// Report for every model of a sweep; grid models are labelled by
    /// kappa, the ε model additionally as `MN`.
    pub fn from_sweep(n: usize, sweep: &KappaSweep, truth: Option<&JointTable>, cap: usize) -> Result<Self> {
        let labelled: Vec<(String, &ScoredModel)> = sweep
            .models
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let label = if k == sweep.mn { "MN".to_string() } else { format!("CMN κ={:.3}", m.kappa) };
                (label, m)
            })
            .collect();
        let grid = &labelled[..sweep.grid_len];
        let mut report = experiment_report(n, grid, truth, cap)?;
        if sweep.mn >= sweep.grid_len {
            let extra = experiment_report(n, &labelled[sweep.mn..], truth, cap)?;
            report.rows.extend(extra.rows.into_iter().map(|r| ReportRow { bic_winner: false, ..r }));
        }
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let with_kl = self.rows.iter().any(|r| r.kl.is_some());
        let label_w = self.rows.iter().map(|r| r.label.chars().count()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}  {:>12}  {:>10}", "model", "kappa", "sBIC");
        if with_kl {
            let _ = write!(out, "  {:>10}", "KL");
        }
        let _ = writeln!(out, "  {:>5}  {:>6}  {:>8}  {:>4}", "edges", "params", "contexts", "best");
        for r in &self.rows {
            let kappa = match r.kappa.parse::<f64>() {
                Ok(v) => format!("{v:.3e}"),
                Err(_) => r.kappa.clone(),
            };
            let _ = write!(out, "{:<label_w$}  {:>12}  {:>10.4}", r.label, kappa, r.sbic);
            if with_kl {
                match r.kl {
                    Some(v) => {
                        let _ = write!(out, "  {v:>10.4}");
                    }
                    None => {
                        let _ = write!(out, "  {:>10}", "-");
                    }
                }
            }
            let _ = writeln!(
                out,
                "  {:>5}  {:>6}  {:>8}  {:>4}",
                r.edges,
                r.parameters,
                r.context_elements,
                if r.bic_winner { "*" } else { "" }
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_folds, sample_joint};
    use crate::DEFAULT_TABLE_CAP as CAP;
    use approx::assert_abs_diff_eq;

    fn table(p: &[f64]) -> JointTable {
        JointTable::new(vec![p.len()], p.to_vec(), CAP).unwrap()
    }

    #[test]
    fn kl_examples() {
        let p = table(&[0.75, 0.25]);
        let q = table(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl_divergence(&p, &q).unwrap(),
            0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(kl_divergence(&p, &q).unwrap(), 0.1308123, epsilon = 1e-6);
        assert_eq!(kl_divergence(&p, &table(&[1.0, 0.0])).unwrap(), f64::INFINITY);
        assert_abs_diff_eq!(kl_divergence(&table(&[1.0, 0.0]), &p).unwrap(), (1.0f64 / 0.75).ln(), epsilon = 1e-15);
        assert!(kl_divergence(&p, &table(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn point_mass_cv_near_zero() {
        let ds = Dataset::from_rows(&vec![vec![1, 0]; 40]).unwrap();
        let folds = make_folds(40, 4, 0).unwrap();
        let cv = cross_validated_accuracy(&ds, &folds, &LearnConfig::default()).unwrap();
        assert!(cv.cmn_mean.abs() < 1e-4, "{}", cv.cmn_mean);
        assert_eq!(cv.cmn.len(), 4);
    }

    #[test]
    fn uniform_cv_entropy() {
        let t = JointTable::uniform(vec![2, 2], CAP).unwrap();
        let ds = sample_joint(&t, 4000, 2, CAP).unwrap();
        let folds = make_folds(4000, 10, 7).unwrap();
        let cv = cross_validated_accuracy(&ds, &folds, &LearnConfig::default()).unwrap();
        assert_abs_diff_eq!(cv.mn_mean, 2.0 * 0.5f64.ln(), epsilon = 0.01);
    }

    #[test]
    fn report_rows_and_winner() {
        let t = JointTable::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4], CAP).unwrap();
        let ds = sample_joint(&t, 500, 1, CAP).unwrap();
        let sweep = LearnConfig::default().sweep(&ds).unwrap();
        let r = ExperimentReport::from_sweep(ds.n(), &sweep, None, CAP).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows.iter().filter(|r| r.bic_winner).count(), 1);
        assert!(r.rows.iter().all(|r| r.kl.is_none()));
        assert!(!r.to_json().unwrap().contains("\"kl\""));
        let with_truth = ExperimentReport::from_sweep(ds.n(), &sweep, Some(&t), CAP).unwrap();
        assert!(with_truth.rows.iter().all(|r| r.kl.unwrap() >= 0.0));
        assert!(with_truth.to_text().contains("KL"));
        assert!(r.rows[1].label.starts_with("CMN κ=2.000e-3"), "{}", r.rows[1].label);
        assert_eq!(r.rows[1].kappa, "0.002");
    }
}
