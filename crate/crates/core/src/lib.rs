//! Structure learning for contextual Markov networks (CMNs).
//!
//! A CMN is an undirected graphical model over discrete variables whose
//! edges may carry *contexts*: configurations of the edge's common
//! neighbours under which the direct dependence between the two endpoints
//! vanishes. This crate scores such structures with the marginal
//! pseudo-likelihood (MPL), searches for high-scoring structures with a
//! nested hill climb, fits constrained log-linear parameters by maximum
//! likelihood, and evaluates the results.
//!
//! Module map:
//!
//! - [`data`]: categorical datasets, CSV ingestion, folds, exact sampling.
//! - [`model`]: graphs, edge contexts, Markov-blanket partitions.
//! - [`scoring`]: MPL, context prior, BIC.
//! - [`search`]: graph and context hill climbs, the kappa sweep.
//! - [`params`]: log-linear parameterisation, constraints, MLE fitting.
//! - [`eval`]: KL divergence, cross-validation, reports.
//! - [`cli`]: the `cmnet` command-line front end.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod params;
pub mod radix;
pub mod scoring;
pub mod search;

pub use data::{Dataset, FoldPlan, JointTable, Schema};
pub use error::{Error, Result};
pub use eval::{CvResult, ExperimentReport};
pub use model::{BlanketPartition, ContextualStructure, EdgeContext, UndirectedGraph};
pub use params::{ConstraintSystem, FitOptions, LogLinearModel};
pub use scoring::{ClassCounts, Kappa, ScoreConfig, ScoredModel};
pub use search::{KappaSweep, SearchOptions};

/// Default cap on the number of cells of any dense joint table.
pub const DEFAULT_TABLE_CAP: usize = 1 << 22;
