//! Log-linear parameterisation of contextual structures and its
//! maximum-likelihood fit.

mod constraints;
mod fit;
mod loglinear;

pub use constraints::{
    constraint_system, model_dimension, nominal_restrictions, ConstraintSystem, Equation, Term,
};
pub use fit::{fit_mle, FitOptions, FitResult, Objective};
pub use loglinear::{complete_subsets, log_sum_exp, LogLinearJson, LogLinearModel, PhiTerm};
