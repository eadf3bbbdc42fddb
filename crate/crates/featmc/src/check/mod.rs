//! Numerical checker: probability and expected-reward queries on a
//! compiled MDP under minimizing or maximizing resolutions of
//! nondeterminism.
//!
//! Plain value iteration on 64-bit floats; the known unsoundness of
//! residual-based stopping is accepted and documented in the README.
//! Evaluations read the MDP immutably, so distinct properties may be
//! checked concurrently.

mod numeric;
mod property;
mod qualitative;

pub use numeric::{
    bounded_reach_probability, expected_reward, invariant_probability, reach_probability,
};
pub use property::{
    evaluate_property, query_values, resolve_properties, run_experiment, Bound, CheckResult,
    Property, ResolvedPath, ResolvedQuery,
};
pub use qualitative::qualitative_reach;

use thiserror::Error;

/// Convergence parameters for value iteration.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Threshold on the largest per-state change between sweeps.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Use the absolute-change criterion instead of relative change.
    pub absolute: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { epsilon: 1e-6, max_iters: 1_000_000, absolute: false }
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("value iteration did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("filter matches no states (set {set})")]
    EmptyFilter { set: String },

    #[error("unbound experiment parameter `{name}` (bind it with an experiment range)")]
    UnboundParameter { name: String },

    #[error("experiment parameter `{name}` must be non-negative, got {value}")]
    NegativeBound { name: String, value: i64 },

    #[error("empty experiment range for `{param}`: from {from} to {to} step {step}")]
    EmptyExperiment { param: String, from: i64, to: i64, step: i64 },

    #[error("state expression evaluation failed: {0}")]
    Eval(#[from] crate::lang::eval::EvalError),
}
