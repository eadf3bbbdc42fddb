//! Independent verification back ends: exact bounded-path enumeration and
//! Monte-Carlo rollouts under a fixed policy.
//!
//! The exhaustive oracle never touches floating point; the simulator uses a
//! counter-based random stream keyed by (seed, trial index), so estimates
//! are identical for any execution order or thread count.

mod exhaustive;
mod monte_carlo;

pub use exhaustive::{exhaustive_bounded, exhaustive_bounded_with_budget};
pub use monte_carlo::{induced_chain, simulate_paths, Objective, Policy, SimEstimate};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bounded enumeration exceeds the node budget of {budget}")]
    NodeBudget { budget: usize },

    #[error("policy does not cover state {state} ({choices} choices)")]
    IncompletePolicy { state: usize, choices: usize },

    #[error("policy picks choice {index} in state {state}, which has only {choices} choices")]
    BadChoiceIndex { state: usize, index: usize, choices: usize },

    #[error("cumulated-reward objective needs almost-sure reachability of the target under the policy; state {state} is not almost sure")]
    NotAlmostSure { state: String },

    #[error("at least one trial is required")]
    ZeroTrials,

    #[error("unknown reward structure index {0}")]
    UnknownStructure(usize),
}
