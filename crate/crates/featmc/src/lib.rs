//! Probabilistic model checker for feature-aware guarded-command models.
//!
//! The pipeline: parse a model file ([`lang`]), typecheck it against its
//! feature model ([`feature_model`]), compile the synchronized modules plus
//! feature controller into an explicit MDP ([`mdp`]), and evaluate
//! probability/reward queries under all resolutions of nondeterminism
//! ([`check`]). The [`sim`] module provides independent verification back
//! ends (exact bounded enumeration and Monte-Carlo rollouts), and [`auv`]
//! bundles the pipeline-inspection case study.

pub mod auv;
pub mod check;
pub mod feature_model;
pub mod lang;
pub mod mdp;
pub mod rat;
pub mod sim;

pub use feature_model::{Configuration, FeatureModel};
pub use lang::{parse_model, parse_properties, typecheck, ModelAst, Overrides, TypedModel};
pub use mdp::{compile, CompiledMdp};
