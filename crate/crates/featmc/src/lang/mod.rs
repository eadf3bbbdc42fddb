//! Front end for the modeling language and the property language:
//! lexing, parsing, pretty-printing, typechecking, expression evaluation.
//!
//! Model files (`.pfm`) contain constants, formulas, labels, feature
//! blocks, modules of bounded-integer variables with probabilistic guarded
//! commands, and at most one feature controller. Property files (`.props`)
//! contain label definitions and P/R queries, one per line. The grammar is
//! documented in the repository README.

pub mod ast;
pub mod eval;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod typecheck;

pub use ast::{Expr, ModelAst, Pos, PropertyAst, PropsAst};
pub use eval::{evaluate_expr, EvalError, Value};
pub use parser::{parse_model, parse_properties};
pub use typecheck::{typecheck, typecheck_with_overrides, Overrides, TypedModel};

use thiserror::Error;

pub(crate) fn pretty_op(op: ast::BinaryOp) -> &'static str {
    use ast::BinaryOp::*;
    match op {
        Add => "+",
        Sub => "-",
        Mul => "*",
        Div => "/",
        Eq => "=",
        Ne => "!=",
        Lt => "<",
        Le => "<=",
        Gt => ">",
        Ge => ">=",
        And => "&",
        Or => "|",
        Implies => "=>",
    }
}

/// Errors from parsing or typechecking a model or property file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },

    #[error("{pos}: undefined identifier `{name}`")]
    UndefinedIdent { pos: Pos, name: String },

    #[error("{pos}: type error: {message}")]
    Type { pos: Pos, message: String },

    #[error("unresolved constant {name}")]
    UnresolvedConstant { name: String },

    #[error("{pos}: cyclic definition involving `{name}`")]
    CyclicDefinition { pos: Pos, name: String },

    #[error("{pos}: duplicate name `{name}` ({kind})")]
    DuplicateName { pos: Pos, name: String, kind: &'static str },

    #[error("{pos}: probability expression is not constant")]
    ProbabilityNotConstant { pos: Pos },

    #[error("{pos}: probability {value} is outside [0, 1]")]
    ProbabilityOutOfRange { pos: Pos, value: String },

    #[error("{pos}: branch probabilities of command sum to {sum}, expected exactly 1")]
    ProbabilitySum { pos: Pos, sum: String },

    #[error("{pos}: controller command must have exactly one branch with probability 1")]
    ControllerProbability { pos: Pos },

    #[error("{pos}: feature `{name}` is both activated and deactivated")]
    SwitchConflict { pos: Pos, name: String },

    #[error("{pos}: variable bounds violated: {message}")]
    VariableBounds { pos: Pos, message: String },

    #[error("override for unknown constant `{name}`")]
    UnknownOverride { name: String },

    #[error("invalid override `{name}={value}`: {message}")]
    InvalidOverride { name: String, value: String, message: String },

    #[error("feature model error: {0}")]
    FeatureModel(#[from] crate::feature_model::FeatureModelError),

    #[error("initial configuration: {0}")]
    InitialConfig(#[from] crate::feature_model::InitialConfigError),

    #[error("{pos}: constant expression evaluation failed: {source}")]
    ConstEval { pos: Pos, source: EvalError },
}
