//! Evaluation of resolved expressions over a variable valuation and a
//! feature configuration.
//!
//! Numbers are exact: `double` values are rationals, `/` is exact rational
//! division, and `round` ties away from zero. Floating point never enters
//! expression evaluation.

use super::ast::{BinaryOp, Builtin, Pos, UnaryOp};
use crate::feature_model::Configuration;
use crate::rat;
use num::{BigRational, ToPrimitive, Zero};
use thiserror::Error;

/// Runtime value of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Double(BigRational),
    Bool(bool),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Double(_) => "double",
            Value::Bool(_) => "bool",
        }
    }

    /// Numeric view as an exact rational.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self {
            Value::Int(n) => Some(rat::from_int(*n)),
            Value::Double(r) => Some(r.clone()),
            Value::Bool(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Double(r) => write!(f, "{}", rat::format_rational(r)),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{pos}: division by zero")]
    DivisionByZero { pos: Pos },

    #[error("{pos}: integer overflow")]
    Overflow { pos: Pos },

    #[error("{pos}: result {value} does not fit an integer")]
    IntRange { pos: Pos, value: String },
}

/// Expression with all names resolved: variables to global indices,
/// features to feature indices, constants and formulas folded away.
#[derive(Debug, Clone, PartialEq)]
pub struct RExpr {
    pub kind: RExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RExprKind {
    Int(i64),
    Double(BigRational),
    Bool(bool),
    /// Global variable index into the valuation.
    Var(usize),
    /// Feature index; reads the configuration.
    Active(usize),
    Unary(UnaryOp, Box<RExpr>),
    Binary(BinaryOp, Box<RExpr>, Box<RExpr>),
    Ite(Box<RExpr>, Box<RExpr>, Box<RExpr>),
    Call(Builtin, Vec<RExpr>),
}

impl RExpr {
    pub fn new(kind: RExprKind, pos: Pos) -> Self {
        RExpr { kind, pos }
    }

    /// True when the expression reads neither variables nor features.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            RExprKind::Int(_) | RExprKind::Double(_) | RExprKind::Bool(_) => true,
            RExprKind::Var(_) | RExprKind::Active(_) => false,
            RExprKind::Unary(_, e) => e.is_constant(),
            RExprKind::Binary(_, a, b) => a.is_constant() && b.is_constant(),
            RExprKind::Ite(c, t, e) => c.is_constant() && t.is_constant() && e.is_constant(),
            RExprKind::Call(_, args) => args.iter().all(|a| a.is_constant()),
        }
    }
}

/// Evaluation context: a full variable valuation plus the active feature
/// configuration.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx<'a> {
    pub vars: &'a [i64],
    pub config: Configuration,
}

impl<'a> EvalCtx<'a> {
    pub fn new(vars: &'a [i64], config: Configuration) -> Self {
        EvalCtx { vars, config }
    }
}

/// Evaluates a resolved expression. Ternaries, `&`, `|` and `=>` are lazy,
/// so errors in untaken branches do not surface.
pub fn evaluate_expr(expr: &RExpr, ctx: &EvalCtx) -> Result<Value, EvalError> {
    match &expr.kind {
        RExprKind::Int(n) => Ok(Value::Int(*n)),
        RExprKind::Double(r) => Ok(Value::Double(r.clone())),
        RExprKind::Bool(b) => Ok(Value::Bool(*b)),
        RExprKind::Var(idx) => Ok(Value::Int(ctx.vars[*idx])),
        RExprKind::Active(f) => Ok(Value::Bool(ctx.config.contains(*f))),
        RExprKind::Unary(op, operand) => {
            let v = evaluate_expr(operand, ctx)?;
            match (op, v) {
                (UnaryOp::Neg, Value::Int(n)) => {
                    n.checked_neg().map(Value::Int).ok_or(EvalError::Overflow { pos: expr.pos })
                }
                (UnaryOp::Neg, Value::Double(r)) => Ok(Value::Double(-r)),
                (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                // unreachable after typechecking
                (_, v) => panic!("ill-typed unary operand {v:?}"),
            }
        }
        RExprKind::Binary(op, lhs, rhs) => eval_binary(expr.pos, *op, lhs, rhs, ctx),
        RExprKind::Ite(cond, then_e, else_e) => {
            let c = evaluate_expr(cond, ctx)?;
            if c.as_bool().expect("ill-typed ternary condition") {
                evaluate_expr(then_e, ctx)
            } else {
                evaluate_expr(else_e, ctx)
            }
        }
        RExprKind::Call(builtin, args) => eval_call(expr.pos, *builtin, args, ctx),
    }
}

fn eval_binary(
    pos: Pos,
    op: BinaryOp,
    lhs: &RExpr,
    rhs: &RExpr,
    ctx: &EvalCtx,
) -> Result<Value, EvalError> {
    use BinaryOp::*;
    // Lazy boolean connectives first.
    match op {
        And => {
            let l = evaluate_expr(lhs, ctx)?;
            return if !l.as_bool().expect("ill-typed `&`") {
                Ok(Value::Bool(false))
            } else {
                evaluate_expr(rhs, ctx)
            };
        }
        Or => {
            let l = evaluate_expr(lhs, ctx)?;
            return if l.as_bool().expect("ill-typed `|`") {
                Ok(Value::Bool(true))
            } else {
                evaluate_expr(rhs, ctx)
            };
        }
        Implies => {
            let l = evaluate_expr(lhs, ctx)?;
            return if !l.as_bool().expect("ill-typed `=>`") {
                Ok(Value::Bool(true))
            } else {
                evaluate_expr(rhs, ctx)
            };
        }
        _ => {}
    }
    let l = evaluate_expr(lhs, ctx)?;
    let r = evaluate_expr(rhs, ctx)?;
    match op {
        Add | Sub | Mul => match (&l, &r) {
            (Value::Int(a), Value::Int(b)) => {
                let result = match op {
                    Add => a.checked_add(*b),
                    Sub => a.checked_sub(*b),
                    _ => a.checked_mul(*b),
                };
                result.map(Value::Int).ok_or(EvalError::Overflow { pos })
            }
            _ => {
                let a = l.as_rational().expect("ill-typed arithmetic");
                let b = r.as_rational().expect("ill-typed arithmetic");
                Ok(Value::Double(match op {
                    Add => a + b,
                    Sub => a - b,
                    _ => a * b,
                }))
            }
        },
        // `/` is exact real division regardless of operand types.
        Div => {
            let a = l.as_rational().expect("ill-typed division");
            let b = r.as_rational().expect("ill-typed division");
            if b.is_zero() {
                return Err(EvalError::DivisionByZero { pos });
            }
            Ok(Value::Double(a / b))
        }
        Eq | Ne => {
            let equal = match (&l, &r) {
                (Value::Bool(a), Value::Bool(b)) => a == b,
                _ => {
                    l.as_rational().expect("ill-typed comparison")
                        == r.as_rational().expect("ill-typed comparison")
                }
            };
            Ok(Value::Bool(if op == Eq { equal } else { !equal }))
        }
        Lt | Le | Gt | Ge => {
            let a = l.as_rational().expect("ill-typed comparison");
            let b = r.as_rational().expect("ill-typed comparison");
            Ok(Value::Bool(match op {
                Lt => a < b,
                Le => a <= b,
                Gt => a > b,
                _ => a >= b,
            }))
        }
        And | Or | Implies => unreachable!("handled above"),
    }
}

fn eval_call(pos: Pos, builtin: Builtin, args: &[RExpr], ctx: &EvalCtx) -> Result<Value, EvalError> {
    match builtin {
        Builtin::Round | Builtin::Floor | Builtin::Ceil => {
            let v = evaluate_expr(&args[0], ctx)?;
            let r = v.as_rational().expect("ill-typed rounding");
            let result = match builtin {
                Builtin::Round => rat::round_half_away(&r),
                Builtin::Floor => r.floor().to_integer(),
                _ => r.ceil().to_integer(),
            };
            result
                .to_i64()
                .map(Value::Int)
                .ok_or_else(|| EvalError::IntRange { pos, value: result.to_string() })
        }
        Builtin::Min | Builtin::Max => {
            let a = evaluate_expr(&args[0], ctx)?;
            let b = evaluate_expr(&args[1], ctx)?;
            match (&a, &b) {
                (Value::Int(x), Value::Int(y)) => Ok(Value::Int(if builtin == Builtin::Min {
                    *x.min(y)
                } else {
                    *x.max(y)
                })),
                _ => {
                    let x = a.as_rational().expect("ill-typed min/max");
                    let y = b.as_rational().expect("ill-typed min/max");
                    Ok(Value::Double(if builtin == Builtin::Min { x.min(y) } else { x.max(y) }))
                }
            }
        }
    }
}

/// Folds constant subexpressions. Subtrees whose evaluation fails (e.g. a
/// division by zero in a lazily skipped ternary branch) are left unfolded so
/// runtime laziness is preserved.
pub fn fold_constants(expr: &RExpr) -> RExpr {
    let folded_kind = match &expr.kind {
        RExprKind::Unary(op, e) => RExprKind::Unary(*op, Box::new(fold_constants(e))),
        RExprKind::Binary(op, a, b) => {
            RExprKind::Binary(*op, Box::new(fold_constants(a)), Box::new(fold_constants(b)))
        }
        RExprKind::Ite(c, t, e) => RExprKind::Ite(
            Box::new(fold_constants(c)),
            Box::new(fold_constants(t)),
            Box::new(fold_constants(e)),
        ),
        RExprKind::Call(b, args) => RExprKind::Call(*b, args.iter().map(fold_constants).collect()),
        k => k.clone(),
    };
    let folded = RExpr::new(folded_kind, expr.pos);
    if folded.is_constant() {
        let ctx = EvalCtx::new(&[], Configuration::EMPTY);
        if let Ok(v) = evaluate_expr(&folded, &ctx) {
            let kind = match v {
                Value::Int(n) => RExprKind::Int(n),
                Value::Double(r) => RExprKind::Double(r),
                Value::Bool(b) => RExprKind::Bool(b),
            };
            return RExpr::new(kind, expr.pos);
        }
    }
    folded
}

/// Signed ratio of an i64 pair, used by tests.
#[cfg(test)]
pub(crate) fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}
