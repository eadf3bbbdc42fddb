//! Resolution and evaluation of P/R queries, filters and parameter sweeps.

use std::collections::BTreeMap;

use super::numeric::{
    bounded_reach_probability, expected_reward, invariant_probability, reach_probability,
};
use super::{CheckError, CheckOptions};
use crate::lang::ast::{Aggregate, Mode, PathAst, PropertyAst, PropsAst, QueryAst, StateSetAst};
use crate::lang::eval::RExpr;
use crate::lang::typecheck::TypedModel;
use crate::lang::{ModelError, Pos};
use crate::mdp::CompiledMdp;

/// Step bound of a bounded-eventually path: a fixed constant or a named
/// experiment parameter supplied at evaluation time.
#[derive(Debug, Clone)]
pub enum Bound {
    Const(u64),
    Param(String),
}

#[derive(Debug, Clone)]
pub enum ResolvedPath {
    Eventually { bound: Option<Bound>, target: RExpr },
    Globally(RExpr),
}

#[derive(Debug, Clone)]
pub enum ResolvedQuery {
    Prob { mode: Mode, path: ResolvedPath },
    Reward { structure: usize, mode: Mode, target: RExpr },
}

/// A property ready for evaluation against a compiled MDP.
#[derive(Debug, Clone)]
pub struct Property {
    /// Canonical display form, e.g. `Pmin=? [F s=done]`.
    pub display: String,
    pub query: ResolvedQuery,
    /// `filter(agg, query, set)` aggregation, if any.
    pub filter: Option<(Aggregate, RExpr, String)>,
}

impl Property {
    /// The experiment parameter this property depends on, if any.
    pub fn parameter(&self) -> Option<&str> {
        match &self.query {
            ResolvedQuery::Prob {
                path: ResolvedPath::Eventually { bound: Some(Bound::Param(name)), .. },
                ..
            } => Some(name),
            _ => None,
        }
    }
}

impl std::fmt::Display for Property {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.display)
    }
}

/// Result of evaluating one property.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckResult {
    /// Value at the initial state, or a filter aggregate.
    Scalar(f64),
    /// Experiment series, ordered by ascending parameter value.
    Series(Vec<(i64, f64)>),
}

impl CheckResult {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            CheckResult::Scalar(v) => Some(*v),
            CheckResult::Series(_) => None,
        }
    }
}

/// Resolves parsed properties against a typed model: labels (from the model
/// and the property file) to their defining expressions, state expressions
/// to variable/feature indices, reward structure names to indices.
pub fn resolve_properties(
    model: &TypedModel,
    props: &PropsAst,
) -> Result<Vec<Property>, ModelError> {
    // Property-file labels extend the model's label table.
    let mut labels: Vec<(String, RExpr)> = model.labels.clone();
    for decl in &props.labels {
        if labels.iter().any(|(n, _)| *n == decl.name) {
            return Err(ModelError::DuplicateName {
                pos: decl.pos,
                name: decl.name.clone(),
                kind: "label",
            });
        }
        let expr = model.resolver().resolve_bool(&decl.expr)?;
        labels.push((decl.name.clone(), expr));
    }

    let resolve_set = |set: &StateSetAst, pos: Pos| -> Result<(RExpr, String), ModelError> {
        match set {
            StateSetAst::Label(name) => {
                let expr = labels
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, e)| e.clone())
                    .ok_or_else(|| ModelError::UndefinedIdent {
                        pos,
                        name: format!("\"{name}\""),
                    })?;
                Ok((expr, format!("\"{name}\"")))
            }
            StateSetAst::Expr(e) => Ok((model.resolver().resolve_bool(e)?, e.to_string())),
        }
    };

    let resolve_query = |query: &QueryAst| -> Result<ResolvedQuery, ModelError> {
        match query {
            QueryAst::Prob { mode, path } => {
                let path = match path {
                    PathAst::Eventually { bound, target } => {
                        let (target, _) = resolve_set(target, Pos::new(1, 1))?;
                        let bound = match bound {
                            None => None,
                            Some(expr) => Some(resolve_bound(model, expr)?),
                        };
                        ResolvedPath::Eventually { bound, target }
                    }
                    PathAst::Globally(target) => {
                        let (target, _) = resolve_set(target, Pos::new(1, 1))?;
                        ResolvedPath::Globally(target)
                    }
                };
                Ok(ResolvedQuery::Prob { mode: *mode, path })
            }
            QueryAst::Reward { structure, mode, target } => {
                let idx = model.reward_index(structure).ok_or_else(|| {
                    ModelError::UndefinedIdent {
                        pos: Pos::new(1, 1),
                        name: format!("reward structure \"{structure}\""),
                    }
                })?;
                let (target, _) = resolve_set(target, Pos::new(1, 1))?;
                Ok(ResolvedQuery::Reward { structure: idx, mode: *mode, target })
            }
        }
    };

    let mut out = Vec::new();
    for prop in &props.properties {
        let display = prop.to_string();
        let (query, filter) = match prop {
            PropertyAst::Query(q) => (resolve_query(q)?, None),
            PropertyAst::Filter { agg, inner, set } => {
                let (set_expr, set_display) = resolve_set(set, Pos::new(1, 1))?;
                (resolve_query(inner)?, Some((*agg, set_expr, set_display)))
            }
        };
        out.push(Property { display, query, filter });
    }
    Ok(out)
}

fn resolve_bound(model: &TypedModel, expr: &crate::lang::ast::Expr) -> Result<Bound, ModelError> {
    let resolver = model.resolver();
    if let Some(name) = resolver.bound_parameter(expr) {
        return Ok(Bound::Param(name));
    }
    let value = resolver.resolve_bound(expr, &BTreeMap::new())?;
    if value < 0 {
        return Err(ModelError::Type {
            pos: expr.pos,
            message: format!("step bound must be non-negative, got {value}"),
        });
    }
    Ok(Bound::Const(value as u64))
}

/// Evaluates one property. `bindings` must cover every experiment parameter
/// the property references. Non-filter queries report the initial-state
/// value; filters aggregate over the states satisfying their set.
pub fn evaluate_property(
    mdp: &CompiledMdp,
    property: &Property,
    bindings: &BTreeMap<String, i64>,
    options: &CheckOptions,
) -> Result<CheckResult, CheckError> {
    let values = query_values(mdp, &property.query, bindings, options)?;
    match &property.filter {
        None => Ok(CheckResult::Scalar(values[mdp.initial])),
        Some((agg, set_expr, set_display)) => {
            let set = mdp
                .states_satisfying(set_expr)
                .map_err(CheckError::Eval)?;
            let selected: Vec<f64> = values
                .iter()
                .zip(set.iter())
                .filter(|(_, in_set)| **in_set)
                .map(|(v, _)| *v)
                .collect();
            if selected.is_empty() {
                return Err(CheckError::EmptyFilter { set: set_display.clone() });
            }
            let value = match agg {
                Aggregate::Min => selected.iter().copied().fold(f64::INFINITY, f64::min),
                Aggregate::Max => selected.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Aggregate::Avg => selected.iter().sum::<f64>() / selected.len() as f64,
            };
            Ok(CheckResult::Scalar(value))
        }
    }
}

/// The full per-state value vector of a query (no filter applied).
pub fn query_values(
    mdp: &CompiledMdp,
    query: &ResolvedQuery,
    bindings: &BTreeMap<String, i64>,
    options: &CheckOptions,
) -> Result<Vec<f64>, CheckError> {
    match query {
        ResolvedQuery::Prob { mode, path } => match path {
            ResolvedPath::Eventually { bound: None, target } => {
                let target = mdp.states_satisfying(target).map_err(CheckError::Eval)?;
                reach_probability(mdp, &target, *mode, options)
            }
            ResolvedPath::Eventually { bound: Some(bound), target } => {
                let target = mdp.states_satisfying(target).map_err(CheckError::Eval)?;
                let k = resolve_binding(bound, bindings)?;
                Ok(bounded_reach_probability(mdp, &target, k, *mode))
            }
            ResolvedPath::Globally(safe) => {
                let safe = mdp.states_satisfying(safe).map_err(CheckError::Eval)?;
                invariant_probability(mdp, &safe, *mode, options)
            }
        },
        ResolvedQuery::Reward { structure, mode, target } => {
            let target = mdp.states_satisfying(target).map_err(CheckError::Eval)?;
            expected_reward(mdp, *structure, &target, *mode, options)
        }
    }
}

fn resolve_binding(bound: &Bound, bindings: &BTreeMap<String, i64>) -> Result<u64, CheckError> {
    match bound {
        Bound::Const(k) => Ok(*k),
        Bound::Param(name) => {
            let v = *bindings
                .get(name)
                .ok_or_else(|| CheckError::UnboundParameter { name: name.clone() })?;
            if v < 0 {
                return Err(CheckError::NegativeBound { name: name.clone(), value: v });
            }
            Ok(v as u64)
        }
    }
}

/// Evaluates `property` for `param = from, from+step, ...` up to `to`
/// (inclusive), reusing the compiled MDP across evaluations.
pub fn run_experiment(
    mdp: &CompiledMdp,
    property: &Property,
    param: &str,
    from: i64,
    to: i64,
    step: i64,
    options: &CheckOptions,
) -> Result<CheckResult, CheckError> {
    if from > to || step < 1 {
        return Err(CheckError::EmptyExperiment {
            param: param.to_string(),
            from,
            to,
            step,
        });
    }
    if let Some(series) = bounded_sweep(mdp, property, param, from, to, step)? {
        return Ok(CheckResult::Series(series));
    }
    let mut series = Vec::new();
    let mut bindings = BTreeMap::new();
    let mut k = from;
    while k <= to {
        bindings.insert(param.to_string(), k);
        let result = evaluate_property(mdp, property, &bindings, options)?;
        series.push((k, result.scalar().expect("experiment evaluations are scalar")));
        k += step;
    }
    Ok(CheckResult::Series(series))
}

/// Fast path for sweeps of bounded-eventually queries: evolve one
/// value-iteration vector instead of restarting per bound. The per-k values
/// are bit-identical to independent evaluations.
fn bounded_sweep(
    mdp: &CompiledMdp,
    property: &Property,
    param: &str,
    from: i64,
    to: i64,
    step: i64,
) -> Result<Option<Vec<(i64, f64)>>, CheckError> {
    let ResolvedQuery::Prob {
        mode,
        path: ResolvedPath::Eventually { bound: Some(Bound::Param(name)), target },
    } = &property.query
    else {
        return Ok(None);
    };
    if name != param {
        return Ok(None);
    }
    if from < 0 {
        return Err(CheckError::NegativeBound { name: name.clone(), value: from });
    }
    let target = mdp.states_satisfying(target).map_err(CheckError::Eval)?;
    let filter = match &property.filter {
        None => None,
        Some((agg, set_expr, set_display)) => {
            let set = mdp.states_satisfying(set_expr).map_err(CheckError::Eval)?;
            if !set.iter().any(|b| *b) {
                return Err(CheckError::EmptyFilter { set: set_display.clone() });
            }
            Some((*agg, set))
        }
    };
    let extract = |values: &[f64]| -> f64 {
        match &filter {
            None => values[mdp.initial],
            Some((agg, set)) => {
                let selected = values.iter().zip(set.iter()).filter(|(_, b)| **b).map(|(v, _)| *v);
                match agg {
                    Aggregate::Min => selected.fold(f64::INFINITY, f64::min),
                    Aggregate::Max => selected.fold(f64::NEG_INFINITY, f64::max),
                    Aggregate::Avg => {
                        let (sum, n) = selected.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                        sum / n as f64
                    }
                }
            }
        }
    };
    let mut stepper = super::numeric::BoundedStepper::new(mdp, target, *mode);
    let mut series = Vec::new();
    let mut k = 0i64;
    let mut next_sample = from;
    loop {
        if k == next_sample {
            series.push((k, extract(stepper.values())));
            next_sample += step;
            if next_sample > to {
                break;
            }
        }
        stepper.advance();
        k += 1;
    }
    Ok(Some(series))
}
