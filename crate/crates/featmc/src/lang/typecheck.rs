//! Resolves and types a parsed model: constants to literals, formulas
//! inlined, identifiers bound to variable/feature indices, probabilities
//! evaluated to exact rationals, and the feature model constructed.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::eval::{evaluate_expr, fold_constants, EvalCtx, RExpr, RExprKind, Value};
use super::ModelError;
use crate::feature_model::{Configuration, ConstraintExpr, FeatureModel};
use num::{BigRational, One, Signed, Zero};

/// Constant overrides as given on a command line: name to literal text,
/// parsed against the declared type.
pub type Overrides = BTreeMap<String, String>;

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub module: usize,
    pub lo: i64,
    pub hi: i64,
    pub init: i64,
}

#[derive(Debug, Clone)]
pub struct TypedBranch {
    pub prob: BigRational,
    /// Simultaneous assignments: (global variable index, value expression).
    pub assigns: Vec<(usize, RExpr)>,
}

#[derive(Debug, Clone)]
pub struct TypedCommand {
    pub action: Option<usize>,
    pub guard: RExpr,
    pub branches: Vec<TypedBranch>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct TypedModule {
    pub name: String,
    /// Global indices of this module's variables.
    pub vars: Vec<usize>,
    pub commands: Vec<TypedCommand>,
}

#[derive(Debug, Clone)]
pub struct TypedCtrlCommand {
    pub action: Option<usize>,
    pub guard: RExpr,
    pub activate: Configuration,
    pub deactivate: Configuration,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct TypedController {
    pub commands: Vec<TypedCtrlCommand>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    State,
    /// Matched against choices with this action (`None` = unlabeled).
    Transition(Option<usize>),
}

#[derive(Debug, Clone)]
pub struct TypedRewardItem {
    pub kind: RewardKind,
    pub guard: RExpr,
    pub value: RExpr,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct RewardStructure {
    pub name: String,
    pub items: Vec<TypedRewardItem>,
}

/// Fully resolved model, ready for compilation. Structurally deterministic:
/// the same text and overrides always produce the same value.
#[derive(Debug, Clone)]
pub struct TypedModel {
    pub feature_model: FeatureModel,
    pub constants: BTreeMap<String, Value>,
    pub vars: Vec<VarInfo>,
    pub modules: Vec<TypedModule>,
    pub controller: Option<TypedController>,
    pub rewards: Vec<RewardStructure>,
    pub labels: Vec<(String, RExpr)>,
    pub initial_config: Configuration,
    /// Action labels in order of first appearance.
    pub actions: Vec<String>,
}

impl TypedModel {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn reward_index(&self, name: &str) -> Option<usize> {
        self.rewards.iter().position(|r| r.name == name)
    }

    pub fn label_expr(&self, name: &str) -> Option<&RExpr> {
        self.labels.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn initial_valuation(&self) -> Vec<i64> {
        self.vars.iter().map(|v| v.init).collect()
    }

    /// Resolver over this model's symbol tables, for property expressions.
    pub fn resolver(&self) -> ExprResolver<'_> {
        ExprResolver { model: self }
    }
}

/// Resolves expressions parsed later (properties, CLI state sets) against a
/// typed model's constants, formulas-free namespace, variables and features.
pub struct ExprResolver<'a> {
    model: &'a TypedModel,
}

impl ExprResolver<'_> {
    pub fn resolve_bool(&self, expr: &Expr) -> Result<RExpr, ModelError> {
        let vars: HashMap<String, usize> = self
            .model
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        let features = feature_index_map(&self.model.feature_model);
        let formulas = HashMap::new();
        let mut ctx = Resolver {
            constants: &self.model.constants,
            formulas: &formulas,
            vars: &vars,
            features: &features,
            stack: Vec::new(),
        };
        let (r, ty) = ctx.resolve(expr)?;
        if ty != TypeName::Bool {
            return Err(ModelError::Type {
                pos: expr.pos,
                message: format!("state expression must be bool, got {ty}"),
            });
        }
        Ok(fold_constants(&r))
    }

    /// Resolves an expression that must be a constant integer, given extra
    /// parameter bindings (experiment parameters like `k`).
    pub fn resolve_bound(
        &self,
        expr: &Expr,
        bindings: &BTreeMap<String, i64>,
    ) -> Result<i64, ModelError> {
        if let ExprKind::Ident(name) = &expr.kind {
            if let Some(v) = bindings.get(name) {
                return Ok(*v);
            }
        }
        let vars = HashMap::new();
        let features = feature_index_map(&self.model.feature_model);
        let formulas = HashMap::new();
        let mut ctx = Resolver {
            constants: &self.model.constants,
            formulas: &formulas,
            vars: &vars,
            features: &features,
            stack: Vec::new(),
        };
        let (r, ty) = ctx.resolve(expr)?;
        if ty != TypeName::Int {
            return Err(ModelError::Type {
                pos: expr.pos,
                message: format!("step bound must be an integer, got {ty}"),
            });
        }
        let v = evaluate_expr(&r, &EvalCtx::new(&[], Configuration::EMPTY))
            .map_err(|source| ModelError::ConstEval { pos: expr.pos, source })?;
        Ok(v.as_int().expect("typed int"))
    }

    /// Names of unbound identifiers in bound position, i.e. experiment
    /// parameters.
    pub fn bound_parameter(&self, expr: &Expr) -> Option<String> {
        if let ExprKind::Ident(name) = &expr.kind {
            if !self.model.constants.contains_key(name) {
                return Some(name.clone());
            }
        }
        None
    }
}

fn feature_index_map(fm: &FeatureModel) -> HashMap<String, usize> {
    fm.names().iter().enumerate().map(|(i, n)| (n.clone(), i)).collect()
}

/// Typechecks a parsed model. `overrides` take precedence over constant
/// defaults; a constant with neither is an error.
pub fn typecheck(ast: &ModelAst, overrides: &Overrides) -> Result<TypedModel, ModelError> {
    Typechecker::new(ast, overrides)?.run()
}

/// Convenience wrapper building the override map from `name=value` pairs.
pub fn typecheck_with_overrides(
    ast: &ModelAst,
    pairs: &[(&str, &str)],
) -> Result<TypedModel, ModelError> {
    let map: Overrides = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    typecheck(ast, &map)
}

struct Typechecker<'a> {
    ast: &'a ModelAst,
    overrides: &'a Overrides,
    constants: BTreeMap<String, Value>,
    formulas: HashMap<String, Expr>,
    var_index: HashMap<String, usize>,
    feature_index: HashMap<String, usize>,
    actions: Vec<String>,
}

impl<'a> Typechecker<'a> {
    fn new(ast: &'a ModelAst, overrides: &'a Overrides) -> Result<Self, ModelError> {
        Ok(Typechecker {
            ast,
            overrides,
            constants: BTreeMap::new(),
            formulas: HashMap::new(),
            var_index: HashMap::new(),
            feature_index: HashMap::new(),
            actions: Vec::new(),
        })
    }

    fn run(mut self) -> Result<TypedModel, ModelError> {
        self.check_name_clashes()?;
        self.resolve_constants()?;
        for f in &self.ast.formulas {
            self.formulas.insert(f.name.clone(), f.expr.clone());
        }
        let feature_model = self.build_feature_model()?;
        self.feature_index = feature_index_map(&feature_model);
        let initial_config = feature_model.initial_configuration()?;

        let vars = self.collect_vars()?;
        let modules = self.check_modules()?;
        let controller = self.check_controller()?;
        let rewards = self.check_rewards()?;
        let labels = self.check_labels()?;

        Ok(TypedModel {
            feature_model,
            constants: self.constants,
            vars,
            modules,
            controller,
            rewards,
            labels,
            initial_config,
            actions: self.actions,
        })
    }

    fn resolver(&self) -> Resolver<'_> {
        Resolver {
            constants: &self.constants,
            formulas: &self.formulas,
            vars: &self.var_index,
            features: &self.feature_index,
            stack: Vec::new(),
        }
    }

    fn check_name_clashes(&self) -> Result<(), ModelError> {
        let mut seen: HashMap<&str, &'static str> = HashMap::new();
        let mut claim = |name: &'a str, kind: &'static str, pos: Pos| -> Result<(), ModelError> {
            if let Some(prev) = seen.insert(name, kind) {
                return Err(ModelError::DuplicateName { pos, name: name.to_string(), kind: prev });
            }
            Ok(())
        };
        for c in &self.ast.constants {
            claim(&c.name, "constant", c.pos)?;
        }
        for f in &self.ast.formulas {
            claim(&f.name, "formula", f.pos)?;
        }
        for m in &self.ast.modules {
            claim(&m.name, "module", m.pos)?;
            for v in &m.vars {
                claim(&v.name, "variable", v.pos)?;
            }
        }
        // Feature names: block names plus group children. Children may also
        // have their own block, so claim each feature name once.
        let mut feature_names: Vec<(&str, Pos)> = Vec::new();
        let add_feature = |name: &'a str, pos: Pos, list: &mut Vec<(&'a str, Pos)>| {
            if !list.iter().any(|(n, _)| *n == name) {
                list.push((name, pos));
            }
        };
        let mut root_blocks = 0;
        for feat in &self.ast.features {
            if feat.is_root {
                root_blocks += 1;
                if root_blocks > 1 {
                    return Err(ModelError::DuplicateName {
                        pos: feat.pos,
                        name: "root".into(),
                        kind: "root feature",
                    });
                }
            }
            // Two non-root blocks with the same name are duplicates.
            if self
                .ast
                .features
                .iter()
                .filter(|other| other.name == feat.name)
                .count()
                > 1
            {
                return Err(ModelError::DuplicateName {
                    pos: feat.pos,
                    name: feat.name.clone(),
                    kind: "feature",
                });
            }
            add_feature(&feat.name, feat.pos, &mut feature_names);
            if let Some((_, children)) = &feat.group {
                for child in children {
                    add_feature(child, feat.pos, &mut feature_names);
                }
            }
        }
        for (name, pos) in feature_names {
            claim(name, "feature", pos)?;
        }
        for l in &self.ast.labels {
            claim(&l.name, "label", l.pos)?;
        }
        let mut reward_names: HashMap<&str, Pos> = HashMap::new();
        for feat in &self.ast.features {
            for r in &feat.rewards {
                if reward_names.insert(&r.name, r.pos).is_some() {
                    return Err(ModelError::DuplicateName {
                        pos: r.pos,
                        name: r.name.clone(),
                        kind: "reward structure",
                    });
                }
            }
        }
        Ok(())
    }

    fn resolve_constants(&mut self) -> Result<(), ModelError> {
        for (name, _) in self.overrides.iter() {
            if !self.ast.constants.iter().any(|c| c.name == *name) {
                return Err(ModelError::UnknownOverride { name: name.clone() });
            }
        }
        // Defaults may reference earlier or later constants; iterate until
        // no progress is made.
        let mut pending: Vec<&ConstDecl> = self.ast.constants.iter().collect();
        // Overrides first: they never depend on anything.
        for c in &self.ast.constants {
            if let Some(text) = self.overrides.get(&c.name) {
                let value = parse_override(c, text)?;
                self.constants.insert(c.name.clone(), value);
            }
        }
        pending.retain(|c| !self.constants.contains_key(&c.name));
        loop {
            let before = pending.len();
            let mut still_pending = Vec::new();
            let mut last_error = None;
            for c in pending {
                let Some(default) = &c.default else {
                    return Err(ModelError::UnresolvedConstant { name: c.name.clone() });
                };
                let mut resolver = Resolver {
                    constants: &self.constants,
                    formulas: &HashMap::new(),
                    vars: &HashMap::new(),
                    features: &HashMap::new(),
                    stack: Vec::new(),
                };
                match resolver.resolve(default) {
                    Ok((r, ty)) => {
                        let value = evaluate_expr(&r, &EvalCtx::new(&[], Configuration::EMPTY))
                            .map_err(|source| ModelError::ConstEval { pos: c.pos, source })?;
                        let value = coerce_constant(c, value, ty)?;
                        self.constants.insert(c.name.clone(), value);
                    }
                    Err(e) => {
                        last_error = Some(e);
                        still_pending.push(c);
                    }
                }
            }
            pending = still_pending;
            if pending.is_empty() {
                return Ok(());
            }
            if pending.len() == before {
                // No progress: a genuine undefined reference or a cycle.
                return Err(last_error.expect("stuck constants imply an error"));
            }
        }
    }

    fn build_feature_model(&mut self) -> Result<FeatureModel, ModelError> {
        let mut builder = FeatureModel::builder();
        if self.ast.features.is_empty() {
            // Models without feature blocks get an implicit root, so plain
            // guarded-command models compile to a single-configuration MDP.
            builder.root("root")?;
        } else {
            let root_decl = self
                .ast
                .features
                .iter()
                .find(|f| f.is_root)
                .ok_or(crate::feature_model::FeatureModelError::NoRoot)?;
            builder.root(&root_decl.name)?;
            for feat in &self.ast.features {
                builder.feature(&feat.name);
                if let Some((kind, children)) = &feat.group {
                    builder.group(&feat.name, *kind, children.iter().map(|s| s.as_str()))?;
                }
            }
        }
        // Index map available before constraints are lowered.
        let mut feature_index = HashMap::new();
        for feat in &self.ast.features {
            if let Some(idx) = builder.index_of(&feat.name) {
                feature_index.insert(feat.name.clone(), idx);
            }
            if let Some((_, children)) = &feat.group {
                for c in children {
                    if let Some(idx) = builder.index_of(c) {
                        feature_index.insert(c.clone(), idx);
                    }
                }
            }
        }
        self.feature_index = feature_index;

        let block_constraints = self
            .ast
            .features
            .iter()
            .flat_map(|f| f.constraints.iter())
            .chain(self.ast.constraints.iter());
        for decl in block_constraints {
            let (expr, text) = self.lower_constraint(decl)?;
            builder.constraint(expr, &text);
        }

        let init_exprs: Vec<&Expr> = self
            .ast
            .features
            .iter()
            .flat_map(|f| f.initial_constraints.iter())
            .chain(self.ast.initial_constraints.iter())
            .collect();
        if !init_exprs.is_empty() {
            let mut combined: Option<ConstraintExpr> = None;
            for e in init_exprs {
                let lowered = self.lower_feature_expr(e)?;
                combined = Some(match combined {
                    None => lowered,
                    Some(prev) => ConstraintExpr::And(Box::new(prev), Box::new(lowered)),
                });
            }
            builder.initial_constraint(combined.expect("nonempty"));
        }

        // The modules clause is declarative; names must exist.
        for feat in &self.ast.features {
            for m in &feat.modules {
                if !self.ast.modules.iter().any(|md| md.name == *m) {
                    return Err(ModelError::UndefinedIdent { pos: feat.pos, name: m.clone() });
                }
            }
        }

        Ok(builder.build()?)
    }

    fn lower_constraint(&self, decl: &ConstraintDecl) -> Result<(ConstraintExpr, String), ModelError> {
        match decl {
            ConstraintDecl::Requires { from, to, pos } => {
                let f = self.feature_idx(from, *pos)?;
                let t = self.feature_idx(to, *pos)?;
                Ok((
                    ConstraintExpr::Implies(
                        Box::new(ConstraintExpr::Active(f)),
                        Box::new(ConstraintExpr::Active(t)),
                    ),
                    format!("{from} requires {to}"),
                ))
            }
            ConstraintDecl::Expr(e) => Ok((self.lower_feature_expr(e)?, e.to_string())),
        }
    }

    fn feature_idx(&self, name: &str, pos: Pos) -> Result<usize, ModelError> {
        self.feature_index
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UndefinedIdent { pos, name: name.to_string() })
    }

    /// Lowers a boolean expression over `active(f)` atoms (and constants)
    /// into a feature-model constraint.
    fn lower_feature_expr(&self, expr: &Expr) -> Result<ConstraintExpr, ModelError> {
        let mut resolver = Resolver {
            constants: &self.constants,
            formulas: &self.formulas,
            vars: &HashMap::new(),
            features: &self.feature_index,
            stack: Vec::new(),
        };
        let (r, ty) = resolver.resolve(expr)?;
        if ty != TypeName::Bool {
            return Err(ModelError::Type {
                pos: expr.pos,
                message: format!("feature constraint must be bool, got {ty}"),
            });
        }
        lower_rexpr(&fold_constants(&r))
    }

    fn collect_vars(&mut self) -> Result<Vec<VarInfo>, ModelError> {
        // Names first, so bound expressions get "must be constant" rather
        // than "undefined identifier" when they misuse a variable.
        let mut infos = Vec::new();
        for (m_idx, m) in self.ast.modules.iter().enumerate() {
            for v in &m.vars {
                self.var_index.insert(v.name.clone(), infos.len());
                infos.push((m_idx, v));
            }
        }
        let mut out = Vec::new();
        for (m_idx, v) in infos {
            let lo = self.const_int(&v.lo, "lower bound")?;
            let hi = self.const_int(&v.hi, "upper bound")?;
            let init = self.const_int(&v.init, "initial value")?;
            if lo > hi || init < lo || init > hi {
                return Err(ModelError::VariableBounds {
                    pos: v.pos,
                    message: format!(
                        "variable `{}` needs lower <= init <= upper, got [{lo}..{hi}] init {init}",
                        v.name
                    ),
                });
            }
            out.push(VarInfo { name: v.name.clone(), module: m_idx, lo, hi, init });
        }
        Ok(out)
    }

    fn const_int(&self, expr: &Expr, what: &str) -> Result<i64, ModelError> {
        let mut resolver = self.resolver();
        let (r, ty) = resolver.resolve(expr)?;
        if ty != TypeName::Int {
            return Err(ModelError::Type {
                pos: expr.pos,
                message: format!("{what} must be an integer, got {ty}"),
            });
        }
        if !r.is_constant() {
            return Err(ModelError::VariableBounds {
                pos: expr.pos,
                message: format!("{what} must be a constant expression"),
            });
        }
        let v = evaluate_expr(&r, &EvalCtx::new(&[], Configuration::EMPTY))
            .map_err(|source| ModelError::ConstEval { pos: expr.pos, source })?;
        Ok(v.as_int().expect("typed int"))
    }

    fn intern_action(&mut self, action: &Option<String>) -> Option<usize> {
        action.as_ref().map(|name| {
            if let Some(idx) = self.actions.iter().position(|a| a == name) {
                idx
            } else {
                self.actions.push(name.clone());
                self.actions.len() - 1
            }
        })
    }

    fn check_modules(&mut self) -> Result<Vec<TypedModule>, ModelError> {
        let mut modules = Vec::new();
        for m in &self.ast.modules {
            let var_indices: Vec<usize> = m.vars.iter().map(|v| self.var_index[&v.name]).collect();
            let mut commands = Vec::new();
            for cmd in &m.commands {
                let action = self.intern_action(&cmd.action);
                let mut resolver = self.resolver();
                let guard = resolver.resolve_bool(&cmd.guard, "guard")?;
                let mut branches = Vec::new();
                let mut sum = BigRational::zero();
                for b in &cmd.branches {
                    let prob = match &b.prob {
                        None => BigRational::one(),
                        Some(p) => self.const_probability(p)?,
                    };
                    sum += &prob;
                    let mut assigns = Vec::new();
                    for a in &b.update.assignments {
                        let var = *self.var_index.get(&a.var).ok_or_else(|| {
                            ModelError::UndefinedIdent { pos: a.pos, name: a.var.clone() }
                        })?;
                        if !var_indices.contains(&var) {
                            return Err(ModelError::Type {
                                pos: a.pos,
                                message: format!(
                                    "variable `{}` is not local to module `{}`",
                                    a.var, m.name
                                ),
                            });
                        }
                        if assigns.iter().any(|(v, _)| *v == var) {
                            return Err(ModelError::Type {
                                pos: a.pos,
                                message: format!("variable `{}` assigned twice in one update", a.var),
                            });
                        }
                        let mut resolver = self.resolver();
                        let (value, ty) = resolver.resolve(&a.value)?;
                        if ty != TypeName::Int {
                            return Err(ModelError::Type {
                                pos: a.pos,
                                message: format!(
                                    "assignment to `{}` must be an integer, got {ty}",
                                    a.var
                                ),
                            });
                        }
                        assigns.push((var, fold_constants(&value)));
                    }
                    branches.push(TypedBranch { prob, assigns });
                }
                if !sum.is_one() {
                    return Err(ModelError::ProbabilitySum {
                        pos: cmd.pos,
                        sum: crate::rat::format_rational(&sum),
                    });
                }
                commands.push(TypedCommand { action, guard, branches, pos: cmd.pos });
            }
            modules.push(TypedModule { name: m.name.clone(), vars: var_indices, commands });
        }
        Ok(modules)
    }

    fn const_probability(&self, expr: &Expr) -> Result<BigRational, ModelError> {
        let mut resolver = self.resolver();
        let (r, ty) = resolver.resolve(expr)?;
        if ty == TypeName::Bool {
            return Err(ModelError::Type {
                pos: expr.pos,
                message: "probability must be numeric".into(),
            });
        }
        if !r.is_constant() {
            return Err(ModelError::ProbabilityNotConstant { pos: expr.pos });
        }
        let v = evaluate_expr(&r, &EvalCtx::new(&[], Configuration::EMPTY))
            .map_err(|source| ModelError::ConstEval { pos: expr.pos, source })?;
        let p = v.as_rational().expect("numeric");
        if p.is_negative() || p > BigRational::one() {
            return Err(ModelError::ProbabilityOutOfRange {
                pos: expr.pos,
                value: crate::rat::format_rational(&p),
            });
        }
        Ok(p)
    }

    fn check_controller(&mut self) -> Result<Option<TypedController>, ModelError> {
        let Some(ctrl) = &self.ast.controller else {
            return Ok(None);
        };
        let mut commands = Vec::new();
        for cmd in &ctrl.commands {
            let action = self.intern_action(&cmd.action);
            let mut resolver = self.resolver();
            let guard = resolver.resolve_bool(&cmd.guard, "guard")?;
            // Feature switches cannot be probabilistic: one branch, prob 1.
            if cmd.branches.len() != 1 {
                return Err(ModelError::ControllerProbability { pos: cmd.pos });
            }
            let branch = &cmd.branches[0];
            if let Some(p) = &branch.prob {
                if !self.const_probability(p)?.is_one() {
                    return Err(ModelError::ControllerProbability { pos: cmd.pos });
                }
            }
            let mut activate = Configuration::EMPTY;
            let mut deactivate = Configuration::EMPTY;
            for sw in &branch.update.switches {
                let (name, pos, is_activate) = match sw {
                    SwitchDecl::Activate(n, p) => (n, *p, true),
                    SwitchDecl::Deactivate(n, p) => (n, *p, false),
                };
                let idx = self.feature_idx(name, pos)?;
                if is_activate {
                    if deactivate.contains(idx) {
                        return Err(ModelError::SwitchConflict { pos, name: name.clone() });
                    }
                    activate = activate.with(idx);
                } else {
                    if activate.contains(idx) {
                        return Err(ModelError::SwitchConflict { pos, name: name.clone() });
                    }
                    deactivate = deactivate.with(idx);
                }
            }
            commands.push(TypedCtrlCommand { action, guard, activate, deactivate, pos: cmd.pos });
        }
        Ok(Some(TypedController { commands }))
    }

    fn check_rewards(&mut self) -> Result<Vec<RewardStructure>, ModelError> {
        let mut out = Vec::new();
        for feat in &self.ast.features {
            for r in &feat.rewards {
                let mut items = Vec::new();
                for item in &r.items {
                    let kind = match &item.action {
                        None => RewardKind::State,
                        Some(label) => RewardKind::Transition(self.intern_action(label)),
                    };
                    let mut resolver = self.resolver();
                    let guard = resolver.resolve_bool(&item.guard, "reward guard")?;
                    let (value, ty) = resolver.resolve(&item.value)?;
                    if ty == TypeName::Bool {
                        return Err(ModelError::Type {
                            pos: item.pos,
                            message: "reward value must be numeric".into(),
                        });
                    }
                    items.push(TypedRewardItem {
                        kind,
                        guard,
                        value: fold_constants(&value),
                        pos: item.pos,
                    });
                }
                out.push(RewardStructure { name: r.name.clone(), items });
            }
        }
        Ok(out)
    }

    fn check_labels(&mut self) -> Result<Vec<(String, RExpr)>, ModelError> {
        let mut out = Vec::new();
        for l in &self.ast.labels {
            let mut resolver = self.resolver();
            let expr = resolver.resolve_bool(&l.expr, "label")?;
            out.push((l.name.clone(), expr));
        }
        Ok(out)
    }
}

fn coerce_constant(decl: &ConstDecl, value: Value, ty: TypeName) -> Result<Value, ModelError> {
    match (decl.ty, value) {
        (TypeName::Int, Value::Int(n)) => Ok(Value::Int(n)),
        (TypeName::Double, Value::Int(n)) => Ok(Value::Double(crate::rat::from_int(n))),
        (TypeName::Double, Value::Double(r)) => Ok(Value::Double(r)),
        (TypeName::Bool, Value::Bool(b)) => Ok(Value::Bool(b)),
        (want, _) => Err(ModelError::Type {
            pos: decl.pos,
            message: format!("constant `{}` declared {want} but its value is {ty}", decl.name),
        }),
    }
}

fn parse_override(decl: &ConstDecl, text: &str) -> Result<Value, ModelError> {
    let fail = |message: &str| ModelError::InvalidOverride {
        name: decl.name.clone(),
        value: text.to_string(),
        message: message.to_string(),
    };
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    match decl.ty {
        TypeName::Int => {
            let n: i64 = text.parse().map_err(|_| fail("expected an integer"))?;
            Ok(Value::Int(n))
        }
        TypeName::Double => {
            let r = if let Some((num, den)) = body.split_once('/') {
                let n: i64 = num.parse().map_err(|_| fail("expected a rational"))?;
                let d: i64 = den.parse().map_err(|_| fail("expected a rational"))?;
                if d == 0 {
                    return Err(fail("zero denominator"));
                }
                BigRational::new(n.into(), d.into())
            } else {
                crate::rat::rational_from_decimal(body)
                    .ok_or_else(|| fail("expected a decimal or rational"))?
            };
            Ok(Value::Double(if negative { -r } else { r }))
        }
        TypeName::Bool => match text {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(fail("expected `true` or `false`")),
        },
    }
}

fn lower_rexpr(expr: &RExpr) -> Result<ConstraintExpr, ModelError> {
    match &expr.kind {
        RExprKind::Bool(b) => Ok(ConstraintExpr::Const(*b)),
        RExprKind::Active(idx) => Ok(ConstraintExpr::Active(*idx)),
        RExprKind::Unary(UnaryOp::Not, e) => Ok(ConstraintExpr::Not(Box::new(lower_rexpr(e)?))),
        RExprKind::Binary(op, a, b) => {
            let (a, b) = (lower_rexpr(a)?, lower_rexpr(b)?);
            match op {
                BinaryOp::And => Ok(ConstraintExpr::And(Box::new(a), Box::new(b))),
                BinaryOp::Or => Ok(ConstraintExpr::Or(Box::new(a), Box::new(b))),
                BinaryOp::Implies => Ok(ConstraintExpr::Implies(Box::new(a), Box::new(b))),
                _ => Err(ModelError::Type {
                    pos: expr.pos,
                    message: "feature constraints may only use active(...), !, &, | and =>".into(),
                }),
            }
        }
        _ => Err(ModelError::Type {
            pos: expr.pos,
            message: "feature constraints may only use active(...), !, &, | and =>".into(),
        }),
    }
}

/// Name-resolution context shared by the typechecker and property
/// resolution.
struct Resolver<'a> {
    constants: &'a BTreeMap<String, Value>,
    formulas: &'a HashMap<String, Expr>,
    vars: &'a HashMap<String, usize>,
    features: &'a HashMap<String, usize>,
    stack: Vec<String>,
}

impl Resolver<'_> {
    fn resolve_bool(&mut self, expr: &Expr, what: &str) -> Result<RExpr, ModelError> {
        let (r, ty) = self.resolve(expr)?;
        if ty != TypeName::Bool {
            return Err(ModelError::Type {
                pos: expr.pos,
                message: format!("{what} must be bool, got {ty}"),
            });
        }
        Ok(fold_constants(&r))
    }

    fn resolve(&mut self, expr: &Expr) -> Result<(RExpr, TypeName), ModelError> {
        let pos = expr.pos;
        match &expr.kind {
            ExprKind::IntLit(n) => Ok((RExpr::new(RExprKind::Int(*n), pos), TypeName::Int)),
            ExprKind::DoubleLit(r, _) => {
                Ok((RExpr::new(RExprKind::Double(r.clone()), pos), TypeName::Double))
            }
            ExprKind::BoolLit(b) => Ok((RExpr::new(RExprKind::Bool(*b), pos), TypeName::Bool)),
            ExprKind::Ident(name) => {
                if let Some(value) = self.constants.get(name) {
                    let (kind, ty) = match value {
                        Value::Int(n) => (RExprKind::Int(*n), TypeName::Int),
                        Value::Double(r) => (RExprKind::Double(r.clone()), TypeName::Double),
                        Value::Bool(b) => (RExprKind::Bool(*b), TypeName::Bool),
                    };
                    return Ok((RExpr::new(kind, pos), ty));
                }
                if let Some(body) = self.formulas.get(name) {
                    if self.stack.contains(name) {
                        return Err(ModelError::CyclicDefinition { pos, name: name.clone() });
                    }
                    self.stack.push(name.clone());
                    let result = self.resolve(body);
                    self.stack.pop();
                    return result;
                }
                if let Some(idx) = self.vars.get(name) {
                    return Ok((RExpr::new(RExprKind::Var(*idx), pos), TypeName::Int));
                }
                Err(ModelError::UndefinedIdent { pos, name: name.clone() })
            }
            ExprKind::Active(name) => {
                let idx = self
                    .features
                    .get(name)
                    .ok_or_else(|| ModelError::UndefinedIdent { pos, name: name.clone() })?;
                Ok((RExpr::new(RExprKind::Active(*idx), pos), TypeName::Bool))
            }
            ExprKind::Unary(op, operand) => {
                let (r, ty) = self.resolve(operand)?;
                match op {
                    UnaryOp::Neg => {
                        if ty == TypeName::Bool {
                            return Err(ModelError::Type {
                                pos,
                                message: "`-` expects a numeric operand, got bool".into(),
                            });
                        }
                        Ok((RExpr::new(RExprKind::Unary(*op, Box::new(r)), pos), ty))
                    }
                    UnaryOp::Not => {
                        if ty != TypeName::Bool {
                            return Err(ModelError::Type {
                                pos,
                                message: format!("`!` expects a bool operand, got {ty}"),
                            });
                        }
                        Ok((RExpr::new(RExprKind::Unary(*op, Box::new(r)), pos), TypeName::Bool))
                    }
                }
            }
            ExprKind::Binary(op, lhs, rhs) => {
                let (l, lt) = self.resolve(lhs)?;
                let (r, rt) = self.resolve(rhs)?;
                let node = |k| RExpr::new(k, pos);
                use BinaryOp::*;
                let result_ty = match op {
                    Add | Sub | Mul => {
                        self.expect_numeric(pos, *op, lt)?;
                        self.expect_numeric(pos, *op, rt)?;
                        if lt == TypeName::Int && rt == TypeName::Int {
                            TypeName::Int
                        } else {
                            TypeName::Double
                        }
                    }
                    Div => {
                        self.expect_numeric(pos, *op, lt)?;
                        self.expect_numeric(pos, *op, rt)?;
                        TypeName::Double
                    }
                    Eq | Ne => {
                        let both_bool = lt == TypeName::Bool && rt == TypeName::Bool;
                        let both_num = lt != TypeName::Bool && rt != TypeName::Bool;
                        if !(both_bool || both_num) {
                            return Err(ModelError::Type {
                                pos,
                                message: format!(
                                    "`{}` expects operands of the same kind, got {lt} and {rt}",
                                    super::pretty_op(*op)
                                ),
                            });
                        }
                        TypeName::Bool
                    }
                    Lt | Le | Gt | Ge => {
                        self.expect_numeric(pos, *op, lt)?;
                        self.expect_numeric(pos, *op, rt)?;
                        TypeName::Bool
                    }
                    And | Or | Implies => {
                        self.expect_bool(pos, *op, lt)?;
                        self.expect_bool(pos, *op, rt)?;
                        TypeName::Bool
                    }
                };
                Ok((node(RExprKind::Binary(*op, Box::new(l), Box::new(r))), result_ty))
            }
            ExprKind::Ite(cond, then_e, else_e) => {
                let (c, ct) = self.resolve(cond)?;
                if ct != TypeName::Bool {
                    return Err(ModelError::Type {
                        pos,
                        message: format!("ternary condition must be bool, got {ct}"),
                    });
                }
                let (t, tt) = self.resolve(then_e)?;
                let (e, et) = self.resolve(else_e)?;
                let ty = match (tt, et) {
                    (TypeName::Bool, TypeName::Bool) => TypeName::Bool,
                    (TypeName::Int, TypeName::Int) => TypeName::Int,
                    (TypeName::Bool, _) | (_, TypeName::Bool) => {
                        return Err(ModelError::Type {
                            pos,
                            message: format!("ternary branches disagree: {tt} vs {et}"),
                        })
                    }
                    _ => TypeName::Double,
                };
                Ok((
                    RExpr::new(RExprKind::Ite(Box::new(c), Box::new(t), Box::new(e)), pos),
                    ty,
                ))
            }
            ExprKind::Call(builtin, args) => {
                let mut resolved = Vec::new();
                let mut types = Vec::new();
                for a in args {
                    let (r, ty) = self.resolve(a)?;
                    if ty == TypeName::Bool {
                        return Err(ModelError::Type {
                            pos,
                            message: format!("{}() expects numeric arguments, got bool", builtin.name()),
                        });
                    }
                    resolved.push(r);
                    types.push(ty);
                }
                let ty = match builtin {
                    Builtin::Round | Builtin::Floor | Builtin::Ceil => TypeName::Int,
                    Builtin::Min | Builtin::Max => {
                        if types.iter().all(|t| *t == TypeName::Int) {
                            TypeName::Int
                        } else {
                            TypeName::Double
                        }
                    }
                };
                Ok((RExpr::new(RExprKind::Call(*builtin, resolved), pos), ty))
            }
        }
    }

    fn expect_numeric(&self, pos: Pos, op: BinaryOp, ty: TypeName) -> Result<(), ModelError> {
        if ty == TypeName::Bool {
            return Err(ModelError::Type {
                pos,
                message: format!("`{}` expects numeric operands, got bool", super::pretty_op(op)),
            });
        }
        Ok(())
    }

    fn expect_bool(&self, pos: Pos, op: BinaryOp, ty: TypeName) -> Result<(), ModelError> {
        if ty != TypeName::Bool {
            return Err(ModelError::Type {
                pos,
                message: format!("`{}` expects bool operands, got {ty}", super::pretty_op(op)),
            });
        }
        Ok(())
    }
}
