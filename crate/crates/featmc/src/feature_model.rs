//! Feature tree with group decompositions, cross-tree constraints and
//! configuration validity.
//!
//! A [`Configuration`] is a bit-set of active features keyed by feature
//! index, so membership tests and hashing are constant-time. Both types are
//! immutable after construction and safe to share across threads.

use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// How a parent feature decomposes into its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// All children must be active whenever the parent is.
    AllOf,
    /// Exactly one child must be active whenever the parent is.
    OneOf,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::AllOf => write!(f, "all of"),
            GroupKind::OneOf => write!(f, "one of"),
        }
    }
}

/// Boolean expression over `active(f)` atoms, used for cross-tree and
/// initial-configuration constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintExpr {
    Active(usize),
    Const(bool),
    Not(Box<ConstraintExpr>),
    And(Box<ConstraintExpr>, Box<ConstraintExpr>),
    Or(Box<ConstraintExpr>, Box<ConstraintExpr>),
    Implies(Box<ConstraintExpr>, Box<ConstraintExpr>),
}

impl ConstraintExpr {
    pub fn eval(&self, config: Configuration) -> bool {
        match self {
            ConstraintExpr::Active(idx) => config.contains(*idx),
            ConstraintExpr::Const(b) => *b,
            ConstraintExpr::Not(e) => !e.eval(config),
            ConstraintExpr::And(a, b) => a.eval(config) && b.eval(config),
            ConstraintExpr::Or(a, b) => a.eval(config) || b.eval(config),
            ConstraintExpr::Implies(a, b) => !a.eval(config) || b.eval(config),
        }
    }
}

/// Set of active features, packed as a bit-vector keyed by feature index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Configuration(pub u64);

impl Configuration {
    pub const EMPTY: Configuration = Configuration(0);

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut bits = 0u64;
        for i in indices {
            bits |= 1 << i;
        }
        Configuration(bits)
    }

    pub fn contains(self, feature: usize) -> bool {
        self.0 & (1 << feature) != 0
    }

    pub fn with(self, feature: usize) -> Self {
        Configuration(self.0 | (1 << feature))
    }

    pub fn without(self, feature: usize) -> Self {
        Configuration(self.0 & !(1 << feature))
    }

    pub fn union(self, other: Configuration) -> Self {
        Configuration(self.0 | other.0)
    }

    pub fn difference(self, other: Configuration) -> Self {
        Configuration(self.0 & !other.0)
    }

    pub fn intersects(self, other: Configuration) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |i| self.0 & (1 << i) != 0)
    }

    /// Lexicographic comparison of the bit-vectors (bit 0 first, inactive
    /// before active). This is the order `enumerate_configurations` uses.
    pub fn lex_cmp(self, other: Configuration) -> std::cmp::Ordering {
        for i in 0..64 {
            let a = self.contains(i);
            let b = other.contains(i);
            if a != b {
                return a.cmp(&b);
            }
        }
        std::cmp::Ordering::Equal
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureModelError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("duplicate feature `{0}`")]
    DuplicateFeature(String),
    #[error("feature `{0}` already has a parent")]
    ParentConflict(String),
    #[error("feature `{0}` already has a group")]
    GroupConflict(String),
    #[error("feature model has no root")]
    NoRoot,
    #[error("feature `{0}` is not reachable from the root")]
    Disconnected(String),
    #[error("at most 64 features are supported, got {0}")]
    TooManyFeatures(usize),
}

/// Why a configuration fails validation. `Display` names the violated
/// group or constraint.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigViolation {
    #[error("root feature `{0}` is not active")]
    RootInactive(String),
    #[error("`all of` group of `{parent}` violated: child `{child}` is inactive")]
    AllOfViolated { parent: String, child: String },
    #[error("`one of` group of `{parent}` violated: {active} children active, expected exactly 1")]
    OneOfViolated { parent: String, active: usize },
    #[error("feature `{child}` is active but its parent `{parent}` is not")]
    OrphanActive { parent: String, child: String },
    #[error("cross-tree constraint `{0}` violated")]
    ConstraintViolated(String),
    #[error("unknown feature index {0} in configuration")]
    UnknownIndex(usize),
}

/// Rooted feature tree with groups, cross-tree constraints and an optional
/// initial-configuration constraint.
#[derive(Debug, Clone)]
pub struct FeatureModel {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    group: Vec<Option<(GroupKind, Vec<usize>)>>,
    root: usize,
    constraints: Vec<(ConstraintExpr, String)>,
    initial_constraint: Option<ConstraintExpr>,
    all_mask: u64,
}

impl FeatureModel {
    pub fn builder() -> FeatureModelBuilder {
        FeatureModelBuilder::default()
    }

    pub fn feature_count(&self) -> usize {
        self.names.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn parent_of(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    pub fn group_of(&self, idx: usize) -> Option<(GroupKind, &[usize])> {
        self.group[idx].as_ref().map(|(k, c)| (*k, c.as_slice()))
    }

    pub fn constraints(&self) -> &[(ConstraintExpr, String)] {
        &self.constraints
    }

    pub fn initial_constraint(&self) -> Option<&ConstraintExpr> {
        self.initial_constraint.as_ref()
    }

    /// Features without children; used for compact state displays.
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.names.len()).filter(|&i| self.group[i].is_none())
    }

    pub fn display_config(&self, config: Configuration) -> String {
        let parts: Vec<&str> = self
            .leaves()
            .filter(|&i| config.contains(i))
            .map(|i| self.names[i].as_str())
            .collect();
        format!("{{{}}}", parts.join(","))
    }

    /// Full validity check; the error names the violated group or
    /// constraint.
    pub fn check_configuration(&self, config: Configuration) -> Result<(), ConfigViolation> {
        if config.0 & !self.all_mask != 0 {
            let idx = (0..64).find(|&i| config.contains(i) && i >= self.names.len()).unwrap();
            return Err(ConfigViolation::UnknownIndex(idx));
        }
        if !config.contains(self.root) {
            return Err(ConfigViolation::RootInactive(self.names[self.root].clone()));
        }
        for idx in 0..self.names.len() {
            let active = config.contains(idx);
            if active {
                if let Some(parent) = self.parent[idx] {
                    if !config.contains(parent) {
                        return Err(ConfigViolation::OrphanActive {
                            parent: self.names[parent].clone(),
                            child: self.names[idx].clone(),
                        });
                    }
                }
                if let Some((kind, children)) = &self.group[idx] {
                    match kind {
                        GroupKind::AllOf => {
                            for &c in children {
                                if !config.contains(c) {
                                    return Err(ConfigViolation::AllOfViolated {
                                        parent: self.names[idx].clone(),
                                        child: self.names[c].clone(),
                                    });
                                }
                            }
                        }
                        GroupKind::OneOf => {
                            let n = children.iter().filter(|&&c| config.contains(c)).count();
                            if n != 1 {
                                return Err(ConfigViolation::OneOfViolated {
                                    parent: self.names[idx].clone(),
                                    active: n,
                                });
                            }
                        }
                    }
                }
            }
        }
        for (expr, text) in &self.constraints {
            if !expr.eval(config) {
                return Err(ConfigViolation::ConstraintViolated(text.clone()));
            }
        }
        Ok(())
    }

    /// True iff the configuration satisfies the tree, the groups and all
    /// cross-tree constraints.
    pub fn validate_configuration(&self, config: Configuration) -> bool {
        self.check_configuration(config).is_ok()
    }

    /// All valid configurations in lexicographic bit-vector order.
    ///
    /// Walks the tree from the root, branching only where groups permit it,
    /// then filters by the cross-tree constraints. The brute-force subset
    /// filter is kept as a test oracle.
    pub fn enumerate_configurations(&self) -> Vec<Configuration> {
        let mut out = Vec::new();
        self.expand(vec![self.root], Configuration::EMPTY.with(self.root), &mut out);
        out.sort_by(|a, b| a.lex_cmp(*b));
        out
    }

    // `work` holds active features whose group decisions are still pending;
    // inactive features never enter it, so their subtrees stay inactive.
    fn expand(&self, mut work: Vec<usize>, cfg: Configuration, out: &mut Vec<Configuration>) {
        let Some(feature) = work.pop() else {
            if self.constraints.iter().all(|(e, _)| e.eval(cfg)) {
                out.push(cfg);
            }
            return;
        };
        match &self.group[feature] {
            None => self.expand(work, cfg, out),
            Some((GroupKind::AllOf, children)) => {
                let mut cfg = cfg;
                for &c in children {
                    cfg = cfg.with(c);
                }
                work.extend(children.iter().copied());
                self.expand(work, cfg, out);
            }
            Some((GroupKind::OneOf, children)) => {
                for &c in children {
                    let mut branch_work = work.clone();
                    branch_work.push(c);
                    self.expand(branch_work, cfg.with(c), out);
                }
            }
        }
    }

    /// The unique configuration satisfying the initial constraint, or an
    /// error when it is missing or ambiguous.
    pub fn initial_configuration(&self) -> Result<Configuration, InitialConfigError> {
        let valid = self.enumerate_configurations();
        let matching: Vec<Configuration> = match &self.initial_constraint {
            Some(expr) => valid.into_iter().filter(|c| expr.eval(*c)).collect(),
            None => valid,
        };
        match matching.len() {
            0 => Err(InitialConfigError::NoneMatch),
            1 => Ok(matching[0]),
            n => Err(InitialConfigError::Ambiguous {
                count: n,
                first: self.display_config(matching[0]),
                second: self.display_config(matching[1]),
            }),
        }
    }

    /// Applies a feature switch: activates `activate`, deactivates
    /// `deactivate`, and validates the result. Re-activating an active
    /// feature or de-activating an inactive one is a no-op.
    pub fn apply_switch(
        &self,
        config: Configuration,
        activate: Configuration,
        deactivate: Configuration,
    ) -> Result<Configuration, SwitchError> {
        if activate.intersects(deactivate) {
            let idx = activate
                .indices()
                .find(|&i| deactivate.contains(i))
                .unwrap();
            return Err(SwitchError::Conflicting(self.names[idx].clone()));
        }
        let result = config.union(activate).difference(deactivate);
        self.check_configuration(result)
            .map_err(|violation| SwitchError::Invalid {
                result: self.display_config(result),
                violation,
            })?;
        Ok(result)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InitialConfigError {
    #[error("no valid configuration satisfies the initial constraint")]
    NoneMatch,
    #[error("initial constraint is ambiguous: {count} configurations match, e.g. {first} and {second}")]
    Ambiguous { count: usize, first: String, second: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwitchError {
    #[error("feature `{0}` is both activated and deactivated")]
    Conflicting(String),
    #[error("switch produces invalid configuration {result}: {violation}")]
    Invalid {
        result: String,
        violation: ConfigViolation,
    },
}

/// Incremental construction; `build` checks the tree shape.
#[derive(Debug, Default)]
pub struct FeatureModelBuilder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    group: Vec<Option<(GroupKind, Vec<usize>)>>,
    root: Option<usize>,
    constraints: Vec<(ConstraintExpr, String)>,
    initial_constraint: Option<ConstraintExpr>,
}

impl FeatureModelBuilder {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&idx) = self.index.get(name) {
            return idx;
        }
        let idx = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), idx);
        self.parent.push(None);
        self.group.push(None);
        idx
    }

    /// Declares the root feature. Must be called exactly once.
    pub fn root(&mut self, name: &str) -> Result<usize, FeatureModelError> {
        if self.root.is_some() {
            return Err(FeatureModelError::DuplicateFeature(name.to_string()));
        }
        let idx = self.intern(name);
        self.root = Some(idx);
        Ok(idx)
    }

    /// Declares a feature (idempotent; children named in groups are
    /// created on first mention).
    pub fn feature(&mut self, name: &str) -> usize {
        self.intern(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Attaches a group of children to `parent`.
    pub fn group<'a, I: IntoIterator<Item = &'a str>>(
        &mut self,
        parent: &str,
        kind: GroupKind,
        children: I,
    ) -> Result<(), FeatureModelError> {
        let p = self.intern(parent);
        if self.group[p].is_some() {
            return Err(FeatureModelError::GroupConflict(parent.to_string()));
        }
        let mut child_indices = Vec::new();
        for child in children {
            let c = self.intern(child);
            if self.parent[c].is_some() {
                return Err(FeatureModelError::ParentConflict(child.to_string()));
            }
            if c == p {
                return Err(FeatureModelError::ParentConflict(child.to_string()));
            }
            self.parent[c] = Some(p);
            child_indices.push(c);
        }
        self.group[p] = Some((kind, child_indices));
        Ok(())
    }

    /// Adds a cross-tree constraint; `text` is used in diagnostics.
    pub fn constraint(&mut self, expr: ConstraintExpr, text: &str) {
        self.constraints.push((expr, text.to_string()));
    }

    pub fn initial_constraint(&mut self, expr: ConstraintExpr) {
        self.initial_constraint = Some(expr);
    }

    pub fn build(self) -> Result<FeatureModel, FeatureModelError> {
        let root = self.root.ok_or(FeatureModelError::NoRoot)?;
        if self.names.len() > 64 {
            return Err(FeatureModelError::TooManyFeatures(self.names.len()));
        }
        // Every non-root feature needs a parent, and the parent chain must
        // reach the root (the builder cannot create cycles since `group`
        // rejects re-parenting, but orphan subtrees are possible).
        for idx in 0..self.names.len() {
            if idx == root {
                continue;
            }
            let mut cur = idx;
            let mut steps = 0;
            loop {
                match self.parent[cur] {
                    Some(p) => {
                        if p == root {
                            break;
                        }
                        cur = p;
                        steps += 1;
                        if steps > self.names.len() {
                            return Err(FeatureModelError::Disconnected(self.names[idx].clone()));
                        }
                    }
                    None => return Err(FeatureModelError::Disconnected(self.names[idx].clone())),
                }
            }
        }
        let all_mask = if self.names.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.names.len()) - 1
        };
        Ok(FeatureModel {
            names: self.names,
            parent: self.parent,
            group: self.group,
            root,
            constraints: self.constraints,
            initial_constraint: self.initial_constraint,
            all_mask,
        })
    }
}
