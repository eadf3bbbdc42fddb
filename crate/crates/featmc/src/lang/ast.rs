//! Position-annotated syntax trees for the modeling and property languages.

use crate::feature_model::GroupKind;
use num::BigRational;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Round,
    Floor,
    Ceil,
    Min,
    Max,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Round => "round",
            Builtin::Floor => "floor",
            Builtin::Ceil => "ceil",
            Builtin::Min => "min",
            Builtin::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(i64),
    /// Exact value plus the source spelling, kept for faithful printing.
    DoubleLit(BigRational, String),
    BoolLit(bool),
    Ident(String),
    Active(String),
    Call(Builtin, Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeName {
    Int,
    Double,
    Bool,
}

impl std::fmt::Display for TypeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TypeName::Int => write!(f, "int"),
            TypeName::Double => write!(f, "double"),
            TypeName::Bool => write!(f, "bool"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: TypeName,
    pub default: Option<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaDecl {
    pub name: String,
    pub expr: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDecl {
    pub name: String,
    pub expr: Expr,
    pub pos: Pos,
}

/// `constraint a requires b;` is sugar for `constraint active(a) => active(b);`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintDecl {
    Requires { from: String, to: String, pos: Pos },
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItemDecl {
    /// `None` for state rewards; `Some(label)` for transition rewards
    /// (`label` itself optional for unlabeled commands).
    pub action: Option<Option<String>>,
    pub guard: Expr,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardsDecl {
    pub name: String,
    pub items: Vec<RewardItemDecl>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDecl {
    pub name: String,
    pub is_root: bool,
    pub group: Option<(GroupKind, Vec<String>)>,
    pub modules: Vec<String>,
    pub rewards: Vec<RewardsDecl>,
    pub constraints: Vec<ConstraintDecl>,
    pub initial_constraints: Vec<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub lo: Expr,
    pub hi: Expr,
    pub init: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignDecl {
    pub var: String,
    pub value: Expr,
    pub pos: Pos,
}

/// `true` (no assignments) or a conjunction of primed assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDecl {
    pub assignments: Vec<AssignDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchDecl {
    /// `None` for the implicit probability-1 single branch.
    pub prob: Option<Expr>,
    pub update: UpdateDecl,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandDecl {
    pub action: Option<String>,
    pub guard: Expr,
    pub branches: Vec<BranchDecl>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDecl {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<CommandDecl>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchDecl {
    Activate(String, Pos),
    Deactivate(String, Pos),
}

/// `true` (no switches) or a conjunction of activate/deactivate calls.
#[derive(Debug, Clone, PartialEq)]
pub struct CtrlUpdateDecl {
    pub switches: Vec<SwitchDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtrlBranchDecl {
    pub prob: Option<Expr>,
    pub update: CtrlUpdateDecl,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtrlCommandDecl {
    pub action: Option<String>,
    pub guard: Expr,
    pub branches: Vec<CtrlBranchDecl>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDecl {
    pub commands: Vec<CtrlCommandDecl>,
    pub pos: Pos,
}

/// Parsed model file, in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelAst {
    pub constants: Vec<ConstDecl>,
    pub formulas: Vec<FormulaDecl>,
    pub labels: Vec<LabelDecl>,
    pub features: Vec<FeatureDecl>,
    pub constraints: Vec<ConstraintDecl>,
    pub initial_constraints: Vec<Expr>,
    pub modules: Vec<ModuleDecl>,
    pub controller: Option<ControllerDecl>,
}

// ---- property language ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Min,
    Max,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Min => write!(f, "min"),
            Mode::Max => write!(f, "max"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Min,
    Max,
    Avg,
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Aggregate::Min => write!(f, "min"),
            Aggregate::Max => write!(f, "max"),
            Aggregate::Avg => write!(f, "avg"),
        }
    }
}

/// A state-set operand: a quoted label or a boolean state expression.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSetAst {
    Label(String),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathAst {
    /// `F phi` or, with a bound, `F<=k phi`.
    Eventually { bound: Option<Expr>, target: StateSetAst },
    /// `G phi`.
    Globally(StateSetAst),
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryAst {
    Prob { mode: Mode, path: PathAst },
    Reward { structure: String, mode: Mode, target: StateSetAst },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyAst {
    Query(QueryAst),
    Filter { agg: Aggregate, inner: QueryAst, set: StateSetAst },
}

/// Parsed property file: label definitions plus one query per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropsAst {
    pub labels: Vec<LabelDecl>,
    pub properties: Vec<PropertyAst>,
}
