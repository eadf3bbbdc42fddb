//! Recursive-descent parsers for model and property files.

use super::ast::*;
use super::lexer::{lex, Keyword, Token, TokenKind};
use super::ModelError;
use crate::feature_model::GroupKind;

/// Parses a model file into an AST. Comments (`//`) are ignored; errors
/// carry a 1-based line:column position.
pub fn parse_model(text: &str) -> Result<ModelAst, ModelError> {
    let tokens = lex(text)?;
    let mut p = Parser::new(tokens);
    p.model()
}

/// Parses a property file: `label` definitions and queries, each
/// terminated by `;`. `${...}` interpolation is accepted and treated as
/// plain expression content.
pub fn parse_properties(text: &str) -> Result<PropsAst, ModelError> {
    let tokens = lex(text)?;
    let mut p = Parser::new(tokens);
    p.props()
}

/// Parses a standalone expression (command-line state sets).
pub fn parse_expression(text: &str) -> Result<Expr, ModelError> {
    let tokens = lex(text)?;
    let mut p = Parser::new(tokens);
    let e = p.expr()?;
    p.expect(TokenKind::Eof)?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, idx: 0 }
    }

    fn peek(&self) -> &TokenKind {
        &self.tokens[self.idx].kind
    }

    fn peek_at(&self, offset: usize) -> &TokenKind {
        let i = (self.idx + offset).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        self.eat(&TokenKind::Kw(kw))
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, ModelError> {
        if *self.peek() == kind {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[kind.describe()]))
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> Result<Token, ModelError> {
        self.expect(TokenKind::Kw(kw))
    }

    fn expect_ident(&mut self) -> Result<(String, Pos), ModelError> {
        let pos = self.pos();
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                self.bump();
                Ok((name, pos))
            }
            _ => Err(self.unexpected(&["identifier".into()])),
        }
    }

    fn expect_string(&mut self) -> Result<(String, Pos), ModelError> {
        let pos = self.pos();
        match self.peek().clone() {
            TokenKind::StringLit(s) => {
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected(&["string literal".into()])),
        }
    }

    fn unexpected(&self, expected: &[String]) -> ModelError {
        ModelError::Syntax {
            pos: self.pos(),
            message: format!(
                "found {}, expected {}",
                self.peek().describe(),
                expected.join(" or ")
            ),
        }
    }

    // ---- model grammar ----

    fn model(&mut self) -> Result<ModelAst, ModelError> {
        let mut ast = ModelAst::default();
        if *self.peek() == TokenKind::Eof && self.tokens.len() == 1 {
            return Err(ModelError::Syntax {
                pos: Pos::new(1, 1),
                message: "empty input".into(),
            });
        }
        loop {
            match self.peek().clone() {
                TokenKind::Eof => break,
                TokenKind::Kw(Keyword::Const) => ast.constants.push(self.const_decl()?),
                TokenKind::Kw(Keyword::Formula) => ast.formulas.push(self.formula_decl()?),
                TokenKind::Kw(Keyword::Label) => ast.labels.push(self.label_decl()?),
                TokenKind::Kw(Keyword::Root) | TokenKind::Kw(Keyword::Feature) => {
                    ast.features.push(self.feature_block()?)
                }
                TokenKind::Kw(Keyword::Constraint) => {
                    self.bump();
                    ast.constraints.push(self.constraint_body()?);
                }
                TokenKind::Kw(Keyword::Initial) => {
                    self.bump();
                    self.expect_kw(Keyword::Constraint)?;
                    let e = self.expr()?;
                    self.expect(TokenKind::Semi)?;
                    ast.initial_constraints.push(e);
                }
                TokenKind::Kw(Keyword::Module) => ast.modules.push(self.module_block()?),
                TokenKind::Kw(Keyword::Controller) => {
                    let ctrl = self.controller_block()?;
                    if ast.controller.is_some() {
                        return Err(ModelError::Syntax {
                            pos: ctrl.pos,
                            message: "a model may declare at most one controller".into(),
                        });
                    }
                    ast.controller = Some(ctrl);
                }
                _ => {
                    return Err(self.unexpected(&[
                        "`const`".into(),
                        "`formula`".into(),
                        "`label`".into(),
                        "`feature`".into(),
                        "`module`".into(),
                        "`controller`".into(),
                        "`constraint`".into(),
                    ]))
                }
            }
        }
        Ok(ast)
    }

    fn const_decl(&mut self) -> Result<ConstDecl, ModelError> {
        let pos = self.pos();
        self.expect_kw(Keyword::Const)?;
        let ty = match self.peek() {
            TokenKind::Kw(Keyword::Int) => {
                self.bump();
                TypeName::Int
            }
            TokenKind::Kw(Keyword::Double) => {
                self.bump();
                TypeName::Double
            }
            TokenKind::Kw(Keyword::Bool) => {
                self.bump();
                TypeName::Bool
            }
            _ => return Err(self.unexpected(&["`int`".into(), "`double`".into(), "`bool`".into()])),
        };
        let (name, _) = self.expect_ident()?;
        let default = if self.eat(&TokenKind::Eq) {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(TokenKind::Semi)?;
        Ok(ConstDecl { name, ty, default, pos })
    }

    fn formula_decl(&mut self) -> Result<FormulaDecl, ModelError> {
        let pos = self.pos();
        self.expect_kw(Keyword::Formula)?;
        let (name, _) = self.expect_ident()?;
        self.expect(TokenKind::Eq)?;
        let expr = self.expr()?;
        self.expect(TokenKind::Semi)?;
        Ok(FormulaDecl { name, expr, pos })
    }

    fn label_decl(&mut self) -> Result<LabelDecl, ModelError> {
        let pos = self.pos();
        self.expect_kw(Keyword::Label)?;
        let (name, _) = self.expect_string()?;
        self.expect(TokenKind::Eq)?;
        let expr = self.expr()?;
        self.expect(TokenKind::Semi)?;
        Ok(LabelDecl { name, expr, pos })
    }

    fn constraint_body(&mut self) -> Result<ConstraintDecl, ModelError> {
        // `a requires b;` sugar, otherwise a boolean expression.
        if let (TokenKind::Ident(from), TokenKind::Kw(Keyword::Requires)) =
            (self.peek().clone(), self.peek_at(1).clone())
        {
            let pos = self.pos();
            self.bump();
            self.bump();
            let (to, _) = self.expect_ident()?;
            self.expect(TokenKind::Semi)?;
            return Ok(ConstraintDecl::Requires { from, to, pos });
        }
        let e = self.expr()?;
        self.expect(TokenKind::Semi)?;
        Ok(ConstraintDecl::Expr(e))
    }

    fn feature_block(&mut self) -> Result<FeatureDecl, ModelError> {
        let pos = self.pos();
        let is_root = self.eat_kw(Keyword::Root);
        self.expect_kw(Keyword::Feature)?;
        let name = if is_root {
            "root".to_string()
        } else {
            self.expect_ident()?.0
        };
        let mut decl = FeatureDecl {
            name,
            is_root,
            group: None,
            modules: Vec::new(),
            rewards: Vec::new(),
            constraints: Vec::new(),
            initial_constraints: Vec::new(),
            pos,
        };
        loop {
            match self.peek().clone() {
                TokenKind::Kw(Keyword::EndFeature) => {
                    self.bump();
                    break;
                }
                TokenKind::Kw(Keyword::All) | TokenKind::Kw(Keyword::One) => {
                    let kind = if self.eat_kw(Keyword::All) {
                        GroupKind::AllOf
                    } else {
                        self.bump();
                        GroupKind::OneOf
                    };
                    self.expect_kw(Keyword::Of)?;
                    let children = self.ident_list()?;
                    self.expect(TokenKind::Semi)?;
                    if decl.group.is_some() {
                        return Err(ModelError::Syntax {
                            pos,
                            message: format!("feature `{}` declares two groups", decl.name),
                        });
                    }
                    decl.group = Some((kind, children));
                }
                TokenKind::Kw(Keyword::Modules) => {
                    self.bump();
                    decl.modules = self.ident_list()?;
                    self.expect(TokenKind::Semi)?;
                }
                TokenKind::Kw(Keyword::Rewards) => decl.rewards.push(self.rewards_block()?),
                TokenKind::Kw(Keyword::Constraint) => {
                    self.bump();
                    decl.constraints.push(self.constraint_body()?);
                }
                TokenKind::Kw(Keyword::Initial) => {
                    self.bump();
                    self.expect_kw(Keyword::Constraint)?;
                    let e = self.expr()?;
                    self.expect(TokenKind::Semi)?;
                    decl.initial_constraints.push(e);
                }
                _ => {
                    return Err(self.unexpected(&[
                        "`all of`".into(),
                        "`one of`".into(),
                        "`modules`".into(),
                        "`rewards`".into(),
                        "`constraint`".into(),
                        "`endfeature`".into(),
                    ]))
                }
            }
        }
        Ok(decl)
    }

    fn ident_list(&mut self) -> Result<Vec<String>, ModelError> {
        let mut names = vec![self.expect_ident()?.0];
        while self.eat(&TokenKind::Comma) {
            names.push(self.expect_ident()?.0);
        }
        Ok(names)
    }

    fn rewards_block(&mut self) -> Result<RewardsDecl, ModelError> {
        let pos = self.pos();
        self.expect_kw(Keyword::Rewards)?;
        let (name, _) = self.expect_string()?;
        let mut items = Vec::new();
        while !self.eat_kw(Keyword::EndRewards) {
            let item_pos = self.pos();
            let action = if self.eat(&TokenKind::LBracket) {
                let label = match self.peek().clone() {
                    TokenKind::Ident(name) => {
                        self.bump();
                        Some(name)
                    }
                    _ => None,
                };
                self.expect(TokenKind::RBracket)?;
                Some(label)
            } else {
                None
            };
            let guard = self.expr()?;
            self.expect(TokenKind::Colon)?;
            let value = self.expr()?;
            self.expect(TokenKind::Semi)?;
            items.push(RewardItemDecl { action, guard, value, pos: item_pos });
        }
        Ok(RewardsDecl { name, items, pos })
    }

    fn module_block(&mut self) -> Result<ModuleDecl, ModelError> {
        let pos = self.pos();
        self.expect_kw(Keyword::Module)?;
        let (name, _) = self.expect_ident()?;
        let mut vars = Vec::new();
        let mut commands = Vec::new();
        loop {
            match self.peek().clone() {
                TokenKind::Kw(Keyword::EndModule) => {
                    self.bump();
                    break;
                }
                TokenKind::Ident(_) => vars.push(self.var_decl()?),
                TokenKind::LBracket => {
                    let (action, guard, cmd_pos) = self.command_head()?;
                    let branches = self.branches()?;
                    self.expect(TokenKind::Semi)?;
                    commands.push(CommandDecl { action, guard, branches, pos: cmd_pos });
                }
                _ => {
                    return Err(self.unexpected(&[
                        "variable declaration".into(),
                        "command".into(),
                        "`endmodule`".into(),
                    ]))
                }
            }
        }
        Ok(ModuleDecl { name, vars, commands, pos })
    }

    fn var_decl(&mut self) -> Result<VarDecl, ModelError> {
        let pos = self.pos();
        let (name, _) = self.expect_ident()?;
        self.expect(TokenKind::Colon)?;
        self.expect(TokenKind::LBracket)?;
        let lo = self.expr()?;
        self.expect(TokenKind::DotDot)?;
        let hi = self.expr()?;
        self.expect(TokenKind::RBracket)?;
        self.expect_kw(Keyword::Init)?;
        let init = self.expr()?;
        self.expect(TokenKind::Semi)?;
        Ok(VarDecl { name, lo, hi, init, pos })
    }

    fn command_head(&mut self) -> Result<(Option<String>, Expr, Pos), ModelError> {
        let pos = self.pos();
        self.expect(TokenKind::LBracket)?;
        let action = match self.peek().clone() {
            TokenKind::Ident(name) => {
                self.bump();
                Some(name)
            }
            _ => None,
        };
        self.expect(TokenKind::RBracket)?;
        let guard = self.expr()?;
        self.expect(TokenKind::Arrow)?;
        Ok((action, guard, pos))
    }

    fn branches(&mut self) -> Result<Vec<BranchDecl>, ModelError> {
        let mut branches = vec![self.branch()?];
        while self.eat(&TokenKind::Plus) {
            branches.push(self.branch()?);
        }
        Ok(branches)
    }

    /// One branch: `prob : update` or a bare update (implicit probability 1,
    /// only meaningful as the single branch).
    fn branch(&mut self) -> Result<BranchDecl, ModelError> {
        let pos = self.pos();
        if self.at_update_start() {
            let update = self.update()?;
            return Ok(BranchDecl { prob: None, update, pos });
        }
        let prob = self.expr()?;
        self.expect(TokenKind::Colon)?;
        let update = self.update()?;
        Ok(BranchDecl { prob: Some(prob), update, pos })
    }

    /// An update starts with `(x'=` or with `true` not followed by `:`.
    fn at_update_start(&self) -> bool {
        match self.peek() {
            TokenKind::LParen => {
                matches!(self.peek_at(1), TokenKind::Ident(_)) && *self.peek_at(2) == TokenKind::Prime
            }
            TokenKind::Kw(Keyword::True) => *self.peek_at(1) != TokenKind::Colon,
            _ => false,
        }
    }

    fn update(&mut self) -> Result<UpdateDecl, ModelError> {
        if self.eat_kw(Keyword::True) {
            return Ok(UpdateDecl { assignments: Vec::new() });
        }
        let mut assignments = vec![self.assignment()?];
        while *self.peek() == TokenKind::Amp && self.at_assignment(1) {
            self.bump();
            assignments.push(self.assignment()?);
        }
        Ok(UpdateDecl { assignments })
    }

    fn at_assignment(&self, offset: usize) -> bool {
        *self.peek_at(offset) == TokenKind::LParen
            && matches!(self.peek_at(offset + 1), TokenKind::Ident(_))
            && *self.peek_at(offset + 2) == TokenKind::Prime
    }

    fn assignment(&mut self) -> Result<AssignDecl, ModelError> {
        let pos = self.pos();
        self.expect(TokenKind::LParen)?;
        let (var, _) = self.expect_ident()?;
        self.expect(TokenKind::Prime)?;
        self.expect(TokenKind::Eq)?;
        let value = self.expr()?;
        self.expect(TokenKind::RParen)?;
        Ok(AssignDecl { var, value, pos })
    }

    fn controller_block(&mut self) -> Result<ControllerDecl, ModelError> {
        let pos = self.pos();
        self.expect_kw(Keyword::Controller)?;
        let mut commands = Vec::new();
        while !self.eat_kw(Keyword::EndController) {
            let (action, guard, cmd_pos) = self.command_head()?;
            let mut branches = vec![self.ctrl_branch()?];
            while self.eat(&TokenKind::Plus) {
                branches.push(self.ctrl_branch()?);
            }
            self.expect(TokenKind::Semi)?;
            commands.push(CtrlCommandDecl { action, guard, branches, pos: cmd_pos });
        }
        Ok(ControllerDecl { commands, pos })
    }

    fn ctrl_branch(&mut self) -> Result<CtrlBranchDecl, ModelError> {
        let pos = self.pos();
        if self.at_ctrl_update_start() {
            let update = self.ctrl_update()?;
            return Ok(CtrlBranchDecl { prob: None, update, pos });
        }
        let prob = self.expr()?;
        self.expect(TokenKind::Colon)?;
        let update = self.ctrl_update()?;
        Ok(CtrlBranchDecl { prob: Some(prob), update, pos })
    }

    fn at_ctrl_update_start(&self) -> bool {
        match self.peek() {
            TokenKind::Kw(Keyword::Activate) | TokenKind::Kw(Keyword::Deactivate) => true,
            TokenKind::Kw(Keyword::True) => *self.peek_at(1) != TokenKind::Colon,
            _ => false,
        }
    }

    fn ctrl_update(&mut self) -> Result<CtrlUpdateDecl, ModelError> {
        if self.eat_kw(Keyword::True) {
            return Ok(CtrlUpdateDecl { switches: Vec::new() });
        }
        let mut switches = vec![self.switch()?];
        while self.eat(&TokenKind::Amp) {
            switches.push(self.switch()?);
        }
        Ok(CtrlUpdateDecl { switches })
    }

    fn switch(&mut self) -> Result<SwitchDecl, ModelError> {
        let pos = self.pos();
        let activate = match self.peek() {
            TokenKind::Kw(Keyword::Activate) => true,
            TokenKind::Kw(Keyword::Deactivate) => false,
            _ => return Err(self.unexpected(&["`activate`".into(), "`deactivate`".into()])),
        };
        self.bump();
        self.expect(TokenKind::LParen)?;
        let (name, _) = self.expect_ident()?;
        self.expect(TokenKind::RParen)?;
        Ok(if activate {
            SwitchDecl::Activate(name, pos)
        } else {
            SwitchDecl::Deactivate(name, pos)
        })
    }

    // ---- property grammar ----

    fn props(&mut self) -> Result<PropsAst, ModelError> {
        let mut ast = PropsAst::default();
        loop {
            match self.peek().clone() {
                TokenKind::Eof => break,
                TokenKind::Kw(Keyword::Label) => ast.labels.push(self.label_decl()?),
                _ => {
                    let prop = self.property()?;
                    self.expect(TokenKind::Semi)?;
                    ast.properties.push(prop);
                }
            }
        }
        Ok(ast)
    }

    fn property(&mut self) -> Result<PropertyAst, ModelError> {
        if self.eat_kw(Keyword::Filter) {
            self.expect(TokenKind::LParen)?;
            let agg = match self.peek() {
                TokenKind::Kw(Keyword::Min) => Aggregate::Min,
                TokenKind::Kw(Keyword::Max) => Aggregate::Max,
                TokenKind::Kw(Keyword::Avg) => Aggregate::Avg,
                _ => {
                    return Err(self.unexpected(&["`min`".into(), "`max`".into(), "`avg`".into()]))
                }
            };
            self.bump();
            self.expect(TokenKind::Comma)?;
            let inner = self.query()?;
            self.expect(TokenKind::Comma)?;
            let set = self.state_set()?;
            self.expect(TokenKind::RParen)?;
            return Ok(PropertyAst::Filter { agg, inner, set });
        }
        Ok(PropertyAst::Query(self.query()?))
    }

    fn query(&mut self) -> Result<QueryAst, ModelError> {
        match self.peek().clone() {
            TokenKind::Ident(name) if name == "Pmin" || name == "Pmax" => {
                self.bump();
                let mode = if name == "Pmin" { Mode::Min } else { Mode::Max };
                self.expect(TokenKind::Eq)?;
                self.expect(TokenKind::Question)?;
                self.expect(TokenKind::LBracket)?;
                let path = self.path()?;
                self.expect(TokenKind::RBracket)?;
                Ok(QueryAst::Prob { mode, path })
            }
            TokenKind::Ident(name) if name == "R" => {
                self.bump();
                self.expect(TokenKind::LBrace)?;
                let (structure, _) = self.expect_string()?;
                self.expect(TokenKind::RBrace)?;
                let mode = match self.peek() {
                    TokenKind::Kw(Keyword::Min) => Mode::Min,
                    TokenKind::Kw(Keyword::Max) => Mode::Max,
                    _ => return Err(self.unexpected(&["`min`".into(), "`max`".into()])),
                };
                self.bump();
                self.expect(TokenKind::Eq)?;
                self.expect(TokenKind::Question)?;
                self.expect(TokenKind::LBracket)?;
                let f = self.expect_ident()?;
                if f.0 != "F" {
                    return Err(ModelError::Syntax {
                        pos: f.1,
                        message: "reward queries support the `F` path operator only".into(),
                    });
                }
                let target = self.state_set()?;
                self.expect(TokenKind::RBracket)?;
                Ok(QueryAst::Reward { structure, mode, target })
            }
            _ => Err(self.unexpected(&["`Pmin`".into(), "`Pmax`".into(), "`R`".into(), "`filter`".into()])),
        }
    }

    fn path(&mut self) -> Result<PathAst, ModelError> {
        let (op, pos) = self.expect_ident()?;
        match op.as_str() {
            "F" => {
                let bound = if self.eat(&TokenKind::Le) {
                    Some(self.expr()?)
                } else {
                    None
                };
                let target = self.state_set()?;
                Ok(PathAst::Eventually { bound, target })
            }
            "G" => Ok(PathAst::Globally(self.state_set()?)),
            other => Err(ModelError::Syntax {
                pos,
                message: format!("unknown path operator `{other}`, expected `F` or `G`"),
            }),
        }
    }

    fn state_set(&mut self) -> Result<StateSetAst, ModelError> {
        if let TokenKind::StringLit(label) = self.peek().clone() {
            self.bump();
            return Ok(StateSetAst::Label(label));
        }
        Ok(StateSetAst::Expr(self.expr()?))
    }

    // ---- expressions ----

    pub(super) fn expr(&mut self) -> Result<Expr, ModelError> {
        self.ite()
    }

    fn ite(&mut self) -> Result<Expr, ModelError> {
        let cond = self.implies()?;
        if self.eat(&TokenKind::Question) {
            let pos = cond.pos;
            let then_e = self.expr()?;
            self.expect(TokenKind::Colon)?;
            let else_e = self.ite()?;
            return Ok(Expr::new(
                ExprKind::Ite(Box::new(cond), Box::new(then_e), Box::new(else_e)),
                pos,
            ));
        }
        Ok(cond)
    }

    fn implies(&mut self) -> Result<Expr, ModelError> {
        let lhs = self.or()?;
        if self.eat(&TokenKind::Implies) {
            let pos = lhs.pos;
            let rhs = self.implies()?;
            return Ok(Expr::new(
                ExprKind::Binary(BinaryOp::Implies, Box::new(lhs), Box::new(rhs)),
                pos,
            ));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.and()?;
        while self.eat(&TokenKind::Pipe) {
            let pos = lhs.pos;
            let rhs = self.and()?;
            lhs = Expr::new(ExprKind::Binary(BinaryOp::Or, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.not()?;
        while self.eat(&TokenKind::Amp) {
            let pos = lhs.pos;
            let rhs = self.not()?;
            lhs = Expr::new(ExprKind::Binary(BinaryOp::And, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ModelError> {
        if *self.peek() == TokenKind::Bang {
            let pos = self.pos();
            self.bump();
            let operand = self.not()?;
            return Ok(Expr::new(ExprKind::Unary(UnaryOp::Not, Box::new(operand)), pos));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ModelError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            TokenKind::Eq => BinaryOp::Eq,
            TokenKind::Neq => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Le => BinaryOp::Le,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Ge => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let pos = lhs.pos;
        let rhs = self.additive()?;
        Ok(Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos))
    }

    fn additive(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => break,
            };
            self.bump();
            let pos = lhs.pos;
            let rhs = self.multiplicative()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => break,
            };
            self.bump();
            let pos = lhs.pos;
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ModelError> {
        if *self.peek() == TokenKind::Minus {
            let pos = self.pos();
            self.bump();
            let operand = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnaryOp::Neg, Box::new(operand)), pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ModelError> {
        let pos = self.pos();
        match self.peek().clone() {
            TokenKind::IntLit(n) => {
                self.bump();
                Ok(Expr::new(ExprKind::IntLit(n), pos))
            }
            TokenKind::DoubleLit(value, text) => {
                self.bump();
                Ok(Expr::new(ExprKind::DoubleLit(value, text), pos))
            }
            TokenKind::Kw(Keyword::True) => {
                self.bump();
                Ok(Expr::new(ExprKind::BoolLit(true), pos))
            }
            TokenKind::Kw(Keyword::False) => {
                self.bump();
                Ok(Expr::new(ExprKind::BoolLit(false), pos))
            }
            TokenKind::Ident(name) => {
                self.bump();
                Ok(Expr::new(ExprKind::Ident(name), pos))
            }
            TokenKind::Kw(Keyword::Active) => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let (name, _) = self.expect_ident()?;
                self.expect(TokenKind::RParen)?;
                Ok(Expr::new(ExprKind::Active(name), pos))
            }
            TokenKind::Kw(kw @ (Keyword::Round | Keyword::Floor | Keyword::Ceil)) => {
                self.bump();
                let builtin = match kw {
                    Keyword::Round => Builtin::Round,
                    Keyword::Floor => Builtin::Floor,
                    _ => Builtin::Ceil,
                };
                self.expect(TokenKind::LParen)?;
                let arg = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(Expr::new(ExprKind::Call(builtin, vec![arg]), pos))
            }
            TokenKind::Kw(kw @ (Keyword::Min | Keyword::Max)) => {
                self.bump();
                let builtin = if kw == Keyword::Min { Builtin::Min } else { Builtin::Max };
                self.expect(TokenKind::LParen)?;
                let a = self.expr()?;
                self.expect(TokenKind::Comma)?;
                let b = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(Expr::new(ExprKind::Call(builtin, vec![a, b]), pos))
            }
            TokenKind::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            // `${ expr }` property interpolation: the braces are stripped.
            TokenKind::Dollar => {
                self.bump();
                self.expect(TokenKind::LBrace)?;
                let e = self.expr()?;
                self.expect(TokenKind::RBrace)?;
                Ok(e)
            }
            _ => Err(self.unexpected(&["expression".into()])),
        }
    }
}
