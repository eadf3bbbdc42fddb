//! Canonical printing of syntax trees.
//!
//! `parse(pretty(parse(text)))` yields the same AST as `parse(text)`; tests
//! rely on this round trip. Property display strings (`Pmin=? [F s=done]`)
//! also come from here.

use super::ast::*;
use std::fmt;

// Binding strength for minimal parenthesization; higher binds tighter.
const PREC_ITE: u8 = 0;
const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_NOT: u8 = 4;
const PREC_CMP: u8 = 5;
const PREC_ADD: u8 = 6;
const PREC_MUL: u8 = 7;
const PREC_NEG: u8 = 8;
const PREC_ATOM: u8 = 9;

fn binary_prec(op: BinaryOp) -> u8 {
    use BinaryOp::*;
    match op {
        Implies => PREC_IMPLIES,
        Or => PREC_OR,
        And => PREC_AND,
        Eq | Ne | Lt | Le | Gt | Ge => PREC_CMP,
        Add | Sub => PREC_ADD,
        Mul | Div => PREC_MUL,
    }
}

fn binary_symbol(op: BinaryOp) -> &'static str {
    use BinaryOp::*;
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

fn fmt_expr(e: &Expr, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = match &e.kind {
        ExprKind::Ite(..) => PREC_ITE,
        ExprKind::Binary(op, ..) => binary_prec(*op),
        ExprKind::Unary(UnaryOp::Not, _) => PREC_NOT,
        ExprKind::Unary(UnaryOp::Neg, _) => PREC_NEG,
        _ => PREC_ATOM,
    };
    let need_parens = prec < min_prec;
    if need_parens {
        write!(f, "(")?;
    }
    match &e.kind {
        ExprKind::IntLit(n) => write!(f, "{n}")?,
        ExprKind::DoubleLit(_, text) => write!(f, "{text}")?,
        ExprKind::BoolLit(b) => write!(f, "{b}")?,
        ExprKind::Ident(name) => write!(f, "{name}")?,
        ExprKind::Active(name) => write!(f, "active({name})")?,
        ExprKind::Call(builtin, args) => {
            write!(f, "{}(", builtin.name())?;
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                fmt_expr(arg, f, PREC_ITE)?;
            }
            write!(f, ")")?;
        }
        ExprKind::Unary(op, operand) => {
            let (sym, inner) = match op {
                UnaryOp::Not => ("!", PREC_NOT),
                UnaryOp::Neg => ("-", PREC_NEG),
            };
            write!(f, "{sym}")?;
            fmt_expr(operand, f, inner)?;
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let prec = binary_prec(*op);
            // Left-associative except `=>`; comparisons are non-associative.
            let (lp, rp) = match op {
                BinaryOp::Implies => (prec + 1, prec),
                BinaryOp::Eq
                | BinaryOp::Ne
                | BinaryOp::Lt
                | BinaryOp::Le
                | BinaryOp::Gt
                | BinaryOp::Ge => (prec + 1, prec + 1),
                _ => (prec, prec + 1),
            };
            fmt_expr(lhs, f, lp)?;
            let spaced = matches!(op, BinaryOp::And | BinaryOp::Or | BinaryOp::Implies);
            if spaced {
                write!(f, " {} ", binary_symbol(*op))?;
            } else {
                write!(f, "{}", binary_symbol(*op))?;
            }
            fmt_expr(rhs, f, rp)?;
        }
        ExprKind::Ite(cond, then_e, else_e) => {
            fmt_expr(cond, f, PREC_IMPLIES)?;
            write!(f, " ? ")?;
            fmt_expr(then_e, f, PREC_ITE)?;
            write!(f, " : ")?;
            fmt_expr(else_e, f, PREC_ITE)?;
        }
    }
    if need_parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, f, PREC_ITE)
    }
}

impl fmt::Display for StateSetAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSetAst::Label(name) => write!(f, "\"{name}\""),
            StateSetAst::Expr(e) => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for PathAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathAst::Eventually { bound: None, target } => write!(f, "F {target}"),
            PathAst::Eventually { bound: Some(k), target } => write!(f, "F<={k} {target}"),
            PathAst::Globally(target) => write!(f, "G {target}"),
        }
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryAst::Prob { mode, path } => {
                let m = if *mode == Mode::Min { "Pmin" } else { "Pmax" };
                write!(f, "{m}=? [{path}]")
            }
            QueryAst::Reward { structure, mode, target } => {
                write!(f, "R{{\"{structure}\"}}{mode}=? [F {target}]")
            }
        }
    }
}

impl fmt::Display for PropertyAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyAst::Query(q) => write!(f, "{q}"),
            PropertyAst::Filter { agg, inner, set } => write!(f, "filter({agg}, {inner}, {set})"),
        }
    }
}

impl fmt::Display for PropsAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for label in &self.labels {
            writeln!(f, "label \"{}\" = {};", label.name, label.expr)?;
        }
        for prop in &self.properties {
            writeln!(f, "{prop};")?;
        }
        Ok(())
    }
}

impl fmt::Display for UpdateDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.assignments.is_empty() {
            return write!(f, "true");
        }
        for (i, a) in self.assignments.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "({}'={})", a.var, a.value)?;
        }
        Ok(())
    }
}

impl fmt::Display for CommandDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Some(a) => write!(f, "[{a}] ")?,
            None => write!(f, "[] ")?,
        }
        write!(f, "{} -> ", self.guard)?;
        for (i, b) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match &b.prob {
                Some(p) => write!(f, "{}: {}", p, b.update)?,
                None => write!(f, "{}", b.update)?,
            }
        }
        write!(f, ";")
    }
}

impl fmt::Display for CtrlUpdateDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.switches.is_empty() {
            return write!(f, "true");
        }
        for (i, s) in self.switches.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            match s {
                SwitchDecl::Activate(name, _) => write!(f, "activate({name})")?,
                SwitchDecl::Deactivate(name, _) => write!(f, "deactivate({name})")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for CtrlCommandDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Some(a) => write!(f, "[{a}] ")?,
            None => write!(f, "[] ")?,
        }
        write!(f, "{} -> ", self.guard)?;
        for (i, b) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match &b.prob {
                Some(p) => write!(f, "{}: {}", p, b.update)?,
                None => write!(f, "{}", b.update)?,
            }
        }
        write!(f, ";")
    }
}

impl fmt::Display for ConstraintDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintDecl::Requires { from, to, .. } => {
                write!(f, "constraint {from} requires {to};")
            }
            ConstraintDecl::Expr(e) => write!(f, "constraint {e};"),
        }
    }
}

impl fmt::Display for ModelAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constants {
            match &c.default {
                Some(d) => writeln!(f, "const {} {} = {};", c.ty, c.name, d)?,
                None => writeln!(f, "const {} {};", c.ty, c.name)?,
            }
        }
        for fm in &self.formulas {
            writeln!(f, "formula {} = {};", fm.name, fm.expr)?;
        }
        for l in &self.labels {
            writeln!(f, "label \"{}\" = {};", l.name, l.expr)?;
        }
        for feat in &self.features {
            if feat.is_root {
                writeln!(f, "root feature")?;
            } else {
                writeln!(f, "feature {}", feat.name)?;
            }
            if let Some((kind, children)) = &feat.group {
                writeln!(f, "    {} {};", kind, children.join(", "))?;
            }
            if !feat.modules.is_empty() {
                writeln!(f, "    modules {};", feat.modules.join(", "))?;
            }
            for r in &feat.rewards {
                writeln!(f, "    rewards \"{}\"", r.name)?;
                for item in &r.items {
                    match &item.action {
                        Some(Some(a)) => writeln!(f, "        [{a}] {} : {};", item.guard, item.value)?,
                        Some(None) => writeln!(f, "        [] {} : {};", item.guard, item.value)?,
                        None => writeln!(f, "        {} : {};", item.guard, item.value)?,
                    }
                }
                writeln!(f, "    endrewards")?;
            }
            for c in &feat.constraints {
                writeln!(f, "    {c}")?;
            }
            for e in &feat.initial_constraints {
                writeln!(f, "    initial constraint {e};")?;
            }
            writeln!(f, "endfeature")?;
        }
        for c in &self.constraints {
            writeln!(f, "{c}")?;
        }
        for e in &self.initial_constraints {
            writeln!(f, "initial constraint {e};")?;
        }
        for m in &self.modules {
            writeln!(f, "module {}", m.name)?;
            for v in &m.vars {
                writeln!(f, "    {} : [{}..{}] init {};", v.name, v.lo, v.hi, v.init)?;
            }
            for c in &m.commands {
                writeln!(f, "    {c}")?;
            }
            writeln!(f, "endmodule")?;
        }
        if let Some(ctrl) = &self.controller {
            writeln!(f, "controller")?;
            for c in &ctrl.commands {
                writeln!(f, "    {c}")?;
            }
            writeln!(f, "endcontroller")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_model, parse_properties};

    #[test]
    fn model_round_trip_is_a_fixpoint() {
        let text = "
const int start_task = 0;
const double p = 0.59;
formula med_visib = (max_visib-min_visib)/3;
label \"safe\" = s=start_task | s=done;
root feature
    all of robot;
    modules auv;
    rewards \"time\"
        [step] true : 1;
    endrewards
endfeature
feature robot
    one of low, high;
    constraint high requires low;
endfeature
initial constraint active(low);
module auv
    s : [0..12] init start_task;
    [step] (s=0) & active(low) -> 0.59:(s'=1) + 0.41:(s'=(s<12 ? s+2 : s));
    [step] (s=1) -> true;
endmodule
controller
    [step] s!=1 -> activate(low) & deactivate(high);
    [step] s=1 -> true;
endcontroller
";
        let ast1 = parse_model(text).unwrap();
        let printed1 = ast1.to_string();
        let ast2 = parse_model(&printed1).unwrap();
        // positions differ, the printed form must not
        assert_eq!(printed1, ast2.to_string());
    }

    #[test]
    fn property_round_trip_is_a_fixpoint() {
        let text = "label \"unsafe\" = s=7;\nPmin=? [G \"safe\"];\nfilter(avg, Pmax=? [ F<=k \"unsafe\" ], \"safe\");\nR{\"energy\"}min=? [F ${s=done}];\nPmax=? [F<=12 s=3&t=2];\n";
        let ast1 = parse_properties(text).unwrap();
        let printed1 = ast1.to_string();
        let ast2 = parse_properties(&printed1).unwrap();
        assert_eq!(printed1, ast2.to_string());
    }

    #[test]
    fn property_display_matches_canonical_form() {
        let props = parse_properties("Pmin=? [ F ${s=done} ];").unwrap();
        assert_eq!(props.properties[0].to_string(), "Pmin=? [F s=done]");
        let props = parse_properties("filter(min, Pmin=? [ F<=k \"safe\" ], \"unsafe\");").unwrap();
        assert_eq!(
            props.properties[0].to_string(),
            "filter(min, Pmin=? [F<=k \"safe\"], \"unsafe\")"
        );
    }

    #[test]
    fn parens_are_preserved_where_needed() {
        let ast = parse_model("formula x = (a+b)*c - -d;").unwrap();
        assert_eq!(ast.formulas[0].expr.to_string(), "(a+b)*c--d");
        let reparsed = parse_model(&ast.to_string()).unwrap();
        assert_eq!(ast.to_string(), reparsed.to_string());
    }
}
