//! Hand-rolled lexer shared by the model and property parsers.

use super::ast::Pos;
use super::ModelError;
use crate::rat::rational_from_decimal;
use num::BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Const,
    Int,
    Double,
    Bool,
    True,
    False,
    Formula,
    Label,
    Root,
    Feature,
    EndFeature,
    All,
    One,
    Of,
    Modules,
    Rewards,
    EndRewards,
    Constraint,
    Initial,
    Module,
    EndModule,
    Controller,
    EndController,
    Init,
    Active,
    Activate,
    Deactivate,
    Requires,
    Filter,
    Min,
    Max,
    Avg,
    Round,
    Floor,
    Ceil,
}

impl Keyword {
    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Const => "const",
            Keyword::Int => "int",
            Keyword::Double => "double",
            Keyword::Bool => "bool",
            Keyword::True => "true",
            Keyword::False => "false",
            Keyword::Formula => "formula",
            Keyword::Label => "label",
            Keyword::Root => "root",
            Keyword::Feature => "feature",
            Keyword::EndFeature => "endfeature",
            Keyword::All => "all",
            Keyword::One => "one",
            Keyword::Of => "of",
            Keyword::Modules => "modules",
            Keyword::Rewards => "rewards",
            Keyword::EndRewards => "endrewards",
            Keyword::Constraint => "constraint",
            Keyword::Initial => "initial",
            Keyword::Module => "module",
            Keyword::EndModule => "endmodule",
            Keyword::Controller => "controller",
            Keyword::EndController => "endcontroller",
            Keyword::Init => "init",
            Keyword::Active => "active",
            Keyword::Activate => "activate",
            Keyword::Deactivate => "deactivate",
            Keyword::Requires => "requires",
            Keyword::Filter => "filter",
            Keyword::Min => "min",
            Keyword::Max => "max",
            Keyword::Avg => "avg",
            Keyword::Round => "round",
            Keyword::Floor => "floor",
            Keyword::Ceil => "ceil",
        }
    }

    fn from_str(s: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match s {
            "const" => Const,
            "int" => Int,
            "double" => Double,
            "bool" => Bool,
            "true" => True,
            "false" => False,
            "formula" => Formula,
            "label" => Label,
            "root" => Root,
            "feature" => Feature,
            "endfeature" => EndFeature,
            "all" => All,
            "one" => One,
            "of" => Of,
            "modules" => Modules,
            "rewards" => Rewards,
            "endrewards" => EndRewards,
            "constraint" => Constraint,
            "initial" => Initial,
            "module" => Module,
            "endmodule" => EndModule,
            "controller" => Controller,
            "endcontroller" => EndController,
            "init" => Init,
            "active" => Active,
            "activate" => Activate,
            "deactivate" => Deactivate,
            "requires" => Requires,
            "filter" => Filter,
            "min" => Min,
            "max" => Max,
            "avg" => Avg,
            "round" => Round,
            "floor" => Floor,
            "ceil" => Ceil,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Kw(Keyword),
    IntLit(i64),
    /// Exact value plus source spelling.
    DoubleLit(BigRational, String),
    StringLit(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Semi,
    DotDot,
    Prime,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Amp,
    Pipe,
    Bang,
    Implies,
    Question,
    Dollar,
    Eof,
}

impl TokenKind {
    /// Short human-readable form for diagnostics.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Kw(k) => format!("`{}`", k.as_str()),
            TokenKind::IntLit(n) => format!("integer `{n}`"),
            TokenKind::DoubleLit(_, s) => format!("number `{s}`"),
            TokenKind::StringLit(s) => format!("string \"{s}\""),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::DotDot => "`..`".into(),
            TokenKind::Prime => "`'`".into(),
            TokenKind::Arrow => "`->`".into(),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Slash => "`/`".into(),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Neq => "`!=`".into(),
            TokenKind::Lt => "`<`".into(),
            TokenKind::Le => "`<=`".into(),
            TokenKind::Gt => "`>`".into(),
            TokenKind::Ge => "`>=`".into(),
            TokenKind::Amp => "`&`".into(),
            TokenKind::Pipe => "`|`".into(),
            TokenKind::Bang => "`!`".into(),
            TokenKind::Implies => "`=>`".into(),
            TokenKind::Question => "`?`".into(),
            TokenKind::Dollar => "`$`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

pub fn lex(text: &str) -> Result<Vec<Token>, ModelError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! push {
        ($kind:expr, $pos:expr) => {
            tokens.push(Token { kind: $kind, pos: $pos })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos::new(line, col);
        let advance = |i: &mut usize, col: &mut u32, n: usize| {
            *i += n;
            *col += n as u32;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => advance(&mut i, &mut col, 1),
            '/' if i + 1 < chars.len() && chars[i + 1] == '/' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                push!(TokenKind::LParen, pos);
                advance(&mut i, &mut col, 1);
            }
            ')' => {
                push!(TokenKind::RParen, pos);
                advance(&mut i, &mut col, 1);
            }
            '[' => {
                push!(TokenKind::LBracket, pos);
                advance(&mut i, &mut col, 1);
            }
            ']' => {
                push!(TokenKind::RBracket, pos);
                advance(&mut i, &mut col, 1);
            }
            '{' => {
                push!(TokenKind::LBrace, pos);
                advance(&mut i, &mut col, 1);
            }
            '}' => {
                push!(TokenKind::RBrace, pos);
                advance(&mut i, &mut col, 1);
            }
            ',' => {
                push!(TokenKind::Comma, pos);
                advance(&mut i, &mut col, 1);
            }
            ':' => {
                push!(TokenKind::Colon, pos);
                advance(&mut i, &mut col, 1);
            }
            ';' => {
                push!(TokenKind::Semi, pos);
                advance(&mut i, &mut col, 1);
            }
            '\'' => {
                push!(TokenKind::Prime, pos);
                advance(&mut i, &mut col, 1);
            }
            '+' => {
                push!(TokenKind::Plus, pos);
                advance(&mut i, &mut col, 1);
            }
            '*' => {
                push!(TokenKind::Star, pos);
                advance(&mut i, &mut col, 1);
            }
            '/' => {
                push!(TokenKind::Slash, pos);
                advance(&mut i, &mut col, 1);
            }
            '?' => {
                push!(TokenKind::Question, pos);
                advance(&mut i, &mut col, 1);
            }
            '$' => {
                push!(TokenKind::Dollar, pos);
                advance(&mut i, &mut col, 1);
            }
            '&' => {
                push!(TokenKind::Amp, pos);
                advance(&mut i, &mut col, 1);
            }
            '|' => {
                push!(TokenKind::Pipe, pos);
                advance(&mut i, &mut col, 1);
            }
            '-' => {
                if i + 1 < chars.len() && chars[i + 1] == '>' {
                    push!(TokenKind::Arrow, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(TokenKind::Minus, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '=' => {
                if i + 1 < chars.len() && chars[i + 1] == '>' {
                    push!(TokenKind::Implies, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(TokenKind::Eq, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '!' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    push!(TokenKind::Neq, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(TokenKind::Bang, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '<' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    push!(TokenKind::Le, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(TokenKind::Lt, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '>' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    push!(TokenKind::Ge, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(TokenKind::Gt, pos);
                    advance(&mut i, &mut col, 1);
                }
            }
            '.' => {
                if i + 1 < chars.len() && chars[i + 1] == '.' {
                    push!(TokenKind::DotDot, pos);
                    advance(&mut i, &mut col, 2);
                } else {
                    return Err(ModelError::Syntax {
                        pos,
                        message: "unexpected `.`".into(),
                    });
                }
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                    s.push(chars[j]);
                    j += 1;
                }
                if j >= chars.len() || chars[j] != '"' {
                    return Err(ModelError::Syntax {
                        pos,
                        message: "unterminated string literal".into(),
                    });
                }
                let len = j + 1 - i;
                push!(TokenKind::StringLit(s), pos);
                advance(&mut i, &mut col, len);
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                // A `.` begins a fraction only when followed by a digit,
                // so `[0..12]` lexes as `0`, `..`, `12`.
                let mut is_double = false;
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    is_double = true;
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let text: String = chars[i..j].iter().collect();
                let len = j - i;
                if is_double {
                    let value = rational_from_decimal(&text).ok_or(ModelError::Syntax {
                        pos,
                        message: format!("invalid number literal `{text}`"),
                    })?;
                    push!(TokenKind::DoubleLit(value, text), pos);
                } else {
                    let value: i64 = text.parse().map_err(|_| ModelError::Syntax {
                        pos,
                        message: format!("integer literal `{text}` out of range"),
                    })?;
                    push!(TokenKind::IntLit(value), pos);
                }
                advance(&mut i, &mut col, len);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let len = j - i;
                match Keyword::from_str(&text) {
                    Some(kw) => push!(TokenKind::Kw(kw), pos),
                    None => push!(TokenKind::Ident(text), pos),
                }
                advance(&mut i, &mut col, len);
            }
            other => {
                return Err(ModelError::Syntax {
                    pos,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        pos: Pos::new(line, col),
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        lex(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn ranges_do_not_eat_decimal_points() {
        assert_eq!(
            kinds("[0..12]"),
            vec![
                TokenKind::LBracket,
                TokenKind::IntLit(0),
                TokenKind::DotDot,
                TokenKind::IntLit(12),
                TokenKind::RBracket,
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn doubles_keep_their_spelling() {
        match &kinds("0.59")[0] {
            TokenKind::DoubleLit(v, s) => {
                assert_eq!(s, "0.59");
                assert_eq!(*v, num::BigRational::new(59.into(), 100.into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arrow_and_prime() {
        assert_eq!(
            kinds("-> s'"),
            vec![
                TokenKind::Arrow,
                TokenKind::Ident("s".into()),
                TokenKind::Prime,
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(kinds("// nothing\n1"), vec![TokenKind::IntLit(1), TokenKind::Eof]);
    }

    #[test]
    fn positions_are_one_based() {
        let tokens = lex("a\n  b").unwrap();
        assert_eq!(tokens[0].pos, Pos::new(1, 1));
        assert_eq!(tokens[1].pos, Pos::new(2, 3));
    }

    #[test]
    fn bad_character_is_reported() {
        let err = lex("a # b").unwrap_err();
        assert!(err.to_string().contains("1:3"), "{err}");
    }
}
