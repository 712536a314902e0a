//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := primary ('^' exponent)?
//! exponent:= '-' exponent | '+' exponent | power
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```

use super::{BinOp, Func, Node, NodeKind};
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    pos: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

pub(super) struct Parser<'a> {
    text: &'a str,
    variables: &'a [&'a str],
    parameters: &'a [&'a str],
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl<'a> Parser<'a> {
    pub(super) fn new(text: &'a str, variables: &'a [&'a str], parameters: &'a [&'a str]) -> Self {
        Parser {
            text,
            variables,
            parameters,
            toks: Vec::new(),
            at: 0,
        }
    }

    pub(super) fn parse(mut self) -> Result<Node, ParseError> {
        if self.text.trim().is_empty() {
            return Err(ParseError::Syntax {
                pos: 0,
                message: "empty expression".into(),
            });
        }
        self.toks = tokenize(self.text)?;
        let node = self.expr()?;
        let (tok, pos) = self.peek();
        if *tok != Tok::End {
            return Err(ParseError::Syntax {
                pos,
                message: format!("unexpected {}", describe(tok)),
            });
        }
        Ok(node)
    }

    fn peek(&self) -> (&Tok, usize) {
        let (t, p) = &self.toks[self.at];
        (t, *p)
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let (tok, pos) = self.peek();
            let op = match tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::new(NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let (tok, pos) = self.peek();
            let op = match tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::new(NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            (Tok::Minus, pos) => {
                self.bump();
                let inner = self.unary()?;
                Ok(Node::new(NodeKind::Neg(Box::new(inner)), pos))
            }
            (Tok::Plus, _) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if let (Tok::Caret, pos) = self.peek() {
            self.bump();
            let exponent = self.exponent()?;
            return Ok(Node::new(
                NodeKind::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)),
                pos,
            ));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            (Tok::Minus, pos) => {
                self.bump();
                let inner = self.exponent()?;
                Ok(Node::new(NodeKind::Neg(Box::new(inner)), pos))
            }
            (Tok::Plus, _) => {
                self.bump();
                self.exponent()
            }
            _ => self.power(),
        }
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::new(NodeKind::Const(v), pos)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen(pos)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let (Tok::LParen, _) = self.peek() {
                    let func = Func::from_name(&name).ok_or(ParseError::UnknownIdentifier {
                        pos,
                        name: name.clone(),
                    })?;
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen(pos)?;
                    return Ok(Node::new(NodeKind::Call(func, Box::new(arg)), pos));
                }
                if let Some(i) = self.variables.iter().position(|v| *v == name) {
                    Ok(Node::new(NodeKind::Var(i), pos))
                } else if self.parameters.contains(&name.as_str()) {
                    Ok(Node::new(NodeKind::Param(name), pos))
                } else {
                    Err(ParseError::UnknownIdentifier { pos, name })
                }
            }
            other => Err(ParseError::Syntax {
                pos,
                message: format!("expected operand, found {}", describe(&other)),
            }),
        }
    }

    fn expect_rparen(&mut self, open: usize) -> Result<(), ParseError> {
        match self.bump() {
            (Tok::RParen, _) => Ok(()),
            (other, pos) => Err(ParseError::Syntax {
                pos,
                message: format!(
                    "expected `)` to close `(` at {open}, found {}",
                    describe(&other)
                ),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Expression, Params};
    use crate::error::ParseError;

    fn p(text: &str) -> Result<Expression, ParseError> {
        Expression::parse(text, &["x", "y", "z"], &["beta"])
    }

    fn val(text: &str) -> f64 {
        p(text).unwrap().eval(&[1.0, 2.0, 3.0], &Params::from([("beta".into(), 0.5)])).unwrap()
    }

    #[test]
    fn rikitake_component_shape() {
        let e = p("y*z + beta*y").unwrap();
        let expected = Expression::from_node(
            {
                use super::super::{BinOp, Node, NodeKind};
                let n = |k| Node { kind: k, pos: 0 };
                n(NodeKind::Binary(
                    BinOp::Add,
                    Box::new(n(NodeKind::Binary(
                        BinOp::Mul,
                        Box::new(n(NodeKind::Var(1))),
                        Box::new(n(NodeKind::Var(2))),
                    ))),
                    Box::new(n(NodeKind::Binary(
                        BinOp::Mul,
                        Box::new(n(NodeKind::Param("beta".into()))),
                        Box::new(n(NodeKind::Var(1))),
                    ))),
                ))
            },
            vec!["x".into(), "y".into(), "z".into()],
        );
        assert!(e.same_shape(&expected));
    }

    #[test]
    fn single_variable() {
        let e = Expression::parse("x", &["x"], &[]).unwrap();
        assert!(matches!(e.root().kind, super::NodeKind::Var(0)));
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(val("2^3^2"), 512.0);
        assert_eq!(val("(2^3)^2"), 64.0);
    }

    #[test]
    fn precedence_table() {
        assert_eq!(val("-x^2"), -1.0);
        assert_eq!(val("-y^2"), -4.0);
        assert_eq!(val("x - y - z"), -4.0);
        assert_eq!(val("z / y / 3"), 0.5);
        assert_eq!(val("1 + y * z"), 7.0);
        assert_eq!(val("2^-1"), 0.5);
        assert_eq!(val("-2*-y"), 4.0);
        assert_eq!(val("+x"), 1.0);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        for (text, pos) in [
            ("(x + y", 6),
            ("x + y)", 5),
            ("x +", 3),
            ("* x", 0),
            ("x ^", 3),
            ("sin(x", 5),
            ("x $ y", 2),
            ("()", 1),
            ("x y", 2),
        ] {
            match p(text) {
                Err(ParseError::Syntax { pos: got, .. }) => assert_eq!(got, pos, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(p("").is_err());
        assert!(p("   ").is_err());
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            p("gamma*x").unwrap_err(),
            ParseError::UnknownIdentifier {
                pos: 0,
                name: "gamma".into()
            }
        );
        assert!(matches!(p("tan(x)"), Err(ParseError::UnknownIdentifier { .. })));
    }

    #[test]
    fn number_forms() {
        assert_eq!(val("1.5e2"), 150.0);
        assert_eq!(val(".5"), 0.5);
        assert_eq!(val("2E-1"), 0.2);
        assert!(p("1.2.3").is_err());
    }
}
