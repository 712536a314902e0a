//! Scalar math expressions: parsing, printing, substitution and evaluation
//! over any [`Scalar`] algebra.

mod eval;
mod parse;
pub mod scalar;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

pub use scalar::{Dual, Dual1, Dual2, Scalar};

use crate::error::{EvalError, ParseError};

/// Named parameter values.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    Const(f64),
    Var(usize),
    Param(String),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A tree node tagged with the byte offset of the source text it came from.
/// Programmatically built nodes carry position 0.
#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub pos: usize,
}

impl Node {
    fn new(kind: NodeKind, pos: usize) -> Self {
        Node { kind, pos }
    }

    /// Structural equality, ignoring source positions.
    pub fn same_shape(&self, other: &Node) -> bool {
        use NodeKind::*;
        match (&self.kind, &other.kind) {
            (Const(a), Const(b)) => a.to_bits() == b.to_bits(),
            (Var(a), Var(b)) => a == b,
            (Param(a), Param(b)) => a == b,
            (Neg(a), Neg(b)) => a.same_shape(b),
            (Binary(o1, l1, r1), Binary(o2, l2, r2)) => {
                o1 == o2 && l1.same_shape(l2) && r1.same_shape(r2)
            }
            (Call(f1, a), Call(f2, b)) => f1 == f2 && a.same_shape(b),
            _ => false,
        }
    }

    fn depends_on_variables(&self) -> bool {
        match &self.kind {
            NodeKind::Const(_) | NodeKind::Param(_) => false,
            NodeKind::Var(_) => true,
            NodeKind::Neg(a) | NodeKind::Call(_, a) => a.depends_on_variables(),
            NodeKind::Binary(_, l, r) => l.depends_on_variables() || r.depends_on_variables(),
        }
    }
}

/// A parsed expression over an ordered list of variables.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    variables: Vec<String>,
}

impl Expression {
    /// Parse `text` against the given variable and parameter names.
    ///
    /// Precedence, tightest first: `^` (right-associative), unary `-`,
    /// `*` `/`, `+` `-`. Functions: `sin cos exp log sqrt abs`.
    pub fn parse(text: &str, variables: &[&str], parameters: &[&str]) -> Result<Self, ParseError> {
        let root = parse::Parser::new(text, variables, parameters).parse()?;
        Ok(Expression {
            root,
            variables: variables.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn from_node(root: Node, variables: Vec<String>) -> Self {
        Expression { root, variables }
    }

    pub fn constant(value: f64, variables: &[String]) -> Self {
        Expression::from_node(Node::new(NodeKind::Const(value), 0), variables.to_vec())
    }

    pub fn variable(index: usize, variables: &[String]) -> Self {
        assert!(index < variables.len(), "variable index out of range");
        Expression::from_node(Node::new(NodeKind::Var(index), 0), variables.to_vec())
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn dimension(&self) -> usize {
        self.variables.len()
    }

    /// Structural equality ignoring source positions.
    pub fn same_shape(&self, other: &Expression) -> bool {
        self.root.same_shape(&other.root)
    }

    /// Names of parameters referenced by the tree, sorted.
    pub fn parameters(&self) -> Vec<String> {
        fn walk(n: &Node, out: &mut Vec<String>) {
            match &n.kind {
                NodeKind::Param(p) => out.push(p.clone()),
                NodeKind::Neg(a) | NodeKind::Call(_, a) => walk(a, out),
                NodeKind::Binary(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Replace every parameter node with its numeric value.
    pub fn bind(&self, params: &Params) -> Result<Expression, EvalError> {
        fn walk(n: &Node, params: &Params) -> Result<Node, EvalError> {
            let kind = match &n.kind {
                NodeKind::Param(p) => NodeKind::Const(
                    *params
                        .get(p)
                        .ok_or_else(|| EvalError::UnboundParameter(p.clone()))?,
                ),
                NodeKind::Neg(a) => NodeKind::Neg(Box::new(walk(a, params)?)),
                NodeKind::Call(f, a) => NodeKind::Call(*f, Box::new(walk(a, params)?)),
                NodeKind::Binary(op, l, r) => {
                    NodeKind::Binary(*op, Box::new(walk(l, params)?), Box::new(walk(r, params)?))
                }
                other => other.clone(),
            };
            Ok(Node::new(kind, n.pos))
        }
        Ok(Expression::from_node(walk(&self.root, params)?, self.variables.clone()))
    }

    /// Compose with a coordinate map: every variable `i` is replaced by
    /// `replacements[i]`, whose variables become the variables of the result.
    pub fn substitute(&self, replacements: &[Expression]) -> Expression {
        assert_eq!(replacements.len(), self.dimension(), "substitution arity");
        let vars = replacements
            .first()
            .map(|e| e.variables.clone())
            .unwrap_or_default();
        fn walk(n: &Node, reps: &[Expression]) -> Node {
            match &n.kind {
                NodeKind::Var(i) => reps[*i].root.clone(),
                NodeKind::Neg(a) => Node::new(NodeKind::Neg(Box::new(walk(a, reps))), n.pos),
                NodeKind::Call(f, a) => Node::new(NodeKind::Call(*f, Box::new(walk(a, reps))), n.pos),
                NodeKind::Binary(op, l, r) => Node::new(
                    NodeKind::Binary(*op, Box::new(walk(l, reps)), Box::new(walk(r, reps))),
                    n.pos,
                ),
                _ => n.clone(),
            }
        }
        Expression::from_node(walk(&self.root, replacements), vars)
    }

    /// Integer power with a constant exponent.
    pub fn powi(self, n: i32) -> Expression {
        let vars = self.variables;
        let node = Node::new(
            NodeKind::Binary(
                BinOp::Pow,
                Box::new(self.root),
                Box::new(Node::new(NodeKind::Const(f64::from(n)), 0)),
            ),
            0,
        );
        Expression::from_node(node, vars)
    }

    fn combine(self, op: BinOp, rhs: Expression) -> Expression {
        debug_assert_eq!(self.variables, rhs.variables);
        let node = Node::new(
            NodeKind::Binary(op, Box::new(self.root), Box::new(rhs.root)),
            0,
        );
        Expression::from_node(node, self.variables)
    }

    fn is_const(&self, v: f64) -> bool {
        matches!(self.root.kind, NodeKind::Const(c) if c == v)
    }
}

impl Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Expression) -> Expression {
        if rhs.is_const(0.0) {
            return self;
        }
        if self.is_const(0.0) {
            return rhs;
        }
        self.combine(BinOp::Add, rhs)
    }
}

impl Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Expression) -> Expression {
        if rhs.is_const(0.0) {
            return self;
        }
        self.combine(BinOp::Sub, rhs)
    }
}

impl Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        if self.is_const(1.0) {
            return rhs;
        }
        if rhs.is_const(1.0) {
            return self;
        }
        if self.is_const(0.0) || rhs.is_const(0.0) {
            return Expression::constant(0.0, &self.variables);
        }
        self.combine(BinOp::Mul, rhs)
    }
}

impl Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        let vars = self.variables;
        Expression::from_node(Node::new(NodeKind::Neg(Box::new(self.root)), 0), vars)
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(n: &Node) -> u8 {
    match &n.kind {
        NodeKind::Const(c) if *c < 0.0 || c.is_sign_negative() => 0,
        NodeKind::Const(_) | NodeKind::Var(_) | NodeKind::Param(_) | NodeKind::Call(..) => {
            PREC_ATOM
        }
        NodeKind::Neg(_) => PREC_NEG,
        NodeKind::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
        NodeKind::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
        NodeKind::Binary(BinOp::Pow, ..) => PREC_POW,
    }
}

struct Printer<'a> {
    node: &'a Node,
    vars: &'a [String],
}

impl Printer<'_> {
    fn child<'b>(&'b self, node: &'b Node) -> Printer<'b> {
        Printer {
            node,
            vars: self.vars,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if precedence(self.node) < min_prec {
            write!(f, "(")?;
            self.write(f)?;
            write!(f, ")")
        } else {
            self.write(f)
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node.kind {
            NodeKind::Const(c) => write!(f, "{c:?}"),
            NodeKind::Var(i) => write!(f, "{}", self.vars[*i]),
            NodeKind::Param(p) => write!(f, "{p}"),
            NodeKind::Neg(a) => {
                write!(f, "-")?;
                self.child(a).write_at(f, PREC_NEG)
            }
            NodeKind::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.child(a).write(f)?;
                write!(f, ")")
            }
            NodeKind::Binary(op, l, r) => {
                let (sym, prec) = match op {
                    BinOp::Add => (" + ", PREC_ADD),
                    BinOp::Sub => (" - ", PREC_ADD),
                    BinOp::Mul => ("*", PREC_MUL),
                    BinOp::Div => ("/", PREC_MUL),
                    BinOp::Pow => ("^", PREC_POW),
                };
                if *op == BinOp::Pow {
                    self.child(l).write_at(f, PREC_ATOM)?;
                    write!(f, "{sym}")?;
                    self.child(r).write_at(f, PREC_NEG)
                } else {
                    self.child(l).write_at(f, prec)?;
                    write!(f, "{sym}")?;
                    self.child(r).write_at(f, prec + 1)
                }
            }
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            node: &self.root,
            vars: &self.variables,
        }
        .write(f)
    }
}
