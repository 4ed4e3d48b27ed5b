//! A small expression language for formulas in experiment files.
//!
//! Expressions are standard infix arithmetic over a declared set of
//! variables, with `abs`, `min`, `max` and a `piecewise` construct:
//!
//! ```text
//! abs(x - z) + abs(x + z - 2 * y)
//! piecewise(t >= 6 : 5, else : t / 2)
//! ```
//!
//! Comparisons inside `piecewise` are exact; no tolerance is applied to
//! formula semantics. Division by zero is an evaluation error.

mod parser;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("function `{name}` at offset {offset} expects {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: &'static str,
        found: usize,
        offset: usize,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("no binding for variable `{0}`")]
    MissingBinding(String),
}

impl ExprError {
    /// Byte offset of a parse error, if this is one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            ExprError::Syntax { offset, .. }
            | ExprError::UnknownIdentifier { offset, .. }
            | ExprError::UnknownFunction { offset, .. }
            | ExprError::Arity { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Min,
    Max,
}

impl Func {
    pub(crate) fn lookup(name: &str) -> Option<Func> {
        match name {
            "abs" => Some(Func::Abs),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub lhs: Node,
    pub op: CmpOp,
    pub rhs: Node,
}

/// Expression tree. Variables are indices into the owning [`Expr`]'s
/// variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    Piecewise {
        branches: Vec<(Condition, Node)>,
        default: Box<Node>,
    },
}

impl Node {
    fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Node::Num(v) => *v,
            Node::Var(i) => values[*i],
            Node::Neg(inner) => -inner.eval(values)?,
            Node::Binary(op, lhs, rhs) => {
                let l = lhs.eval(values)?;
                let r = rhs.eval(values)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        l / r
                    }
                }
            }
            Node::Call(func, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(a.eval(values)?);
                }
                match func {
                    Func::Abs => vals[0].abs(),
                    Func::Min => vals.into_iter().fold(f64::INFINITY, f64::min),
                    Func::Max => vals.into_iter().fold(f64::NEG_INFINITY, f64::max),
                }
            }
            Node::Piecewise { branches, default } => {
                for (cond, body) in branches {
                    if cond.op.holds(cond.lhs.eval(values)?, cond.rhs.eval(values)?) {
                        return body.eval(values);
                    }
                }
                default.eval(values)?
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Binary(op, _, _) => op.precedence(),
            Node::Neg(_) => 3,
            Node::Num(v) if v.is_sign_negative() => 3,
            _ => 4,
        }
    }

    fn write(&self, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(i) => f.write_str(&vars[*i]),
            Node::Neg(inner) => {
                f.write_str("-")?;
                inner.write_child(vars, f, inner.precedence() < 3)
            }
            Node::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                lhs.write_child(vars, f, lhs.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_child(vars, f, rhs.precedence() <= p)
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write(vars, f)?;
                }
                f.write_str(")")
            }
            Node::Piecewise { branches, default } => {
                f.write_str("piecewise(")?;
                for (cond, body) in branches {
                    cond.lhs.write(vars, f)?;
                    write!(f, " {} ", cond.op.symbol())?;
                    cond.rhs.write(vars, f)?;
                    f.write_str(" : ")?;
                    body.write(vars, f)?;
                    f.write_str(", ")?;
                }
                f.write_str("else : ")?;
                default.write(vars, f)?;
                f.write_str(")")
            }
        }
    }

    fn write_child(&self, vars: &[String], f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            f.write_str("(")?;
            self.write(vars, f)?;
            f.write_str(")")
        } else {
            self.write(vars, f)
        }
    }
}

/// A parsed expression together with its declared variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

impl Expr {
    /// Builds an expression from a tree. Panics if the tree references a
    /// variable index outside `vars`.
    pub fn from_node(root: Node, vars: &[&str]) -> Self {
        fn check(n: &Node, len: usize) {
            match n {
                Node::Var(i) => assert!(*i < len, "variable index {i} out of range"),
                Node::Num(_) => {}
                Node::Neg(a) => check(a, len),
                Node::Binary(_, a, b) => {
                    check(a, len);
                    check(b, len);
                }
                Node::Call(_, args) => args.iter().for_each(|a| check(a, len)),
                Node::Piecewise { branches, default } => {
                    for (c, b) in branches {
                        check(&c.lhs, len);
                        check(&c.rhs, len);
                        check(b, len);
                    }
                    check(default, len);
                }
            }
        }
        check(&root, vars.len());
        Expr {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates with positional bindings, one per declared variable.
    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        if values.len() < self.vars.len() {
            return Err(ExprError::MissingBinding(self.vars[values.len()].clone()));
        }
        self.root.eval(values)
    }

    /// Evaluates with named bindings.
    pub fn eval_env(&self, env: &HashMap<&str, f64>) -> Result<f64, ExprError> {
        let values = self
            .vars
            .iter()
            .map(|v| env.get(v.as_str()).copied().ok_or_else(|| ExprError::MissingBinding(v.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        self.root.eval(&values)
    }

    /// Single-variable convenience for gauges and maps.
    pub fn eval1(&self, value: f64) -> Result<f64, ExprError> {
        self.eval(&[value])
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(&self.vars, f)
    }
}
