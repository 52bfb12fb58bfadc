//! Three-valued evaluation of requirement and rank expressions.
//!
//! `&&` and `||` follow Kleene logic with UNDEFINED as the middle value, so
//! `true || UNDEFINED` is true and `false && UNDEFINED` is false (in either
//! operand order). Every other operator yields UNDEFINED on an UNDEFINED or
//! ill-typed operand.

use std::collections::BTreeMap;
use std::fmt;

use super::expr::{write_quoted, BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Str(String),
    List(Vec<String>),
    Undefined,
}

impl Value {
    pub fn list<I, S>(items: I) -> Value
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Value::List(items.into_iter().map(Into::into).collect())
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, Value::Undefined)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(n) => write!(f, "{n}"),
            Value::Str(s) => write_quoted(f, s),
            Value::List(items) => {
                f.write_str("{")?;
                for (i, s) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_quoted(f, s)?;
                }
                f.write_str("}")
            }
            Value::Undefined => f.write_str("UNDEFINED"),
        }
    }
}

/// Bindings for `other.<Name>`. Unbound names evaluate to UNDEFINED.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    attrs: BTreeMap<String, Value>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, value: Value) -> &mut Self {
        self.attrs.insert(name.into(), value);
        self
    }

    pub fn with(mut self, name: impl Into<String>, value: Value) -> Self {
        self.bind(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Value {
        self.attrs.get(name).cloned().unwrap_or(Value::Undefined)
    }
}

fn truth(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        _ => None,
    }
}

fn from_truth(t: Option<bool>) -> Value {
    t.map_or(Value::Undefined, Value::Bool)
}

pub fn evaluate(expr: &Expr, env: &Env) -> Value {
    match expr {
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Num(n) => Value::Num(*n),
        Expr::Str(s) => Value::Str(s.clone()),
        Expr::Attr(name) => env.get(name),
        Expr::List(items) => {
            let mut out = Vec::with_capacity(items.len());
            for e in items {
                match evaluate(e, env) {
                    Value::Str(s) => out.push(s),
                    _ => return Value::Undefined,
                }
            }
            Value::List(out)
        }
        Expr::Member(v, l) => match (evaluate(v, env), evaluate(l, env)) {
            (Value::Str(s), Value::List(items)) => Value::Bool(items.contains(&s)),
            _ => Value::Undefined,
        },
        Expr::Unary(UnaryOp::Not, e) => match evaluate(e, env) {
            Value::Bool(b) => Value::Bool(!b),
            _ => Value::Undefined,
        },
        Expr::Unary(UnaryOp::Neg, e) => match evaluate(e, env) {
            Value::Num(n) => Value::Num(-n),
            _ => Value::Undefined,
        },
        Expr::Binary(BinaryOp::And, l, r) => {
            let a = truth(&evaluate(l, env));
            if a == Some(false) {
                return Value::Bool(false);
            }
            match (a, truth(&evaluate(r, env))) {
                (_, Some(false)) => Value::Bool(false),
                (Some(true), b) => from_truth(b),
                _ => Value::Undefined,
            }
        }
        Expr::Binary(BinaryOp::Or, l, r) => {
            let a = truth(&evaluate(l, env));
            if a == Some(true) {
                return Value::Bool(true);
            }
            match (a, truth(&evaluate(r, env))) {
                (_, Some(true)) => Value::Bool(true),
                (Some(false), b) => from_truth(b),
                _ => Value::Undefined,
            }
        }
        Expr::Binary(op, l, r) => compare(*op, &evaluate(l, env), &evaluate(r, env)),
    }
}

fn compare(op: BinaryOp, a: &Value, b: &Value) -> Value {
    use BinaryOp::*;
    match (op, a, b) {
        (Eq | Ne | Lt | Le | Gt | Ge, Value::Num(x), Value::Num(y)) => Value::Bool(match op {
            Eq => x == y,
            Ne => x != y,
            Lt => x < y,
            Le => x <= y,
            Gt => x > y,
            _ => x >= y,
        }),
        (Eq, Value::Str(x), Value::Str(y)) => Value::Bool(x == y),
        (Ne, Value::Str(x), Value::Str(y)) => Value::Bool(x != y),
        (Eq, Value::Bool(x), Value::Bool(y)) => Value::Bool(x == y),
        (Ne, Value::Bool(x), Value::Bool(y)) => Value::Bool(x != y),
        _ => Value::Undefined,
    }
}

/// Broker-facing: only a boolean `true` satisfies a requirement.
pub fn requirement_satisfied(expr: &Expr, env: &Env) -> bool {
    evaluate(expr, env) == Value::Bool(true)
}
