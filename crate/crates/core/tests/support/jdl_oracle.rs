//! Brute-force reference interpreter for closed JDL expressions, plus a
//! seeded generator for them.
//!
//! Truth values are ranked false < undefined < true, so `&&` is the minimum
//! and `||` the maximum of the two ranks.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use worldgrid_core::jdl::{BinaryOp, Expr, UnaryOp, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum RVal {
    T(i8),
    N(f64),
    S(String),
    L(Vec<String>),
}

const UNDEF: RVal = RVal::T(0);

fn rank(v: &RVal) -> i8 {
    match v {
        RVal::T(t) => *t,
        _ => 0,
    }
}

pub fn reference(e: &Expr) -> RVal {
    match e {
        Expr::Bool(b) => RVal::T(if *b { 1 } else { -1 }),
        Expr::Num(n) => RVal::N(*n),
        Expr::Str(s) => RVal::S(s.clone()),
        Expr::Attr(_) => UNDEF,
        Expr::List(items) => {
            let vals: Vec<RVal> = items.iter().map(reference).collect();
            if vals.iter().all(|v| matches!(v, RVal::S(_))) {
                RVal::L(
                    vals.into_iter()
                        .map(|v| match v {
                            RVal::S(s) => s,
                            _ => unreachable!(),
                        })
                        .collect(),
                )
            } else {
                UNDEF
            }
        }
        Expr::Member(v, l) => match (reference(v), reference(l)) {
            (RVal::S(s), RVal::L(items)) => RVal::T(if items.contains(&s) { 1 } else { -1 }),
            _ => UNDEF,
        },
        Expr::Unary(UnaryOp::Not, x) => match reference(x) {
            RVal::T(t) => RVal::T(-t),
            _ => UNDEF,
        },
        Expr::Unary(UnaryOp::Neg, x) => match reference(x) {
            RVal::N(n) => RVal::N(-n),
            _ => UNDEF,
        },
        Expr::Binary(BinaryOp::And, a, b) => RVal::T(rank(&reference(a)).min(rank(&reference(b)))),
        Expr::Binary(BinaryOp::Or, a, b) => RVal::T(rank(&reference(a)).max(rank(&reference(b)))),
        Expr::Binary(op, a, b) => {
            let (x, y) = (reference(a), reference(b));
            let tv = |b: bool| RVal::T(if b { 1 } else { -1 });
            match (&x, &y) {
                (RVal::N(p), RVal::N(q)) => tv(match op {
                    BinaryOp::Eq => p == q,
                    BinaryOp::Ne => p != q,
                    BinaryOp::Lt => p < q,
                    BinaryOp::Le => p <= q,
                    BinaryOp::Gt => p > q,
                    BinaryOp::Ge => p >= q,
                    _ => unreachable!(),
                }),
                (RVal::S(_), RVal::S(_)) | (RVal::T(1 | -1), RVal::T(1 | -1)) => match op {
                    BinaryOp::Eq => tv(x == y),
                    BinaryOp::Ne => tv(x != y),
                    _ => UNDEF,
                },
                _ => UNDEF,
            }
        }
    }
}

/// Whether the production evaluator's value means the same thing.
pub fn agrees(v: &Value, r: &RVal) -> bool {
    match (v, r) {
        (Value::Undefined, RVal::T(0)) => true,
        (Value::Bool(b), RVal::T(t)) => (*t == 1 && *b) || (*t == -1 && !*b),
        (Value::Num(a), RVal::N(b)) => a == b,
        (Value::Str(a), RVal::S(b)) => a == b,
        (Value::List(a), RVal::L(b)) => a == b,
        _ => false,
    }
}

const STRS: [&str; 4] = ["a", "b", "CMS", ""];
const NUMS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 3600.0];

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    fn leaf(&mut self) -> Expr {
        match self.0.random_range(0..4) {
            0 => Expr::Bool(self.0.random()),
            1 => Expr::Num(NUMS[self.0.random_range(0..NUMS.len())]),
            2 => Expr::str(STRS[self.0.random_range(0..STRS.len())]),
            _ => {
                let n = self.0.random_range(0..4);
                Expr::List(
                    (0..n)
                        .map(|_| {
                            if self.0.random_ratio(1, 10) {
                                Expr::Num(1.0)
                            } else {
                                Expr::str(STRS[self.0.random_range(0..STRS.len())])
                            }
                        })
                        .collect(),
                )
            }
        }
    }

    /// A random closed expression no deeper than `depth`.
    pub fn expr(&mut self, depth: u32) -> Expr {
        if depth == 0 || self.0.random_ratio(1, 4) {
            return self.leaf();
        }
        match self.0.random_range(0..10) {
            0 => Expr::unary(UnaryOp::Not, self.expr(depth - 1)),
            1 => Expr::unary(UnaryOp::Neg, self.expr(depth - 1)),
            2 => Expr::member(self.expr(depth - 1), self.expr(depth - 1)),
            _ => {
                let op = BinaryOp::ALL[self.0.random_range(0..BinaryOp::ALL.len())];
                Expr::binary(op, self.expr(depth - 1), self.expr(depth - 1))
            }
        }
    }
}
