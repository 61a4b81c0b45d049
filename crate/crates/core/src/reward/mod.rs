//! A small, sandboxed expression language for reward functions.

pub mod ast;
mod builtins;
mod parse;
mod trace;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use ast::{BinaryOp, CmpOp, Expr, UnaryOp};
pub use builtins::{builtin_reward, builtin_rewards, BUILTIN_SOURCES};
pub use trace::{trace_components, ComponentStats, ComponentTrace, StatsAccumulator};

/// Smallest denominator magnitude accepted by `/`.
pub const DIV_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("non-finite constant at byte {pos}")]
    NonFiniteConstant { pos: usize },
    #[error("exponent at byte {pos} is not a constant")]
    UnboundedExpression { pos: usize },
    #[error("component {0:?} defined twice")]
    DuplicateComponent(String),
    #[error("program has no components")]
    EmptyProgram,
    #[error("missing feature {0:?}")]
    MissingFeature(String),
    #[error("division by a value smaller than 1e-12 in magnitude")]
    DivisionNearZero,
    #[error("square root of a negative value")]
    NegativeSqrt,
    #[error("component {0:?} evaluated to a non-finite value")]
    NonFiniteResult(String),
    #[error("trace has no steps")]
    EmptyTrace,
    #[error("unknown builtin reward {0:?}")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub expr: Expr,
}

/// A parsed program bound to a feature catalog.
#[derive(Debug, Clone)]
pub struct RewardProgram {
    pub components: Vec<Component>,
    pub source_text: String,
    catalog: Vec<String>,
}

impl PartialEq for RewardProgram {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components && self.catalog == other.catalog
    }
}

/// Total reward and its per-component breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub total: f64,
    pub per_component: Vec<f64>,
}

pub fn parse_reward(text: &str, catalog: &[String]) -> Result<RewardProgram, RewardError> {
    let components = parse::parse_components(text, catalog)?;
    Ok(RewardProgram { components, source_text: text.to_string(), catalog: catalog.to_vec() })
}

/// Non-finite node values surface as `NonFiniteResult` with an empty name;
/// the caller fills in the component.
fn eval_expr(e: &Expr, lookup: &dyn Fn(&str, usize) -> Result<f64, RewardError>) -> Result<f64, RewardError> {
    let rec = |x: &Expr| eval_expr(x, lookup);
    let v = match e {
        Expr::Const(c) => *c,
        Expr::Feature { name, index } => lookup(name, *index)?,
        Expr::Unary(op, a) => {
            let a = rec(a)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Abs => a.abs(),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Sqrt if a < 0.0 => return Err(RewardError::NegativeSqrt),
                UnaryOp::Sqrt => a.sqrt(),
            }
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = (rec(a)?, rec(b)?);
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div if b.abs() < DIV_EPS => return Err(RewardError::DivisionNearZero),
                BinaryOp::Div => a / b,
                BinaryOp::Pow => a.powf(b),
                BinaryOp::Min => a.min(b),
                BinaryOp::Max => a.max(b),
            }
        }
        Expr::Clip(x, lo, hi) => {
            let (x, lo, hi) = (rec(x)?, rec(lo)?, rec(hi)?);
            x.max(lo).min(hi)
        }
        Expr::Indicator(op, a, b) => {
            let (a, b) = (rec(a)?, rec(b)?);
            if op.holds(a, b) {
                1.0
            } else {
                0.0
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RewardError::NonFiniteResult(String::new()))
    }
}

impl RewardProgram {
    pub fn catalog(&self) -> &[String] {
        &self.catalog
    }

    pub fn component_names(&self) -> Vec<&str> {
        self.components.iter().map(|c| c.name.as_str()).collect()
    }

    /// Distinct feature names used by the program.
    pub fn identifiers(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.components {
            c.expr.identifiers(&mut out);
        }
        out
    }

    fn evaluate_with(&self, lookup: &dyn Fn(&str, usize) -> Result<f64, RewardError>) -> Result<Evaluation, RewardError> {
        let mut per_component = Vec::with_capacity(self.components.len());
        for c in &self.components {
            match eval_expr(&c.expr, lookup) {
                Ok(v) => per_component.push(v),
                Err(RewardError::NonFiniteResult(_)) => return Err(RewardError::NonFiniteResult(c.name.clone())),
                Err(e) => return Err(e),
            }
        }
        let total: f64 = per_component.iter().sum();
        if !total.is_finite() {
            return Err(RewardError::NonFiniteResult("total".into()));
        }
        Ok(Evaluation { total, per_component })
    }

    /// Evaluate on a feature vector aligned with the bound catalog.
    pub fn evaluate(&self, features: &[f64]) -> Result<Evaluation, RewardError> {
        self.evaluate_with(&|name, i| features.get(i).copied().ok_or_else(|| RewardError::MissingFeature(name.to_string())))
    }

    /// Evaluate on named features.
    pub fn evaluate_map(&self, features: &BTreeMap<String, f64>) -> Result<Evaluation, RewardError> {
        self.evaluate_with(&|name, _| features.get(name).copied().ok_or_else(|| RewardError::MissingFeature(name.to_string())))
    }

    /// Named view of an evaluation.
    pub fn named(&self, e: &Evaluation) -> BTreeMap<String, f64> {
        self.components.iter().map(|c| c.name.clone()).zip(e.per_component.iter().copied()).collect()
    }

    /// Rebind to another catalog that contains every used identifier.
    pub fn rebind(&self, catalog: &[String]) -> Result<RewardProgram, RewardError> {
        parse_reward(&self.to_string(), catalog).map(|p| RewardProgram { source_text: self.source_text.clone(), ..p })
    }
}

/// Canonical source text, one component per line.
impl fmt::Display for RewardProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            writeln!(f, "component {} = {}", c.name, c.expr)?;
        }
        Ok(())
    }
}
