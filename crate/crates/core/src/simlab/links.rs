use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

type LinkFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Link function `f` in `Y = f(⟨X, β₁⟩, …, ⟨X, β_k⟩) + ε`.
#[derive(Clone)]
pub enum LinkFunction {
    /// `3u + 10 sin u`
    F1,
    /// `√2 u + 4 exp(−2u²)`
    F2,
    /// `u²`
    F3,
    /// `|u|`
    F4,
    /// `4u² + 3 cos u`
    F5,
    Identity,
    /// `Σ u_ℓ²`, any arity.
    SumSquares,
    Custom {
        name: String,
        arity: usize,
        f: Arc<LinkFn>,
    },
}

impl LinkFunction {
    pub fn custom(name: impl Into<String>, arity: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        LinkFunction::Custom {
            name: name.into(),
            arity,
            f: Arc::new(f),
        }
    }

    /// Number of indices the link takes; `None` for any.
    pub fn arity(&self) -> Option<usize> {
        match self {
            LinkFunction::SumSquares => None,
            LinkFunction::Custom { arity, .. } => Some(*arity),
            _ => Some(1),
        }
    }

    pub fn check_arity(&self, k: usize) -> Result<()> {
        match self.arity() {
            Some(a) if a != k => Err(Error::invalid(format!("link `{self}` takes {a} indices, got {k}"))),
            _ => Ok(()),
        }
    }

    /// Evaluates a scalar link.
    pub fn eval1(&self, u: f64) -> f64 {
        self.eval(&[u])
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            LinkFunction::F1 => 3.0 * u[0] + 10.0 * u[0].sin(),
            LinkFunction::F2 => std::f64::consts::SQRT_2 * u[0] + 4.0 * (-2.0 * u[0] * u[0]).exp(),
            LinkFunction::F3 => u[0] * u[0],
            LinkFunction::F4 => u[0].abs(),
            LinkFunction::F5 => 4.0 * u[0] * u[0] + 3.0 * u[0].cos(),
            LinkFunction::Identity => u[0],
            LinkFunction::SumSquares => u.iter().map(|v| v * v).sum(),
            LinkFunction::Custom { f, .. } => f(u),
        }
    }
}

impl fmt::Debug for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinkFunction({self})")
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LinkFunction::F1 => "f1",
            LinkFunction::F2 => "f2",
            LinkFunction::F3 => "f3",
            LinkFunction::F4 => "f4",
            LinkFunction::F5 => "f5",
            LinkFunction::Identity => "identity",
            LinkFunction::SumSquares => "sum-squares",
            LinkFunction::Custom { name, .. } => name,
        };
        f.write_str(s)
    }
}

impl FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "f1" => LinkFunction::F1,
            "f2" => LinkFunction::F2,
            "f3" => LinkFunction::F3,
            "f4" => LinkFunction::F4,
            "f5" => LinkFunction::F5,
            "identity" => LinkFunction::Identity,
            "sum-squares" => LinkFunction::SumSquares,
            other => {
                return Err(Error::invalid(format!(
                    "unknown link `{other}` (expected f1..f5, identity or sum-squares)"
                )))
            }
        })
    }
}
