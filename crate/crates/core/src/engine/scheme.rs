use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};

/// The leveraging function `ϑ_t = f(t, τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    /// `ϑ_t = −ln τ / (C·2^{t+1})`: RR stays above τ at every round.
    Exact,
    /// `ϑ_t = −ln τ / (2Ct)`: RR stays above `τ^{1+ln t}`.
    Relative,
    /// `ϑ_t = value`.
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeveragingScheme {
    pub kind: SchemeKind,
    pub tau: f64,
    pub c_bound: f64,
}

impl LeveragingScheme {
    pub fn new(kind: SchemeKind, tau: f64, c_bound: f64) -> Result<Self> {
        let scheme = LeveragingScheme { kind, tau, c_bound };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn exact(tau: f64, c_bound: f64) -> Result<Self> {
        Self::new(SchemeKind::Exact, tau, c_bound)
    }

    pub fn relative(tau: f64, c_bound: f64) -> Result<Self> {
        Self::new(SchemeKind::Relative, tau, c_bound)
    }

    /// A constant coefficient; `tau` is kept only for reporting.
    pub fn constant(value: f64, tau: f64, c_bound: f64) -> Result<Self> {
        Self::new(SchemeKind::Constant { value }, tau, c_bound)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_bound > 0.0 && self.c_bound.is_finite()) {
            return Err(FbdeError::InvalidArgument(format!(
                "c_bound must be positive, got {}",
                self.c_bound
            )));
        }
        match self.kind {
            SchemeKind::Exact | SchemeKind::Relative => {
                if !(self.tau > 0.0 && self.tau < 1.0) {
                    return Err(FbdeError::InvalidTau(self.tau));
                }
            }
            SchemeKind::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(FbdeError::InvalidArgument(format!(
                        "constant leverage must be nonnegative, got {value}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `ϑ_t` for round `t ≥ 1`.
    pub fn leverage(&self, t: usize) -> f64 {
        assert!(t >= 1, "rounds are numbered from 1");
        let neg_log_tau = -self.tau.ln();
        match self.kind {
            SchemeKind::Exact => neg_log_tau / (self.c_bound * 2f64.powi(t as i32 + 1)),
            SchemeKind::Relative => neg_log_tau / (2.0 * self.c_bound * t as f64),
            SchemeKind::Constant { value } => value,
        }
    }

    /// `Σ_{k≤t} ϑ_k`
    pub fn cumulative_leverage(&self, t: usize) -> f64 {
        (1..=t).map(|k| self.leverage(k)).sum()
    }

    /// Guaranteed lower bound on `RR(Q_t)`.
    pub fn rr_lower_bound(&self, t: usize) -> f64 {
        match self.kind {
            SchemeKind::Exact => self.tau,
            SchemeKind::Relative => self.tau.powf(1.0 + (t.max(1) as f64).ln()),
            SchemeKind::Constant { .. } => {
                (-2.0 * self.c_bound * self.cumulative_leverage(t)).exp()
            }
        }
    }

    /// `ε_t` such that `Q_t` lies in the relative mollifier of size `2ε_t`
    /// around `Q₀`, i.e. `RR(Q_t) ≥ exp(−ε_t)`.
    pub fn mollifier_size(&self, t: usize) -> f64 {
        let neg_log_tau = -self.tau.ln();
        match self.kind {
            SchemeKind::Exact => neg_log_tau,
            SchemeKind::Relative => (1.0 + (t.max(1) as f64).ln()) * neg_log_tau,
            SchemeKind::Constant { .. } => 2.0 * self.c_bound * self.cumulative_leverage(t),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::Exact => write!(f, "exact"),
            SchemeKind::Relative => write!(f, "relative"),
            SchemeKind::Constant { value } => write!(f, "const:{value}"),
        }
    }
}

/// Parses `exact`, `relative` or `const:<value>`.
impl FromStr for SchemeKind {
    type Err = FbdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SchemeKind::Exact),
            "relative" => Ok(SchemeKind::Relative),
            _ => {
                let value = s
                    .strip_prefix("const:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| {
                        FbdeError::InvalidArgument(format!(
                            "unknown scheme {s:?}; expected exact, relative or const:<value>"
                        ))
                    })?;
                Ok(SchemeKind::Constant { value })
            }
        }
    }
}
