use std::fmt;

use thiserror::Error;

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Every invariant that failed during validation, in field order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn fields(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.0.iter().map(|v| v.field)
    }

    pub fn contains(&self, field: &str) -> bool {
        self.0.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(|v| v.message.clone()).collect();
        f.write_str(&msgs.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(Violations),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("steady-state root finder did not converge for cubic ({c3:e}, {c2:e}, {c1:e}, {c0:e})")]
    RootFinder { c3: f64, c2: f64, c1: f64, c0: f64 },

    #[error("stale steady state: residual {residual:e} exceeds tolerance {tolerance:e}")]
    StaleSteadyState { residual: f64, tolerance: f64 },

    #[error("no steady-state branch matches the requested policy ({0})")]
    NoSuchBranch(String),

    #[error("singular system matrix at omega = {omega:e} rad/s")]
    SingularSystem { omega: f64 },

    #[error("spectrum undefined for unstable fixed point")]
    Unstable,

    #[error("no mechanical transduction at this (omega, phi) = ({omega:e}, {phi})")]
    NoTransduction { omega: f64, phi: f64 },

    #[error("scan failed: {0}")]
    Scan(String),

    #[error(
        "stability verdicts disagree: Routh-Hurwitz says {routh_hurwitz_stable}, \
         max Re(lambda) = {eigen_real_max:e} (tolerance {tolerance:e})"
    )]
    StabilityDisagreement {
        routh_hurwitz_stable: bool,
        eigen_real_max: f64,
        tolerance: f64,
    },

    #[error("invalid sweep spec: {0}")]
    Spec(String),

    #[error("every sweep cell failed or was unstable")]
    AllCellsFailed,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
