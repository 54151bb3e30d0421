//! Quantum-noise model of a cavity-magnomechanical force sensor with a
//! magnon Kerr nonlinearity.
//!
//! The pipeline runs params → steady state → linearized model → spectra, with
//! stability checks in between and a parallel sweep engine on top.

pub mod config;
mod dd;
pub mod error;
pub mod linear_model;
pub mod params;
pub mod spectra;
pub mod stability;
pub mod steady_state;
pub mod sweep;

pub use error::{Error, Result};
pub use linear_model::{build_model, LinearModel, Variant};
pub use params::{PhysicalParams, ValidatedParams};
pub use stability::{classify, StabilityReport, Verdict};
pub use steady_state::{solve_steady_state, BranchPolicy, SteadyState};

/// Crate version recorded in output metadata.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
