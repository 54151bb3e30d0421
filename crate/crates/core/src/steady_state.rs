//! Classical fixed point of the driven Kerr magnomechanical system.
//!
//! Eliminating Q_s and the effective detuning from the mean-field equations
//! leaves a real cubic in the magnon number x = |m_s|^2:
//!
//! ```text
//! x |(i D(x) + kappa_m/2)(i delta_c + kappa_a/2) + g_ma^2|^2 = Omega^2 (delta_c^2 + kappa_a^2/4)
//! D(x) = delta_m + (2K - g_mb^2/omega_b) x
//! ```
//!
//! Every non-negative real root is completed back to (m_s, a_s, Q_s).

use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, ValidatedParams};

pub type C64 = Complex<f64>;

/// Coefficients of c3 x^3 + c2 x^2 + c1 x + c0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrCubic {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl KerrCubic {
    pub fn eval(&self, x: f64) -> f64 {
        ((self.c3 * x + self.c2) * x + self.c1) * x + self.c0
    }

    /// Discriminant of the cubic; positive means three distinct real roots.
    pub fn discriminant(&self) -> f64 {
        let (a, b, c, d) = (self.c3, self.c2, self.c1, self.c0);
        18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c
            - 4.0 * a * c.powi(3)
            - 27.0 * a * a * d * d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Unique,
    Lower,
    Middle,
    Upper,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Unique => "unique",
            Branch::Lower => "lower",
            Branch::Middle => "middle",
            Branch::Upper => "upper",
        })
    }
}

/// Which root to carry forward when several coexist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchPolicy {
    #[default]
    Lowest,
    Highest,
    Index(usize),
}

impl BranchPolicy {
    pub fn select<'a>(&self, states: &'a [SteadyState]) -> Result<&'a SteadyState> {
        let picked = match *self {
            BranchPolicy::Lowest => states.first(),
            BranchPolicy::Highest => states.last(),
            BranchPolicy::Index(k) => states.get(k),
        };
        picked.ok_or_else(|| {
            Error::NoSuchBranch(format!("{self}, {} branch(es) available", states.len()))
        })
    }
}

impl fmt::Display for BranchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchPolicy::Lowest => f.write_str("lowest"),
            BranchPolicy::Highest => f.write_str("highest"),
            BranchPolicy::Index(k) => write!(f, "index:{k}"),
        }
    }
}

impl FromStr for BranchPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest" => Ok(BranchPolicy::Lowest),
            "highest" => Ok(BranchPolicy::Highest),
            _ => s
                .strip_prefix("index:")
                .and_then(|k| k.parse().ok())
                .map(BranchPolicy::Index)
                .ok_or_else(|| Error::Parse(format!("bad branch policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub a_s: C64,
    pub m_s: C64,
    pub q_s: f64,
    /// |m_s|^2
    pub n_m: f64,
    /// delta_m + g_mb Q_s + 2 K |m_s|^2
    pub delta_m_eff: f64,
    pub branch: Branch,
    pub residual: f64,
}

impl SteadyState {
    /// delta_m + g_mb Q_s, the detuning without the Kerr shift.
    pub fn delta_m_bar(&self, p: &PhysicalParams) -> f64 {
        p.delta_m + p.g_mb * self.q_s
    }
}

/// Largest admissible fixed-point mismatch for the given parameters.
pub fn residual_tolerance(p: &PhysicalParams) -> f64 {
    1e-10 * p.drive_omega.max(p.kappa_m)
}

fn cavity_factor(p: &PhysicalParams) -> C64 {
    C64::new(p.kappa_a / 2.0, p.delta_c)
}

/// Nonlinear frequency pull per magnon, 2K - g_mb^2 / omega_b.
pub fn nonlinear_shift(p: &PhysicalParams) -> f64 {
    2.0 * p.kerr_k - p.g_mb * p.g_mb / p.omega_b
}

pub fn kerr_cubic(p: &ValidatedParams) -> KerrCubic {
    let c = cavity_factor(p);
    let pp = C64::i() * c;
    let r = c * (p.kappa_m / 2.0) + p.g_ma * p.g_ma;
    let eta = nonlinear_shift(p);
    let p2 = pp.norm_sqr();
    let pr = (pp * r.conj()).re;
    let d = p.delta_m;
    KerrCubic {
        c3: p2 * eta * eta,
        c2: 2.0 * eta * (p2 * d + pr),
        c1: p2 * d * d + 2.0 * pr * d + r.norm_sqr(),
        c0: -p.drive_omega * p.drive_omega * c.norm_sqr(),
    }
}

/// Drive amplitude that places a root of the cubic at magnon number `x`.
///
/// This is the exact inverse of the fixed-point map, used to reach a target
/// cooperativity self-consistently.
pub fn drive_for_magnon_number(p: &ValidatedParams, x: f64) -> f64 {
    let cubic = kerr_cubic(p);
    let lhs = ((cubic.c3 * x + cubic.c2) * x + cubic.c1) * x;
    (lhs.max(0.0) / cavity_factor(p).norm_sqr()).sqrt()
}

/// Real roots of a x^3 + b x^2 + c x + d via the trigonometric / Cardano
/// forms, before polishing. Expects a != 0.
fn cubic_roots_closed_form(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * c / 3.0 + d;
    let disc = -(4.0 * p.powi(3) + 27.0 * q * q);
    if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect()
    } else {
        let s = (q * q / 4.0 + p.powi(3) / 27.0).max(0.0).sqrt();
        let t = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
        vec![t - shift]
    }
}

/// Newton iterations on a x^3 + b x^2 + c x + d from `y`.
fn polish(coeffs: [f64; 4], mut y: f64) -> f64 {
    let [a, b, c, d] = coeffs;
    for _ in 0..50 {
        let f = ((a * y + b) * y + c) * y + d;
        let df = (3.0 * a * y + 2.0 * b) * y + c;
        if df == 0.0 || !f.is_finite() {
            break;
        }
        let step = f / df;
        y -= step;
        if step.abs() <= 4.0 * f64::EPSILON * y.abs() {
            break;
        }
    }
    y
}

/// Non-negative real roots of the Kerr cubic, ascending and de-duplicated.
pub fn cubic_roots(cubic: &KerrCubic) -> Result<Vec<f64>> {
    let fail = || Error::RootFinder {
        c3: cubic.c3,
        c2: cubic.c2,
        c1: cubic.c1,
        c0: cubic.c0,
    };
    if cubic.c0 == 0.0 {
        return Ok(vec![0.0]);
    }
    if cubic.c3 == 0.0 && cubic.c2 == 0.0 {
        if cubic.c1 == 0.0 {
            return Err(fail());
        }
        return Ok(vec![-cubic.c0 / cubic.c1]);
    }
    // Rescale x = scale * y so the coefficients are comparable in size.
    let scale = [
        (cubic.c0 / cubic.c1).abs(),
        (cubic.c0 / cubic.c2).abs().sqrt(),
        (cubic.c0 / cubic.c3).abs().cbrt(),
    ]
    .into_iter()
    .filter(|s| s.is_finite() && *s > 0.0)
    .fold(f64::INFINITY, f64::min);
    if !scale.is_finite() {
        return Err(fail());
    }
    let raw = [
        cubic.c3 * scale.powi(3),
        cubic.c2 * scale * scale,
        cubic.c1 * scale,
        cubic.c0,
    ];
    let norm = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let coeffs = raw.map(|v| v / norm);

    let guesses = if coeffs[0] == 0.0 {
        // quadratic after rescaling
        let (a, b, c) = (coeffs[1], coeffs[2], coeffs[3]);
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            vec![]
        } else {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            vec![q / a, c / q]
        }
    } else {
        cubic_roots_closed_form(coeffs[0], coeffs[1], coeffs[2], coeffs[3])
    };

    let mut roots: Vec<f64> = guesses
        .into_iter()
        .filter(|y| y.is_finite())
        .map(|y| polish(coeffs, y))
        .filter(|y| y.is_finite() && *y >= 0.0)
        .map(|y| y * scale)
        .collect();
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(b.abs()));
    if roots.is_empty() {
        return Err(fail());
    }
    Ok(roots)
}

/// Completes a magnon number into the full mean-field state.
fn complete(p: &PhysicalParams, x: f64) -> (C64, C64, f64) {
    let c = cavity_factor(p);
    let delta_eff = p.delta_m + nonlinear_shift(p) * x;
    let den = C64::new(p.kappa_m / 2.0, delta_eff) * c + p.g_ma * p.g_ma;
    let m_s = c * p.drive_omega / den;
    let a_s = -C64::i() * p.g_ma * m_s / c;
    (a_s, m_s, m_s.norm_sqr())
}

fn state_from(p: &PhysicalParams, a_s: C64, m_s: C64, branch: Branch) -> SteadyState {
    let n_m = m_s.norm_sqr();
    let q_s = -(p.g_mb / p.omega_b) * n_m;
    let mut s = SteadyState {
        a_s,
        m_s,
        q_s,
        n_m,
        delta_m_eff: p.delta_m + p.g_mb * q_s + 2.0 * p.kerr_k * n_m,
        branch,
        residual: 0.0,
    };
    s.residual = residual(p, &s);
    s
}

/// Completes a known root `x` of the cubic into a steady state.
pub fn state_at(p: &ValidatedParams, x: f64, branch: Branch) -> SteadyState {
    let (a_s, m_s, _) = complete(p, x);
    state_from(p, a_s, m_s, branch)
}

/// All steady states, ascending in |m_s|^2, with branch labels.
pub fn solve_steady_state(p: &ValidatedParams) -> Result<Vec<SteadyState>> {
    if p.drive_omega == 0.0 {
        let zero = C64::new(0.0, 0.0);
        return Ok(vec![state_from(p, zero, zero, Branch::Unique)]);
    }
    let roots = cubic_roots(&kerr_cubic(p))?;
    let labels: &[Branch] = match roots.len() {
        1 => &[Branch::Unique],
        2 => &[Branch::Lower, Branch::Upper],
        _ => &[Branch::Lower, Branch::Middle, Branch::Upper],
    };
    Ok(roots
        .iter()
        .zip(labels)
        .map(|(&x, &b)| state_at(p, x, b))
        .collect())
}

/// Solves and applies a branch policy.
pub fn steady_state(p: &ValidatedParams, policy: BranchPolicy) -> Result<SteadyState> {
    let states = solve_steady_state(p)?;
    policy.select(&states).copied()
}

/// Max-norm mismatch of the cavity, magnon and momentum equations at zero
/// time derivative.
pub fn residual(p: &PhysicalParams, s: &SteadyState) -> f64 {
    let i = C64::i();
    let n = s.m_s.norm_sqr();
    let rhs_a = -C64::new(p.kappa_a / 2.0, p.delta_c) * s.a_s - i * p.g_ma * s.m_s;
    let rhs_m = -C64::new(p.kappa_m / 2.0, p.delta_m) * s.m_s
        - i * p.g_mb * s.q_s * s.m_s
        - i * p.g_ma * s.a_s
        - i * (2.0 * p.kerr_k * n) * s.m_s
        + p.drive_omega;
    let rhs_p = -p.omega_b * s.q_s - p.g_mb * n;
    rhs_a.norm().max(rhs_m.norm()).max(rhs_p.abs())
}
