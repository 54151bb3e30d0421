//! Linearized quadrature dynamics around a steady state.
//!
//! State order is (δX_a, δY_a, δX_m, δY_m, δQ, δP) and input order is
//! (X_a^in, Y_a^in, X_m^in, Y_m^in, ξ), with X = (o + o†)/√2 and
//! Y = (o − o†)/(i√2).

use std::fmt;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, HBAR, K_B};
use crate::steady_state::{residual, residual_tolerance, SteadyState, C64};

pub type Drift = SMatrix<f64, 6, 6>;
pub type Input = SMatrix<f64, 6, 5>;
pub type Noise = SMatrix<f64, 5, 5>;
pub type NoiseFull = SMatrix<C64, 5, 5>;

pub const N_STATE: usize = 6;
pub const N_INPUT: usize = 5;
/// Index of the mechanical force input ξ.
pub const XI: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Kerr enters only through the shifted magnon detuning.
    AsPrinted,
    /// Exact Jacobian, including the parametric m_s^2 δm† term.
    #[default]
    FullKerr,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::AsPrinted => "as-printed",
            Variant::FullKerr => "full-kerr",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-printed" | "as_printed" => Ok(Variant::AsPrinted),
            "full-kerr" | "full_kerr" => Ok(Variant::FullKerr),
            _ => Err(Error::Parse(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub drift: Drift,
    pub input: Input,
    pub noise_sym: Noise,
    pub variant: Variant,
    /// G = i√2 g_mb m_s
    pub g_eff: C64,
    pub n_th: f64,
}

/// Bose–Einstein occupancy of a mode at `omega` and temperature `t`.
pub fn bose_occupancy(omega: f64, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Domain(format!("bath temperature {t} K is negative")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (K_B * t)).exp_m1())
}

/// Symmetrized, frequency-flat input correlations.
pub fn noise_correlations(p: &PhysicalParams) -> Result<Noise> {
    let n = bose_occupancy(p.omega_b, p.bath_t)?;
    Ok(Noise::from_diagonal(&SVector::<f64, 5>::from([
        0.5,
        0.5,
        0.5,
        0.5,
        n + 0.5,
    ])))
}

/// Non-symmetrized input correlations, with the ±i/2 vacuum X–Y terms.
pub fn noise_full(p: &PhysicalParams) -> Result<NoiseFull> {
    let mut n = noise_correlations(p)?.map(|v| C64::new(v, 0.0));
    for k in [0, 2] {
        n[(k, k + 1)] = C64::new(0.0, 0.5);
        n[(k + 1, k)] = C64::new(0.0, -0.5);
    }
    Ok(n)
}

/// G = i√2 g_mb m_s
pub fn effective_coupling(p: &PhysicalParams, state: &SteadyState) -> C64 {
    C64::i() * (2f64.sqrt() * p.g_mb) * state.m_s
}

/// Magnomechanical cooperativity |G|^2 / (κ_m γ_b).
pub fn cooperativity(p: &PhysicalParams, n_m: f64) -> f64 {
    2.0 * p.g_mb * p.g_mb * n_m / (p.kappa_m * p.gamma_b)
}

/// Magnon number giving cooperativity `c`.
pub fn magnon_number_for(p: &PhysicalParams, c: f64) -> f64 {
    c * p.kappa_m * p.gamma_b / (2.0 * p.g_mb * p.g_mb)
}

pub fn build_model(p: &PhysicalParams, state: &SteadyState, variant: Variant) -> Result<LinearModel> {
    let res = residual(p, state);
    let tol = residual_tolerance(p);
    if !(res <= tol) {
        return Err(Error::StaleSteadyState {
            residual: res,
            tolerance: tol,
        });
    }

    let x = state.m_s.norm_sqr();
    let g = p.g_ma;
    let big_g = effective_coupling(p, state);
    let delta_bar = p.delta_m + p.g_mb * state.q_s;

    let mut a = Drift::zeros();
    a[(0, 0)] = -p.kappa_a / 2.0;
    a[(1, 1)] = -p.kappa_a / 2.0;
    a[(0, 1)] = p.delta_c;
    a[(1, 0)] = -p.delta_c;
    a[(0, 3)] = g;
    a[(1, 2)] = -g;
    a[(2, 1)] = g;
    a[(3, 0)] = -g;

    a[(2, 2)] = -p.kappa_m / 2.0;
    a[(3, 3)] = -p.kappa_m / 2.0;
    match variant {
        Variant::AsPrinted => {
            let d = delta_bar + 2.0 * p.kerr_k * x;
            a[(2, 3)] = d;
            a[(3, 2)] = -d;
        }
        Variant::FullKerr => {
            let d = delta_bar + 4.0 * p.kerr_k * x;
            let w = 2.0 * p.kerr_k * state.m_s * state.m_s;
            a[(2, 3)] = d - w.re;
            a[(3, 2)] = -d - w.re;
            a[(2, 2)] += w.im;
            a[(3, 3)] -= w.im;
        }
    }
    a[(2, 4)] = -big_g.re;
    a[(3, 4)] = -big_g.im;

    a[(4, 5)] = p.omega_b;
    a[(5, 4)] = -p.omega_b;
    a[(5, 5)] = -p.gamma_b;
    a[(5, 2)] = -big_g.im;
    a[(5, 3)] = big_g.re;

    let mut b = Input::zeros();
    b[(0, 0)] = p.kappa_a.sqrt();
    b[(1, 1)] = p.kappa_a.sqrt();
    b[(2, 2)] = p.kappa_m.sqrt();
    b[(3, 3)] = p.kappa_m.sqrt();
    b[(5, XI)] = (2.0 * p.gamma_b).sqrt();

    let noise_sym = noise_correlations(p)?;
    Ok(LinearModel {
        drift: a,
        input: b,
        n_th: noise_sym[(XI, XI)] - 0.5,
        noise_sym,
        variant,
        g_eff: big_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ValidatedParams, TWO_PI};
    use crate::steady_state::{solve_steady_state, steady_state, BranchPolicy};
    use proptest::prelude::*;
    use std::ops::{Add, Mul, Neg, Sub};

    /// Forward-mode dual number for the Jacobian oracle.
    #[derive(Clone, Copy, Debug)]
    struct D {
        v: f64,
        d: f64,
    }

    impl D {
        fn c(v: f64) -> D {
            D { v, d: 0.0 }
        }
    }
    impl Add for D {
        type Output = D;
        fn add(self, o: D) -> D {
            D { v: self.v + o.v, d: self.d + o.d }
        }
    }
    impl Sub for D {
        type Output = D;
        fn sub(self, o: D) -> D {
            D { v: self.v - o.v, d: self.d - o.d }
        }
    }
    impl Mul for D {
        type Output = D;
        fn mul(self, o: D) -> D {
            D { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
        }
    }
    impl Neg for D {
        type Output = D;
        fn neg(self) -> D {
            D { v: -self.v, d: -self.d }
        }
    }

    /// Right-hand side of the mean-field equations in real coordinates
    /// (Re a, Im a, Re m, Im m, Q, P).
    fn rhs(p: &PhysicalParams, s: [D; 6]) -> [D; 6] {
        let k = D::c;
        let [ar, ai, mr, mi, q, pp] = s;
        let n = mr * mr + mi * mi;
        // -(iΔc + κa/2) a - i g m
        let da_r = k(-p.kappa_a / 2.0) * ar + k(p.delta_c) * ai + k(p.g_ma) * mi;
        let da_i = k(-p.kappa_a / 2.0) * ai - k(p.delta_c) * ar - k(p.g_ma) * mr;
        // -(i(Δm + g_mb Q + 2K n) + κm/2) m - i g a + Ω
        let det = k(p.delta_m) + k(p.g_mb) * q + k(2.0 * p.kerr_k) * n;
        let dm_r =
            k(-p.kappa_m / 2.0) * mr + det * mi + k(p.g_ma) * ai + k(p.drive_omega);
        let dm_i = k(-p.kappa_m / 2.0) * mi - det * mr - k(p.g_ma) * ar;
        let dq = k(p.omega_b) * pp;
        let dp = -(k(p.omega_b) * q) - k(p.g_mb) * n - k(p.gamma_b) * pp;
        [da_r, da_i, dm_r, dm_i, dq, dp]
    }

    fn jacobian(p: &PhysicalParams, s: &SteadyState) -> Drift {
        let point = [s.a_s.re, s.a_s.im, s.m_s.re, s.m_s.im, s.q_s, 0.0];
        let mut j = Drift::zeros();
        for col in 0..6 {
            let seeded: [D; 6] = std::array::from_fn(|i| D {
                v: point[i],
                d: if i == col { 1.0 } else { 0.0 },
            });
            for (row, out) in rhs(p, seeded).iter().enumerate() {
                j[(row, col)] = out.d;
            }
        }
        // quadratures are √2 times the real coordinates for the two modes
        let scale = [2f64.sqrt(), 2f64.sqrt(), 2f64.sqrt(), 2f64.sqrt(), 1.0, 1.0];
        Drift::from_fn(|r, c| j[(r, c)] * scale[r] / scale[c])
    }

    fn assert_close(a: &Drift, b: &Drift, rel: f64) {
        let norm = a.amax().max(b.amax());
        for r in 0..6 {
            for c in 0..6 {
                let (x, y) = (a[(r, c)], b[(r, c)]);
                assert!(
                    (x - y).abs() <= rel * x.abs().max(y.abs()) + 1e-15 * norm,
                    "entry ({r},{c}): {x} vs {y}"
                );
            }
        }
    }

    fn model_for(edit: impl FnOnce(&mut PhysicalParams), v: Variant) -> (ValidatedParams, LinearModel) {
        let p = ValidatedParams::default().with(edit).unwrap();
        let s = steady_state(&p, BranchPolicy::Lowest).unwrap();
        let m = build_model(&p, &s, v).unwrap();
        (p, m)
    }

    #[test]
    fn variants_coincide_without_kerr() {
        let (_, a) = model_for(|p| p.kerr_k = 0.0, Variant::AsPrinted);
        let (_, b) = model_for(|p| p.kerr_k = 0.0, Variant::FullKerr);
        assert_eq!(a, LinearModel { variant: Variant::AsPrinted, ..b });
    }

    #[test]
    fn decoupled_drift_is_block_diagonal() {
        let (p, m) = model_for(
            |p| {
                p.g_ma = 0.0;
                p.g_mb = 0.0;
                p.kerr_k = 0.0;
            },
            Variant::FullKerr,
        );
        for r in 0..6 {
            for c in 0..6 {
                if r / 2 != c / 2 {
                    assert_eq!(m.drift[(r, c)], 0.0, "({r},{c})");
                }
            }
        }
        let mut re: Vec<f64> = m.drift.complex_eigenvalues().iter().map(|l| l.re).collect();
        re.sort_by(|a, b| a.total_cmp(b));
        let mut want = vec![-p.kappa_a / 2.0, -p.kappa_a / 2.0, -p.kappa_m / 2.0, -p.kappa_m / 2.0];
        want.extend([-p.gamma_b / 2.0; 2]);
        want.sort_by(|a, b| a.total_cmp(b));
        for (got, w) in re.iter().zip(&want) {
            assert!((got - w).abs() <= 1e-9 * w.abs(), "{got} vs {w}");
        }
    }

    #[test]
    fn damping_diagonal_and_mechanics_rows() {
        let (p, m) = model_for(|p| p.kerr_k = 0.0, Variant::AsPrinted);
        let diag: Vec<f64> = (0..6).map(|i| m.drift[(i, i)]).collect();
        assert_eq!(
            diag,
            vec![
                -p.kappa_a / 2.0,
                -p.kappa_a / 2.0,
                -p.kappa_m / 2.0,
                -p.kappa_m / 2.0,
                0.0,
                -p.gamma_b
            ]
        );
        let q_row: Vec<f64> = (0..6).map(|c| m.drift[(4, c)]).collect();
        assert_eq!(q_row, vec![0.0, 0.0, 0.0, 0.0, 0.0, p.omega_b]);
    }

    #[test]
    fn passive_trace() {
        let (p, m) = model_for(
            |p| {
                p.kerr_k = 0.0;
                p.g_mb = 0.0;
            },
            Variant::FullKerr,
        );
        let sub = m.drift.fixed_view::<4, 4>(0, 0).into_owned();
        assert!((sub.trace() + p.kappa_a + p.kappa_m).abs() <= 1e-9 * p.kappa_a);
        for l in sub.complex_eigenvalues().iter() {
            assert!((l.re + (p.kappa_a + p.kappa_m) / 4.0).abs() <= 1e-6 * p.kappa_a);
        }
    }

    #[test]
    fn full_kerr_is_the_jacobian() {
        for k in [0.0, 1.2e-9, 6.4e-9, 5e-5] {
            let p = ValidatedParams::default()
                .with(|p| p.kerr_k = TWO_PI * k)
                .unwrap();
            for s in solve_steady_state(&p).unwrap() {
                let m = build_model(&p, &s, Variant::FullKerr).unwrap();
                assert_close(&m.drift, &jacobian(&p, &s), 1e-12);
            }
        }
    }

    #[test]
    fn as_printed_differs_from_jacobian_with_kerr() {
        let (p, m) = model_for(|p| p.kerr_k = TWO_PI * 5e-5, Variant::AsPrinted);
        let s = steady_state(&p, BranchPolicy::Lowest).unwrap();
        let j = jacobian(&p, &s);
        assert!((m.drift - j).amax() > 1e-6 * j.amax());
    }

    #[test]
    fn stale_state_is_rejected() {
        let p = ValidatedParams::default();
        let mut s = steady_state(&p, BranchPolicy::Lowest).unwrap();
        s.m_s *= 1.01;
        assert!(matches!(
            build_model(&p, &s, Variant::FullKerr),
            Err(Error::StaleSteadyState { .. })
        ));
    }

    #[test]
    fn bose_closed_forms() {
        assert_eq!(bose_occupancy(1.0, 0.0).unwrap(), 0.0);
        let w = TWO_PI * 1e7;
        let t = HBAR * w / (K_B * 2f64.ln());
        assert!((bose_occupancy(w, t).unwrap() - 1.0).abs() < 1e-12);
        let hot = 1e4 * HBAR * w / K_B;
        let n = bose_occupancy(w, hot).unwrap();
        assert!((n - (1e4 - 0.5)).abs() <= 0.005 * 1e4);
        assert!(bose_occupancy(w, -1.0).is_err());
    }

    #[test]
    fn noise_entries() {
        let p = ValidatedParams::default().with(|p| p.bath_t = 0.0).unwrap();
        assert_eq!(noise_correlations(&p).unwrap()[(4, 4)], 0.5);
        let full = noise_full(&p).unwrap();
        assert_eq!(full[(0, 1)], C64::new(0.0, 0.5));
        assert_eq!(full[(3, 2)], C64::new(0.0, -0.5));
        let sym = (full + full.transpose()).map(|z| z.re / 2.0);
        assert_eq!(sym, noise_correlations(&p).unwrap());
    }

    #[test]
    fn variant_names() {
        for v in [Variant::AsPrinted, Variant::FullKerr] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("printed".parse::<Variant>().is_err());
    }

    proptest! {
        #[test]
        fn noise_is_psd(t in 0.0f64..10.0, fb in 1e3f64..1e9) {
            let p = ValidatedParams::default()
                .with(|p| { p.bath_t = t; p.omega_b = TWO_PI * fb; })
                .unwrap();
            let n = noise_correlations(&p).unwrap();
            prop_assert_eq!(n, n.transpose());
            for l in n.symmetric_eigenvalues().iter() {
                prop_assert!(*l >= 0.0);
            }
        }

        #[test]
        fn jacobian_identity_random(
            kerr in 0.0f64..1e-4,
            dm in -2.0f64..2.0,
            dc in -2.0f64..2.0,
            drive in 1e9f64..1e13,
        ) {
            let p = ValidatedParams::default()
                .with(|p| {
                    p.kerr_k = TWO_PI * kerr;
                    p.delta_m = dm * p.omega_b;
                    p.delta_c = dc * p.omega_b;
                    p.drive_omega = drive;
                })
                .unwrap();
            for s in solve_steady_state(&p).unwrap() {
                let m = build_model(&p, &s, Variant::FullKerr).unwrap();
                assert_close(&m.drift, &jacobian(&p, &s), 1e-12);
            }
        }
    }
}
