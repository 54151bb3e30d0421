//! Routh–Hurwitz classification of the drift matrix, cross-checked against
//! its eigenvalues.

use std::fmt;
use std::str::FromStr;

use nalgebra::SMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::linear_model::LinearModel;
use crate::steady_state::C64;

pub type Square6 = SMatrix<f64, 6, 6>;

/// Relative width of the marginal band around Re λ = 0.
pub const MARGINAL_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        })
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(Verdict::Stable),
            "unstable" => Ok(Verdict::Unstable),
            "marginal" => Ok(Verdict::Marginal),
            _ => Err(Error::Parse(format!("unknown verdict `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// a_0..a_6 of det(λI − A), a_0 = 1.
    pub coeffs: [f64; 7],
    /// Δ_1..Δ_6 of the characteristic polynomial of A/s, s the power of two
    /// nearest ‖A‖∞.
    pub hurwitz: [f64; 6],
    pub eigenvalues: Vec<C64>,
    pub eigen_real_max: f64,
    pub verdict: Verdict,
    pub agreement: bool,
}

type Square6Dd = [[Dd; 6]; 6];

fn mat_mul(a: &Square6Dd, b: &Square6Dd) -> Square6Dd {
    let mut out = [[Dd::ZERO; 6]; 6];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..6).fold(Dd::ZERO, |acc, k| acc + a[i][k] * b[k][j]);
        }
    }
    out
}

/// Faddeev–LeVerrier recurrence carried out in double-double precision.
fn char_poly_dd(a: &Square6) -> [Dd; 7] {
    let a: Square6Dd = std::array::from_fn(|i| std::array::from_fn(|j| Dd::from(a[(i, j)])));
    let mut coeffs = [Dd::ZERO; 7];
    coeffs[0] = Dd::ONE;
    let mut m = [[Dd::ZERO; 6]; 6];
    for k in 1..=6 {
        m = mat_mul(&a, &m);
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = row[i] + coeffs[k - 1];
        }
        let am = mat_mul(&a, &m);
        let trace = (0..6).fold(Dd::ZERO, |acc, i| acc + am[i][i]);
        coeffs[k] = -trace / Dd::from(k as f64);
    }
    coeffs
}

/// Characteristic polynomial coefficients a_0..a_6 of det(λI − A), by the
/// Faddeev–LeVerrier recurrence.
pub fn char_poly(a: &Square6) -> [f64; 7] {
    char_poly_dd(a).map(Dd::to_f64)
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det_dd(mut m: Vec<Vec<Dd>>) -> Dd {
    let n = m.len();
    let mut det = Dd::ONE;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().to_f64().total_cmp(&m[y][col].abs().to_f64()))
            .expect("non-empty range");
        if m[pivot][col].to_f64() == 0.0 {
            return Dd::ZERO;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det = det * m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                let v = m[col][c];
                m[r][c] = m[r][c] - f * v;
            }
        }
    }
    det
}

fn hurwitz_dd(coeffs: &[Dd; 7]) -> [Dd; 6] {
    let coef = |k: isize| -> Dd {
        if (0..=6).contains(&k) {
            coeffs[k as usize]
        } else {
            Dd::ZERO
        }
    };
    std::array::from_fn(|k| {
        let n = k + 1;
        det_dd(
            (0..n)
                .map(|i| (0..n).map(|j| coef(2 * (j as isize + 1) - (i as isize + 1))).collect())
                .collect(),
        )
    })
}

/// Leading principal minors Δ_1..Δ_6 of the Hurwitz matrix of
/// a_0 λ^6 + ... + a_6.
pub fn hurwitz_determinants(coeffs: &[f64; 7]) -> [f64; 6] {
    hurwitz_dd(&coeffs.map(Dd::from)).map(Dd::to_f64)
}

fn inf_norm(a: &Square6) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Full report for an arbitrary 6×6 drift matrix.
pub fn classify_matrix(a: &Square6) -> Result<StabilityReport> {
    let norm = inf_norm(a);
    let tol = MARGINAL_REL_TOL * norm;

    // power-of-two scaling is exact, so the scaled matrix has the same roots up to s
    let s = if norm > 0.0 && norm.is_finite() {
        2f64.powi(norm.log2().round() as i32)
    } else {
        1.0
    };
    let scaled_coeffs = char_poly_dd(&(a / s));
    let hurwitz_exact = hurwitz_dd(&scaled_coeffs);
    let hurwitz = hurwitz_exact.map(Dd::to_f64);
    let coeffs: [f64; 7] = std::array::from_fn(|k| scaled_coeffs[k].to_f64() * s.powi(k as i32));

    let eigenvalues: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
    let eigen_real_max = eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);

    let rh_stable = hurwitz_exact.iter().all(|d| d.is_positive());
    let eigen_verdict = if eigen_real_max.abs() <= tol {
        Verdict::Marginal
    } else if eigen_real_max < 0.0 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    let rh_verdict = if rh_stable { Verdict::Stable } else { Verdict::Unstable };
    let verdict = if eigen_verdict == Verdict::Marginal {
        Verdict::Marginal
    } else if rh_verdict != eigen_verdict {
        return Err(Error::StabilityDisagreement {
            routh_hurwitz_stable: rh_stable,
            eigen_real_max,
            tolerance: tol,
        });
    } else {
        rh_verdict
    };

    Ok(StabilityReport {
        coeffs,
        hurwitz,
        eigenvalues,
        eigen_real_max,
        verdict,
        agreement: rh_verdict == eigen_verdict,
    })
}

pub fn classify(model: &LinearModel) -> Result<StabilityReport> {
    classify_matrix(&model.drift)
}

/// One cell of a stability map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellVerdict {
    Stable,
    Unstable,
    Marginal,
    Error(String),
}

impl CellVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            CellVerdict::Stable => "stable",
            CellVerdict::Unstable => "unstable",
            CellVerdict::Marginal => "marginal",
            CellVerdict::Error(_) => "error",
        }
    }
}

impl From<Result<Verdict>> for CellVerdict {
    fn from(r: Result<Verdict>) -> Self {
        match r {
            Ok(Verdict::Stable) => CellVerdict::Stable,
            Ok(Verdict::Unstable) => CellVerdict::Unstable,
            Ok(Verdict::Marginal) => CellVerdict::Marginal,
            Err(e) => CellVerdict::Error(e.to_string()),
        }
    }
}

/// Verdict on every (axis1, axis2) pair, row-major in axis1.
///
/// `eval` builds and classifies the model at a cell; failures become
/// [`CellVerdict::Error`] rather than aborting the map.
pub fn stability_map<F>(axis1: &[f64], axis2: &[f64], eval: F) -> Vec<CellVerdict>
where
    F: Fn(f64, f64) -> Result<Verdict> + Sync,
{
    (0..axis1.len() * axis2.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / axis2.len(), idx % axis2.len());
            CellVerdict::from(eval(axis1[i], axis2[j]))
        })
        .collect()
}
