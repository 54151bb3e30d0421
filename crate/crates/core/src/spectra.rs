//! Frequency-domain response, homodyne spectra and added noise.

use std::io::Write;

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_model::{
    build_model, magnon_number_for, noise_full, LinearModel, NoiseFull, Variant, XI,
};
use crate::params::{PhysicalParams, ValidatedParams, HBAR};
use crate::stability::{classify, Verdict};
use crate::steady_state::{drive_for_magnon_number, solve_steady_state, SteadyState, C64};

pub type Transfer = SMatrix<C64, 6, 5>;
pub type OutputTransfer = SMatrix<C64, 4, 5>;
pub type Row = SVector<C64, 5>;

/// Below this mechanical gain the added noise is undefined.
pub const MIN_TRANSDUCTION: f64 = 1e-30;
/// Added noise at the standard quantum limit.
pub const N_ADD_SQL: f64 = 0.5;
/// Coarse φ scan resolution of [`optimize_homodyne`].
pub const PHI_SCAN_POINTS: usize = 256;

/// T(ω) = (−iωI − A)⁻¹ B
pub fn transfer_matrix(model: &LinearModel, omega: f64) -> Result<Transfer> {
    let m = SMatrix::<C64, 6, 6>::from_fn(|r, c| {
        let diag = if r == c { C64::new(0.0, -omega) } else { C64::new(0.0, 0.0) };
        diag - model.drift[(r, c)]
    });
    let b = model.input.map(|v| C64::new(v, 0.0));
    m.lu()
        .solve(&b)
        .filter(|t| t.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or(Error::SingularSystem { omega })
}

/// Output quadratures (X_a, Y_a, X_m, Y_m) per input channel.
pub fn output_transfer(model: &LinearModel, p: &PhysicalParams, omega: f64) -> Result<OutputTransfer> {
    let t = transfer_matrix(model, omega)?;
    let mut out = OutputTransfer::zeros();
    for r in 0..4 {
        let rate = if r < 2 { p.kappa_a } else { p.kappa_m };
        for c in 0..5 {
            out[(r, c)] = t[(r, c)] * rate.sqrt();
        }
        out[(r, r)] -= 1.0;
    }
    Ok(out)
}

/// Cavity output rows at one frequency, from which every homodyne angle
/// follows without another linear solve.
#[derive(Debug, Clone, Copy)]
pub struct HomodyneRows {
    x: Row,
    y: Row,
    noise: NoiseFull,
    n_th: f64,
    omega: f64,
}

impl HomodyneRows {
    pub fn new(model: &LinearModel, p: &PhysicalParams, omega: f64) -> Result<Self> {
        let out = output_transfer(model, p, omega)?;
        Ok(HomodyneRows {
            x: out.row(0).transpose(),
            y: out.row(1).transpose(),
            noise: noise_full(p)?,
            n_th: model.n_th,
            omega,
        })
    }

    /// Transfer from each input to X_φ^out = cos φ X_a^out + sin φ Y_a^out.
    pub fn row(&self, phi: f64) -> Row {
        self.x * C64::new(phi.cos(), 0.0) + self.y * C64::new(phi.sin(), 0.0)
    }

    /// (S̄_II, R_m^φ) at this frequency.
    pub fn spectrum(&self, phi: f64) -> (f64, f64) {
        let t = self.row(phi);
        // t(−ω) = conj t(ω) because A and B are real
        let plus = (t.transpose() * self.noise * t.conjugate())[(0, 0)];
        let tm = t.conjugate();
        let minus = (tm.transpose() * self.noise * tm.conjugate())[(0, 0)];
        let s = (plus + minus) * 0.5;
        debug_assert!(s.im.abs() <= 1e-12 * s.norm().max(f64::MIN_POSITIVE));
        (s.re, t[XI].norm_sqr())
    }

    /// Added noise, or +∞ when the mechanics does not reach the output.
    fn n_add_or_inf(&self, phi: f64) -> f64 {
        let (s, r) = self.spectrum(phi);
        if r < MIN_TRANSDUCTION {
            f64::INFINITY
        } else {
            s / r - (self.n_th + 0.5)
        }
    }

    pub fn added_noise(&self, phi: f64) -> Result<f64> {
        let n = self.n_add_or_inf(phi);
        if n.is_finite() {
            Ok(n)
        } else {
            Err(Error::NoTransduction {
                omega: self.omega,
                phi,
            })
        }
    }

    /// Golden-section refinement of a 256-point scan over φ ∈ [0, π).
    pub fn optimize(&self) -> Result<(f64, f64)> {
        let step = std::f64::consts::PI / PHI_SCAN_POINTS as f64;
        let scan: Vec<f64> = (0..PHI_SCAN_POINTS)
            .map(|k| self.n_add_or_inf(k as f64 * step))
            .collect();
        let (k_best, &n_best) = scan
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("scan is non-empty");
        if !n_best.is_finite() {
            return Err(Error::NoTransduction {
                omega: self.omega,
                phi: 0.0,
            });
        }
        let centre = k_best as f64 * step;
        let (phi, n) = golden_min(|phi| self.n_add_or_inf(phi), centre - step, centre + step, 1e-12);
        let (phi, n) = if n <= n_best { (phi, n) } else { (centre, n_best) };
        Ok((phi.rem_euclid(std::f64::consts::PI), n))
    }
}

/// Minimizes a unimodal `f` on [lo, hi]; returns (argmin, min).
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (hi - lo).abs() > tol * (1.0 + lo.abs().max(hi.abs())) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub fn ensure_stable(model: &LinearModel) -> Result<()> {
    match classify(model)?.verdict {
        Verdict::Stable => Ok(()),
        _ => Err(Error::Unstable),
    }
}

/// (S̄_II, R_m^φ) at a single frequency and angle.
pub fn homodyne_spectrum(model: &LinearModel, p: &PhysicalParams, omega: f64, phi: f64) -> Result<(f64, f64)> {
    ensure_stable(model)?;
    Ok(HomodyneRows::new(model, p, omega)?.spectrum(phi))
}

/// n_add = S̄_II / R_m^φ − (n̄ + 1/2)
pub fn added_noise(model: &LinearModel, p: &PhysicalParams, omega: f64, phi: f64) -> Result<f64> {
    ensure_stable(model)?;
    HomodyneRows::new(model, p, omega)?.added_noise(phi)
}

/// Best homodyne angle in [0, π) and the added noise there.
pub fn optimize_homodyne(model: &LinearModel, p: &PhysicalParams, omega: f64) -> Result<(f64, f64)> {
    ensure_stable(model)?;
    HomodyneRows::new(model, p, omega)?.optimize()
}

/// S̄_FF = 2ħ m_eff γ_b ω_b (n̄ + 1/2 + n_add)
pub fn force_psd(p: &PhysicalParams, n_add: &[f64], n_th: f64) -> Vec<f64> {
    let pre = 2.0 * HBAR * p.m_eff * p.gamma_b * p.omega_b;
    n_add.iter().map(|n| pre * (n_th + 0.5 + n)).collect()
}

/// Standard-quantum-limit reference for the Kerr-free system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqlBaseline {
    pub c_sql: f64,
    pub n_add_sql: f64,
    /// Added noise actually reached at C_SQL with the optimal angle.
    pub n_add_min: f64,
    pub phi_at_min: f64,
}

/// Steady state whose magnon number realizes cooperativity `c`, reached by
/// setting the drive to the exact inverse of the fixed-point map.
pub fn state_at_cooperativity(p: &ValidatedParams, c: f64) -> Result<(ValidatedParams, SteadyState)> {
    let x = magnon_number_for(p, c);
    let drive = drive_for_magnon_number(p, x);
    let q = p.with(|q| q.drive_omega = drive)?;
    let states = solve_steady_state(&q)?;
    let best = states
        .iter()
        .min_by(|a, b| (a.n_m - x).abs().total_cmp(&(b.n_m - x).abs()))
        .copied()
        .expect("solver returns at least one state");
    if (best.n_m - x).abs() > 1e-6 * x {
        return Err(Error::Scan(format!(
            "no steady state at cooperativity {c:e} (closest |m_s|^2 = {:e}, wanted {x:e})",
            best.n_m
        )));
    }
    Ok((q, best))
}

/// Optimal-angle added noise at ω_b for cooperativity `c`.
pub fn added_noise_at_cooperativity(p: &ValidatedParams, variant: Variant, c: f64) -> Result<(f64, f64)> {
    let (q, s) = state_at_cooperativity(p, c)?;
    let model = build_model(&q, &s, variant)?;
    optimize_homodyne(&model, &q, q.omega_b)
}

/// Cooperativity range scanned by [`sql_baseline`].
pub const SQL_SCAN_DECADES: (f64, f64) = (-3.0, 5.0);

pub fn sql_baseline(p: &ValidatedParams, variant: Variant) -> Result<SqlBaseline> {
    sql_baseline_with(p, variant, 10)
}

/// SQL search with `per_decade` coarse points per decade of C.
pub fn sql_baseline_with(p: &ValidatedParams, variant: Variant, per_decade: usize) -> Result<SqlBaseline> {
    let p = p.with(|q| q.kerr_k = 0.0)?;
    if p.g_mb == 0.0 {
        return Err(Error::Scan("g_mb = 0 leaves no cooperativity to scan".into()));
    }
    let (lo, hi) = SQL_SCAN_DECADES;
    let n = ((hi - lo) * per_decade as f64).round() as usize + 1;
    let eval = |log_c: f64| {
        added_noise_at_cooperativity(&p, variant, 10f64.powf(log_c))
            .map(|r| r.1)
            .unwrap_or(f64::INFINITY)
    };
    let logs: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let values: Vec<f64> = logs.par_iter().map(|&l| eval(l)).collect();
    let (k, &best) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is non-empty");
    if !best.is_finite() || k == 0 || k == n - 1 {
        return Err(Error::Scan(format!(
            "no interior added-noise minimum for C in [1e{lo}, 1e{hi}]"
        )));
    }
    let (log_c, _) = golden_min(eval, logs[k - 1], logs[k + 1], 1e-10);
    let c_sql = 10f64.powf(log_c);
    let (phi, n_min) = added_noise_at_cooperativity(&p, variant, c_sql)?;
    Ok(SqlBaseline {
        c_sql,
        n_add_sql: N_ADD_SQL,
        n_add_min: n_min,
        phi_at_min: phi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Lin,
    Log,
}

/// Angular-frequency grid, serialized alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub scale: GridScale,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl FrequencyGrid {
    /// Linear window of relative half-width `half` around ω_b.
    pub fn around(omega_b: f64, half: f64, points: usize) -> Self {
        FrequencyGrid {
            scale: GridScale::Lin,
            min: omega_b * (1.0 - half),
            max: omega_b * (1.0 + half),
            points,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || !(self.min <= self.max) {
            return Err(Error::Domain(format!("bad frequency grid {self:?}")));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let last = (self.points - 1) as f64;
        Ok(match self.scale {
            GridScale::Lin => (0..self.points)
                .map(|k| self.min + (self.max - self.min) * k as f64 / last)
                .collect(),
            GridScale::Log => {
                if self.min <= 0.0 {
                    return Err(Error::Domain("log grid needs positive bounds".into()));
                }
                let (a, b) = (self.min.ln(), self.max.ln());
                (0..self.points)
                    .map(|k| (a + (b - a) * k as f64 / last).exp())
                    .collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub omega_grid: Vec<f64>,
    pub phi: f64,
    pub s_ii: Vec<f64>,
    pub r_m_phi: Vec<f64>,
    pub n_add: Vec<f64>,
    pub s_ff: Vec<f64>,
}

/// Evaluates every quantity on `omegas`, in parallel, in grid order.
/// Points without mechanical transduction get an infinite n_add and S_FF.
pub fn spectrum(model: &LinearModel, p: &PhysicalParams, omegas: &[f64], phi: f64) -> Result<SpectrumResult> {
    ensure_stable(model)?;
    let rows: Vec<(f64, f64, f64)> = omegas
        .par_iter()
        .map(|&w| {
            let h = HomodyneRows::new(model, p, w)?;
            let (s, r) = h.spectrum(phi);
            Ok((s, r, h.added_noise(phi).unwrap_or(f64::INFINITY)))
        })
        .collect::<Result<_>>()?;
    let n_add: Vec<f64> = rows.iter().map(|r| r.2).collect();
    Ok(SpectrumResult {
        omega_grid: omegas.to_vec(),
        phi,
        s_ii: rows.iter().map(|r| r.0).collect(),
        r_m_phi: rows.iter().map(|r| r.1).collect(),
        s_ff: force_psd(p, &n_add, model.n_th),
        n_add,
    })
}

pub const SPECTRUM_HEADER: [&str; 5] = ["omega_rad_s", "s_ii", "r_m_phi", "n_add", "s_ff_N2_per_Hz"];

pub fn write_spectrum_csv<W: Write>(result: &SpectrumResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(SPECTRUM_HEADER).map_err(io)?;
    for k in 0..result.omega_grid.len() {
        w.write_record(
            [
                result.omega_grid[k],
                result.s_ii[k],
                result.r_m_phi[k],
                result.n_add[k],
                result.s_ff[k],
            ]
            .map(|v| format!("{v:e}")),
        )
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a spectrum CSV back; φ is not stored in the CSV and is passed in.
pub fn read_spectrum_csv<R: std::io::Read>(input: R, phi: f64) -> Result<SpectrumResult> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().map(str::trim).ne(SPECTRUM_HEADER) {
        return Err(Error::Parse(format!("unexpected spectrum header {headers:?}")));
    }
    let mut cols: [Vec<f64>; 5] = Default::default();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        for (k, field) in rec.iter().enumerate().take(5) {
            cols[k].push(
                field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number `{field}`")))?,
            );
        }
    }
    let [omega_grid, s_ii, r_m_phi, n_add, s_ff] = cols;
    Ok(SpectrumResult {
        omega_grid,
        phi,
        s_ii,
        r_m_phi,
        n_add,
        s_ff,
    })
}

/// Metadata written next to a spectrum CSV.
pub fn spectrum_sidecar(
    result: &SpectrumResult,
    p: &PhysicalParams,
    variant: Variant,
    grid: &FrequencyGrid,
) -> serde_json::Value {
    serde_json::json!({
        "params": p,
        "variant": variant,
        "phi": result.phi,
        "grid": grid,
        "code_version": crate::CODE_VERSION,
    })
}
