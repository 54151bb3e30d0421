//! Physical parameters of the cavity-magnomechanical sensor.
//!
//! Every frequency-like quantity is stored in angular units (rad/s). Config
//! files may give the same quantities as ordinary frequencies through the
//! `_hz_over_2pi` key suffix; see [`crate::config`].

use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, Violations};

pub const TWO_PI: f64 = 2.0 * PI;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permeability (H/m).
pub const MU_0: f64 = 4.0e-7 * PI;
/// Spin density of YIG (1/m^3).
pub const YIG_SPIN_DENSITY: f64 = 4.22e27;
/// Electron gyromagnetic ratio, 2pi x 28 GHz/T.
pub const GYROMAGNETIC_RATIO: f64 = TWO_PI * 28.0e9;

/// Hamiltonian and bath constants of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub omega_a: f64,
    pub omega_m: f64,
    pub omega_b: f64,
    /// Cavity-drive detuning, omega_a - omega_d.
    pub delta_c: f64,
    /// Magnon-drive detuning, omega_m - omega_d.
    pub delta_m: f64,
    pub kappa_a: f64,
    pub kappa_m: f64,
    pub gamma_b: f64,
    pub g_ma: f64,
    pub g_mb: f64,
    #[serde(rename = "kerr_K")]
    pub kerr_k: f64,
    #[serde(rename = "drive_Omega")]
    pub drive_omega: f64,
    /// Bath temperature (K).
    pub bath_t: f64,
    /// Effective mechanical mass (kg), only enters the force PSD prefactor.
    pub m_eff: f64,
}

impl Default for PhysicalParams {
    /// Typical cavity-magnomechanics magnitudes.
    fn default() -> Self {
        Self {
            omega_a: TWO_PI * 10.0e9,
            omega_m: TWO_PI * 10.0e9,
            omega_b: TWO_PI * 10.0e6,
            delta_c: TWO_PI * 10.0e6,
            delta_m: TWO_PI * 10.0e6,
            kappa_a: TWO_PI * 1.0e6,
            kappa_m: TWO_PI * 1.0e6,
            gamma_b: TWO_PI * 100.0,
            g_ma: TWO_PI * 3.2e6,
            g_mb: TWO_PI * 0.2,
            kerr_k: TWO_PI * 1.2e-9,
            drive_omega: TWO_PI * 2.0e12,
            bath_t: 0.01,
            m_eff: 1.0e-11,
        }
    }
}

impl PhysicalParams {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(self) -> std::result::Result<ValidatedParams, Violations> {
        let mut out = Vec::new();
        let mut check = |field: &'static str, value: f64, ok: bool, rule: &str| {
            if !value.is_finite() {
                out.push(Violation {
                    field,
                    message: format!("{field} must be finite"),
                });
            } else if !ok {
                out.push(Violation {
                    field,
                    message: format!("{field} must be {rule}"),
                });
            }
        };
        check("omega_a", self.omega_a, true, "");
        check("omega_m", self.omega_m, self.omega_m > 0.0, "> 0");
        check("omega_b", self.omega_b, self.omega_b > 0.0, "> 0");
        check("delta_c", self.delta_c, true, "");
        check("delta_m", self.delta_m, true, "");
        check("kappa_a", self.kappa_a, self.kappa_a > 0.0, "> 0");
        check("kappa_m", self.kappa_m, self.kappa_m > 0.0, "> 0");
        check("gamma_b", self.gamma_b, self.gamma_b > 0.0, "> 0");
        check("g_ma", self.g_ma, true, "");
        check("g_mb", self.g_mb, true, "");
        check("kerr_K", self.kerr_k, self.kerr_k >= 0.0, ">= 0");
        check("drive_Omega", self.drive_omega, self.drive_omega >= 0.0, ">= 0");
        check("bath_T", self.bath_t, self.bath_t >= 0.0, ">= 0");
        check("m_eff", self.m_eff, self.m_eff > 0.0, "> 0");
        if out.is_empty() {
            Ok(ValidatedParams(self))
        } else {
            Err(Violations(out))
        }
    }
}

/// A parameter set whose invariants have been checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedParams(PhysicalParams);

impl ValidatedParams {
    pub fn into_inner(self) -> PhysicalParams {
        self.0
    }

    /// Applies `edit` to a copy and re-validates.
    pub fn with(&self, edit: impl FnOnce(&mut PhysicalParams)) -> Result<ValidatedParams> {
        let mut p = self.0;
        edit(&mut p);
        p.validate().map_err(Error::Validation)
    }
}

impl Deref for ValidatedParams {
    type Target = PhysicalParams;

    fn deref(&self) -> &PhysicalParams {
        &self.0
    }
}

impl Default for ValidatedParams {
    fn default() -> Self {
        ValidatedParams(PhysicalParams::default())
    }
}

/// Geometry and material constants of the YIG sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialGeometry {
    /// Sphere diameter (m).
    pub diameter: f64,
    /// Saturation magnetization (A/m).
    pub saturation_m: f64,
    /// First-order magnetocrystalline anisotropy constant (J/m^3).
    pub anisotropy_k: f64,
    /// Spin density (1/m^3).
    pub spin_density: f64,
    /// Gyromagnetic ratio (rad/(s T)).
    pub gyromagnetic: f64,
    /// Drive field amplitude (T).
    pub field_b0: f64,
}

impl MaterialGeometry {
    /// A sphere of the given diameter with default YIG spin density and
    /// gyromagnetic ratio.
    pub fn yig(diameter: f64, saturation_m: f64, anisotropy_k: f64, field_b0: f64) -> Self {
        Self {
            diameter,
            saturation_m,
            anisotropy_k,
            spin_density: YIG_SPIN_DENSITY,
            gyromagnetic: GYROMAGNETIC_RATIO,
            field_b0,
        }
    }

    pub fn volume(&self) -> f64 {
        PI * self.diameter.powi(3) / 6.0
    }

    pub fn spin_count(&self) -> f64 {
        self.spin_density * self.volume()
    }

    fn check_shape(&self) -> Result<()> {
        if !(self.diameter > 0.0) {
            return Err(Error::Domain(format!("diameter must be > 0, got {}", self.diameter)));
        }
        if !(self.saturation_m > 0.0) {
            return Err(Error::Domain(format!(
                "saturation magnetization must be > 0, got {}",
                self.saturation_m
            )));
        }
        if !(self.spin_density > 0.0 && self.gyromagnetic > 0.0) {
            return Err(Error::Domain("material constants must be > 0".into()));
        }
        Ok(())
    }
}

/// Magnon Kerr strength K = mu0 K_an gamma^2 / (M^2 V_m), V_m = pi D^3 / 6.
pub fn derive_kerr(geom: &MaterialGeometry) -> Result<f64> {
    geom.check_shape()?;
    if !(geom.anisotropy_k > 0.0) {
        return Err(Error::Domain(format!(
            "anisotropy constant must be > 0, got {}",
            geom.anisotropy_k
        )));
    }
    let gamma = geom.gyromagnetic;
    Ok(MU_0 * geom.anisotropy_k * gamma * gamma
        / (geom.saturation_m * geom.saturation_m * geom.volume()))
}

/// Drive strength Omega = sqrt(5)/4 gamma sqrt(N) B0 with N = rho V_m.
pub fn derive_drive(geom: &MaterialGeometry) -> Result<f64> {
    geom.check_shape()?;
    if !(geom.field_b0 >= 0.0) {
        return Err(Error::Domain(format!("field B0 must be >= 0, got {}", geom.field_b0)));
    }
    Ok(5f64.sqrt() / 4.0 * geom.gyromagnetic * geom.spin_count().sqrt() * geom.field_b0)
}
