#![allow(dead_code)]

use magmech_core::linear_model::{build_model, LinearModel, Variant};
use magmech_core::params::{PhysicalParams, ValidatedParams, HBAR, K_B};
use magmech_core::stability::{classify, Verdict};
use magmech_core::steady_state::{solve_steady_state, SteadyState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Temperature at which k_B T = ħ·1 rad/s.
pub const UNIT_T: f64 = HBAR / K_B;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Random parameters in units where omega_b = 1.
pub fn random_params(rng: &mut ChaCha8Rng) -> PhysicalParams {
    PhysicalParams {
        omega_a: 1e3,
        omega_m: 1e3,
        omega_b: 1.0,
        delta_c: rng.random_range(-3.0..3.0),
        delta_m: rng.random_range(-3.0..3.0),
        kappa_a: log_uniform(rng, 0.3, 5.0),
        kappa_m: log_uniform(rng, 0.3, 5.0),
        gamma_b: log_uniform(rng, 0.08, 0.5),
        g_ma: rng.random_range(0.0..1.5),
        g_mb: rng.random_range(0.001..0.05),
        kerr_k: rng.random_range(0.0..0.01),
        drive_omega: rng.random_range(0.5..8.0),
        bath_t: rng.random_range(0.0..3.0) * UNIT_T,
        m_eff: 1.0,
    }
}

pub struct StableSample {
    pub params: ValidatedParams,
    pub state: SteadyState,
    pub model: LinearModel,
}

/// Draws until the lowest branch is stable with every decay rate at least
/// `min_decay`.
pub fn stable_sample(
    rng: &mut ChaCha8Rng,
    variant: Variant,
    min_decay: f64,
    edit: impl Fn(&mut PhysicalParams),
) -> StableSample {
    for _ in 0..10_000 {
        let mut raw = random_params(rng);
        edit(&mut raw);
        let params = raw.validate().expect("random params validate");
        let state = solve_steady_state(&params).expect("steady state")[0];
        let model = build_model(&params, &state, variant).expect("model");
        let report = classify(&model).expect("classify");
        let slowest = report
            .eigenvalues
            .iter()
            .map(|l| -l.re)
            .fold(f64::INFINITY, f64::min);
        if report.verdict == Verdict::Stable && slowest >= min_decay {
            return StableSample { params, state, model };
        }
    }
    panic!("no stable sample found");
}
