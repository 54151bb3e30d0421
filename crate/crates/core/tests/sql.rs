use magmech_core::config::load_params;
use magmech_core::linear_model::Variant;
use magmech_core::params::ValidatedParams;
use magmech_core::spectra::{
    added_noise_at_cooperativity, sql_baseline, sql_baseline_with, state_at_cooperativity, HomodyneRows,
    N_ADD_SQL,
};
use magmech_core::sweep::{run_sweep, SweepSpec};
use magmech_core::build_model;
use std::f64::consts::PI;
use std::path::Path;

fn kerr_free() -> ValidatedParams {
    ValidatedParams::default().with(|p| p.kerr_k = 0.0).unwrap()
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[test]
fn optimal_angle_matches_dense_grid() {
    let p = kerr_free();
    let c_sql = sql_baseline(&p, Variant::FullKerr).unwrap().c_sql;
    for factor in [0.1, 1.0, 10.0] {
        let (q, s) = state_at_cooperativity(&p, factor * c_sql).unwrap();
        let model = build_model(&q, &s, Variant::FullKerr).unwrap();
        let rows = HomodyneRows::new(&model, &q, q.omega_b).unwrap();
        let (phi, n) = rows.optimize().unwrap();
        let (grid_phi, grid_n) = (0..100_000)
            .map(|k| {
                let phi = PI * k as f64 / 1e5;
                (phi, rows.added_noise(phi).unwrap_or(f64::INFINITY))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(angle_gap(phi, grid_phi) < 1e-4, "phi {phi} vs grid {grid_phi}");
        assert!(n <= grid_n + 1e-12);
    }
}

#[test]
fn sql_cooperativity_is_stable_under_refinement() {
    let p = kerr_free();
    let coarse = sql_baseline_with(&p, Variant::FullKerr, 10).unwrap();
    let fine = sql_baseline_with(&p, Variant::FullKerr, 20).unwrap();
    assert!((coarse.c_sql / fine.c_sql - 1.0).abs() < 0.01);
    assert_eq!(coarse.n_add_sql, N_ADD_SQL);
}

#[test]
fn added_noise_is_u_shaped_around_c_sql() {
    let p = kerr_free();
    let base = sql_baseline(&p, Variant::FullKerr).unwrap();
    let below = added_noise_at_cooperativity(&p, Variant::FullKerr, base.c_sql / 10.0).unwrap().1;
    let above = added_noise_at_cooperativity(&p, Variant::FullKerr, base.c_sql * 10.0).unwrap().1;
    assert!(below > 3.0 && above > 3.0, "{below} {above}");
    assert!(base.n_add_min >= 0.5 * 0.99);
}

#[test]
fn low_loss_config_reaches_the_limit_at_c_sql() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/lowloss.toml");
    let p = load_params(&path).unwrap().validate().unwrap();
    let base = sql_baseline(&p, Variant::FullKerr).unwrap();
    let at_sql = added_noise_at_cooperativity(&p, Variant::FullKerr, base.c_sql).unwrap().1;
    assert!((at_sql / N_ADD_SQL - 1.0).abs() < 0.01, "n_add(C_SQL) = {at_sql}");
}

#[test]
fn normalized_sweep_bottoms_out_at_c_sql() {
    let spec = SweepSpec::parse(
        r#"
        metric = "n_add_ratio"
        [[axis]]
        name = "C_over_CSQL"
        scale = "log"
        min = 0.01
        max = 100.0
        points = 41
        "#,
    )
    .unwrap();
    let grid = run_sweep(&kerr_free(), &spec, Variant::FullKerr, 1).unwrap();
    let (k, min) = grid
        .cells
        .iter()
        .enumerate()
        .map(|(k, c)| (k, c.value.unwrap()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!(min >= 0.99, "min ratio {min}");
    assert_eq!(k, 20, "minimum at C/C_SQL = {}", grid.axes[0].values[k]);
}
