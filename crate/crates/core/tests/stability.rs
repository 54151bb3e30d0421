use magmech_core::linear_model::Variant;
use magmech_core::params::ValidatedParams;
use magmech_core::spectra::{sql_baseline, state_at_cooperativity};
use magmech_core::stability::{classify, hurwitz_determinants, Verdict};
use magmech_core::build_model;
use nalgebra::SMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Roots of a monic sextic from its companion matrix.
fn companion_roots(coeffs: &[f64; 7]) -> Vec<nalgebra::Complex<f64>> {
    let mut c = SMatrix::<f64, 6, 6>::zeros();
    for j in 0..6 {
        c[(0, j)] = -coeffs[j + 1];
    }
    for i in 1..6 {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues().iter().copied().collect()
}

fn poly_from_roots(roots: &[nalgebra::Complex<f64>]) -> [f64; 7] {
    let mut c = vec![nalgebra::Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![nalgebra::Complex::new(0.0, 0.0); c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k] += v;
            next[k + 1] -= v * r;
        }
        c = next;
    }
    std::array::from_fn(|k| c[k].re)
}

#[test]
fn hurwitz_agrees_with_root_finder() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut stable, mut unstable, mut skipped) = (0, 0, 0);
    for n in 0..1000 {
        let coeffs = if n % 2 == 0 {
            let mut roots = Vec::new();
            while roots.len() < 6 {
                let re = rng.random_range(-2.0..0.3);
                if roots.len() < 4 && rng.random_bool(0.5) {
                    let im = rng.random_range(0.1..3.0);
                    roots.push(nalgebra::Complex::new(re, im));
                    roots.push(nalgebra::Complex::new(re, -im));
                } else {
                    roots.push(nalgebra::Complex::new(re, 0.0));
                }
            }
            poly_from_roots(&roots)
        } else {
            let mut c = [1.0; 7];
            for v in c.iter_mut().skip(1) {
                *v = rng.random_range(-1.0..6.0);
            }
            c
        };
        let roots = companion_roots(&coeffs);
        let re_max = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
        if re_max.abs() < 1e-9 {
            skipped += 1;
            continue;
        }
        let rh = hurwitz_determinants(&coeffs).iter().all(|d| *d > 0.0);
        assert_eq!(rh, re_max < 0.0, "coeffs {coeffs:?} roots {roots:?}");
        if rh {
            stable += 1;
        } else {
            unstable += 1;
        }
    }
    assert!(stable > 200 && unstable > 200, "{stable} stable, {unstable} unstable, {skipped} skipped");
}

#[test]
fn zero_kerr_is_stable_at_small_cooperativity() {
    let p = ValidatedParams::default().with(|p| p.kerr_k = 0.0).unwrap();
    let c_sql = sql_baseline(&p, Variant::FullKerr).unwrap().c_sql;
    for k in 0..=12 {
        let c = c_sql * 10f64.powf(-2.0 + 0.5 * k as f64);
        let (q, state) = state_at_cooperativity(&p, c).unwrap();
        let model = build_model(&q, &state, Variant::FullKerr).unwrap();
        let report = classify(&model).unwrap();
        assert!(report.agreement);
        if c <= c_sql * 1e2 {
            assert_eq!(report.verdict, Verdict::Stable, "C = {c:e}");
        }
    }
}

#[test]
fn strong_blue_drive_is_unstable() {
    let p = ValidatedParams::default().with(|p| p.kerr_k = 0.0).unwrap();
    let c_sql = sql_baseline(&p, Variant::FullKerr).unwrap().c_sql;
    let (q, state) = state_at_cooperativity(&p, c_sql * 1e6).unwrap();
    let model = build_model(&q, &state, Variant::FullKerr).unwrap();
    assert_eq!(classify(&model).unwrap().verdict, Verdict::Unstable);
}
