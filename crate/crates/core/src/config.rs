//! Flat key/value parameter files.
//!
//! The format is TOML restricted to top-level numeric keys. Each key is a
//! [`PhysicalParams`] field name; frequency-like fields may instead be given
//! as ordinary frequencies with the `_hz_over_2pi` suffix. Keys that are not
//! present keep their default value. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, TWO_PI};

pub const HZ_SUFFIX: &str = "_hz_over_2pi";

#[derive(Clone, Copy)]
enum Kind {
    Angular,
    Plain,
}

type Slot = fn(&mut PhysicalParams) -> &mut f64;

const FIELDS: &[(&str, Kind, Slot)] = &[
    ("omega_a", Kind::Angular, |p| &mut p.omega_a),
    ("omega_m", Kind::Angular, |p| &mut p.omega_m),
    ("omega_b", Kind::Angular, |p| &mut p.omega_b),
    ("delta_c", Kind::Angular, |p| &mut p.delta_c),
    ("delta_m", Kind::Angular, |p| &mut p.delta_m),
    ("kappa_a", Kind::Angular, |p| &mut p.kappa_a),
    ("kappa_m", Kind::Angular, |p| &mut p.kappa_m),
    ("gamma_b", Kind::Angular, |p| &mut p.gamma_b),
    ("g_ma", Kind::Angular, |p| &mut p.g_ma),
    ("g_mb", Kind::Angular, |p| &mut p.g_mb),
    ("kerr_K", Kind::Angular, |p| &mut p.kerr_k),
    ("drive_Omega", Kind::Angular, |p| &mut p.drive_omega),
    ("bath_T", Kind::Plain, |p| &mut p.bath_t),
    ("m_eff", Kind::Plain, |p| &mut p.m_eff),
];

fn lookup(key: &str) -> Option<(&'static str, f64, Slot)> {
    for &(name, kind, slot) in FIELDS {
        if key == name {
            return Some((name, 1.0, slot));
        }
        if let Kind::Angular = kind {
            if key.strip_suffix(HZ_SUFFIX) == Some(name) {
                return Some((name, TWO_PI, slot));
            }
        }
    }
    None
}

/// Parses config text on top of [`PhysicalParams::default`].
///
/// The result is not validated; call [`PhysicalParams::validate`].
pub fn parse_params(text: &str) -> Result<PhysicalParams> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    let mut params = PhysicalParams::default();
    let mut seen: Vec<&'static str> = Vec::new();
    for (key, value) in &table {
        let (name, scale, slot) =
            lookup(key).ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        if seen.contains(&name) {
            return Err(Error::Config(format!("key `{name}` given more than once")));
        }
        seen.push(name);
        let number = match value {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            other => {
                return Err(Error::Config(format!(
                    "key `{key}` must be a number, got {}",
                    other.type_str()
                )))
            }
        };
        *slot(&mut params) = number * scale;
    }
    Ok(params)
}

pub fn load_params(path: &Path) -> Result<PhysicalParams> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_params(&text)
}

/// Renders parameters in config syntax, frequencies as `_hz_over_2pi` keys.
pub fn render_params(params: &PhysicalParams) -> String {
    let mut out = String::new();
    let mut p = *params;
    for &(name, kind, slot) in FIELDS {
        let v = *slot(&mut p);
        match kind {
            Kind::Angular => writeln!(out, "{name}{HZ_SUFFIX} = {:?}", v / TWO_PI),
            Kind::Plain => writeln!(out, "{name} = {v:?}"),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_params("# nothing\n").unwrap(), PhysicalParams::default());
    }

    #[test]
    fn hz_suffix_converts_to_angular() {
        let p = parse_params("kappa_a_hz_over_2pi = 2e6\nbath_T = 0.5\nkerr_K = 3").unwrap();
        assert_eq!(p.kappa_a, 2e6 * TWO_PI);
        assert_eq!(p.bath_t, 0.5);
        assert_eq!(p.kerr_k, 3.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_params("kappa_x = 1.0").unwrap_err().to_string();
        assert!(err.contains("kappa_x"), "{err}");
        // plain fields have no Hz form
        assert!(parse_params("bath_T_hz_over_2pi = 1.0").is_err());
    }

    #[test]
    fn duplicate_forms_are_rejected() {
        assert!(parse_params("g_ma = 1.0\ng_ma_hz_over_2pi = 1.0").is_err());
    }

    #[test]
    fn non_numeric_value_is_rejected() {
        let err = parse_params("m_eff = \"heavy\"").unwrap_err().to_string();
        assert!(err.contains("m_eff"), "{err}");
    }

    #[test]
    fn render_round_trips() {
        let p = PhysicalParams::default();
        let back = parse_params(&render_params(&p)).unwrap();
        for ((a, b), name) in [
            (p.omega_b, back.omega_b),
            (p.kerr_k, back.kerr_k),
            (p.g_mb, back.g_mb),
            (p.m_eff, back.m_eff),
        ]
        .into_iter()
        .zip(["omega_b", "kerr_K", "g_mb", "m_eff"])
        {
            assert!((a - b).abs() <= 1e-15 * a.abs(), "{name}: {a} vs {b}");
        }
    }
}
