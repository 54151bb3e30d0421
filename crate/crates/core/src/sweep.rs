//! Parameter sweeps over one or two axes, evaluated in parallel with
//! deterministic row-major output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linear_model::{build_model, Variant};
use crate::params::{PhysicalParams, ValidatedParams, TWO_PI};
use crate::spectra::{force_psd, sql_baseline, state_at_cooperativity, HomodyneRows, N_ADD_SQL};
use crate::stability::{classify, stability_map, CellVerdict, Verdict};
use crate::steady_state::{steady_state, BranchPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisName {
    #[serde(rename = "C_over_CSQL")]
    COverCsql,
    K,
    #[serde(rename = "phi")]
    Phi,
    #[serde(rename = "g_mb")]
    GMb,
    #[serde(rename = "g_ma")]
    GMa,
    T,
    #[serde(rename = "omega")]
    Omega,
}

impl AxisName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisName::COverCsql => "C_over_CSQL",
            AxisName::K => "K",
            AxisName::Phi => "phi",
            AxisName::GMb => "g_mb",
            AxisName::GMa => "g_ma",
            AxisName::T => "T",
            AxisName::Omega => "omega",
        }
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Lin,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    NAddRatio,
    SFf,
    PhiOpt,
    Stability,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::NAddRatio => "n_add_ratio",
            Metric::SFf => "s_ff",
            Metric::PhiOpt => "phi_opt",
            Metric::Stability => "stability",
        }
    }
}

/// One sweep axis. Frequencies (K, g_mb, g_ma, omega) are in Hz (value/2π),
/// T in kelvin, phi in radians, C_over_CSQL dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: AxisName,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl AxisSpec {
    pub fn range(name: AxisName, scale: Scale, min: f64, max: f64, points: usize) -> Self {
        AxisSpec {
            name,
            scale,
            min: Some(min),
            max: Some(max),
            points: Some(points),
            values: None,
        }
    }

    pub fn list(name: AxisName, values: Vec<f64>) -> Self {
        AxisSpec {
            name,
            scale: Scale::Lin,
            min: None,
            max: None,
            points: None,
            values: Some(values),
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let bad = |msg: String| Err(Error::Spec(format!("axis {}: {msg}", self.name)));
        let vals = match (&self.values, self.min, self.max, self.points) {
            (Some(v), None, None, None) => {
                if v.is_empty() {
                    return bad("empty value list".into());
                }
                v.clone()
            }
            (None, Some(lo), Some(hi), Some(n)) => {
                if n < 2 {
                    return bad(format!("points must be >= 2, got {n}"));
                }
                if !(lo < hi) {
                    return bad(format!("min {lo} must be below max {hi}"));
                }
                let last = (n - 1) as f64;
                match self.scale {
                    Scale::Lin => (0..n).map(|k| lo + (hi - lo) * k as f64 / last).collect(),
                    Scale::Log => {
                        if lo <= 0.0 {
                            return bad("log scale needs positive bounds".into());
                        }
                        let (a, b) = (lo.log10(), hi.log10());
                        (0..n)
                            .map(|k| 10f64.powf(a + (b - a) * k as f64 / last))
                            .collect()
                    }
                }
            }
            _ => return bad("give either `values` or all of `min`, `max`, `points`".into()),
        };
        if vals.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value".into());
        }
        if self.scale == Scale::Log && vals.iter().any(|v| *v <= 0.0) {
            return bad("log scale needs positive values".into());
        }
        Ok(vals)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    /// Evaluation frequency in Hz; defaults to the mechanical resonance.
    #[serde(default, rename = "omega_hz_over_2pi", skip_serializing_if = "Option::is_none")]
    pub omega_hz: Option<f64>,
    /// Fixed homodyne angle; the optimal angle is used per cell when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(rename = "axis", default)]
    pub axes: Vec<AxisSpec>,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Spec(e.message().to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn check(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::Spec(format!("need 1 or 2 axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(Error::Spec(format!("axis {} given twice", self.axes[0].name)));
        }
        let has_phi = self.axes.iter().any(|a| a.name == AxisName::Phi);
        if has_phi && (self.phi.is_some() || self.metric == Metric::PhiOpt) {
            return Err(Error::Spec("phi axis conflicts with a fixed or optimized phi".into()));
        }
        if let Some(w) = self.omega_hz {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Spec(format!("bad evaluation frequency {w}")));
            }
        }
        for a in &self.axes {
            a.values()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Stable,
    Unstable,
    Marginal,
    Error,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Stable => "stable",
            CellStatus::Unstable => "unstable",
            CellStatus::Marginal => "marginal",
            CellStatus::Error => "error",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "ok" => CellStatus::Ok,
            "stable" => CellStatus::Stable,
            "unstable" => CellStatus::Unstable,
            "marginal" => CellStatus::Marginal,
            "error" => CellStatus::Error,
            _ => return Err(Error::Parse(format!("unknown cell status `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub status: CellStatus,
    pub value: Option<f64>,
    pub phi: Option<f64>,
    pub message: Option<String>,
}

impl Cell {
    fn failed(status: CellStatus, message: Option<String>) -> Self {
        Cell {
            status,
            value: None,
            phi: None,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub params: PhysicalParams,
    pub params_hash: String,
    pub variant: Variant,
    pub omega_policy: String,
    pub phi_policy: String,
    pub c_sql: Option<f64>,
    pub n_add_sql: f64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub spec: SweepSpec,
    pub axes: Vec<Axis>,
    /// Row-major: the last axis varies fastest.
    pub cells: Vec<Cell>,
    pub meta: GridMeta,
}

impl SweepGrid {
    /// Fraction of cells with a result (a value, or a verdict for
    /// stability maps).
    pub fn computed_fraction(&self) -> f64 {
        let ok = self
            .cells
            .iter()
            .filter(|c| match self.spec.metric {
                Metric::Stability => c.status != CellStatus::Error,
                _ => c.status == CellStatus::Ok,
            })
            .count();
        ok as f64 / self.cells.len() as f64
    }

    /// Coordinates of cell `idx`.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        match self.axes.as_slice() {
            [a] => vec![a.values[idx]],
            [a, b] => vec![a.values[idx / b.values.len()], b.values[idx % b.values.len()]],
            _ => unreachable!("grids have one or two axes"),
        }
    }

    pub fn file_stem(&self) -> String {
        let mut stem = self.spec.metric.as_str().to_string();
        for a in &self.axes {
            stem.push('_');
            stem.push_str(a.name.as_str());
        }
        stem.push('_');
        stem.push_str(&self.meta.params_hash[..8]);
        stem
    }
}

/// SHA-256 over the canonical JSON of spec, parameters and variant.
pub fn spec_hash(spec: &SweepSpec, params: &PhysicalParams, variant: Variant) -> String {
    let canonical = serde_json::json!({
        "spec": spec,
        "params": params,
        "variant": variant,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

struct Context<'a> {
    base: &'a PhysicalParams,
    spec: &'a SweepSpec,
    variant: Variant,
    c_sql: Option<f64>,
}

impl Context<'_> {
    fn prepare(&self, coords: &[f64]) -> Result<(ValidatedParams, Option<f64>, Option<f64>, Option<f64>)> {
        let mut p = *self.base;
        let mut phi = self.spec.phi;
        let mut omega = self.spec.omega_hz.map(|w| TWO_PI * w);
        let mut c_ratio = None;
        for (axis, &v) in self.spec.axes.iter().zip(coords) {
            match axis.name {
                AxisName::COverCsql => c_ratio = Some(v),
                AxisName::K => p.kerr_k = TWO_PI * v,
                AxisName::Phi => phi = Some(v),
                AxisName::GMb => p.g_mb = TWO_PI * v,
                AxisName::GMa => p.g_ma = TWO_PI * v,
                AxisName::T => p.bath_t = v,
                AxisName::Omega => omega = Some(TWO_PI * v),
            }
        }
        Ok((p.validate().map_err(Error::Validation)?, c_ratio, phi, omega))
    }

    fn model(&self, coords: &[f64]) -> Result<(ValidatedParams, crate::LinearModel, Option<f64>, Option<f64>)> {
        let (p, c_ratio, phi, omega) = self.prepare(coords)?;
        let (p, state) = match c_ratio {
            Some(r) => {
                let c_sql = self.c_sql.expect("C_SQL is computed for C axes");
                state_at_cooperativity(&p, r * c_sql)?
            }
            None => {
                let s = steady_state(&p, BranchPolicy::Lowest)?;
                (p, s)
            }
        };
        let model = build_model(&p, &state, self.variant)?;
        Ok((p, model, phi, omega))
    }

    fn verdict(&self, coords: &[f64]) -> Result<Verdict> {
        let (_, model, _, _) = self.model(coords)?;
        Ok(classify(&model)?.verdict)
    }

    fn evaluate(&self, coords: &[f64]) -> Cell {
        match self.try_evaluate(coords) {
            Ok(cell) => cell,
            Err(e) => Cell::failed(CellStatus::Error, Some(e.to_string())),
        }
    }

    fn try_evaluate(&self, coords: &[f64]) -> Result<Cell> {
        let (p, model, phi, omega) = self.model(coords)?;
        match classify(&model)?.verdict {
            Verdict::Stable => {}
            Verdict::Unstable => return Ok(Cell::failed(CellStatus::Unstable, None)),
            Verdict::Marginal => return Ok(Cell::failed(CellStatus::Marginal, None)),
        }
        let rows = HomodyneRows::new(&model, &p, omega.unwrap_or(p.omega_b))?;
        let (phi, n_add) = match phi {
            Some(f) => (f, rows.added_noise(f)?),
            None => rows.optimize()?,
        };
        let value = match self.spec.metric {
            Metric::NAddRatio => n_add / N_ADD_SQL,
            Metric::SFf => force_psd(&p, &[n_add], model.n_th)[0],
            Metric::PhiOpt => phi,
            Metric::Stability => unreachable!("stability cells are classified only"),
        };
        Ok(Cell {
            status: CellStatus::Ok,
            value: Some(value),
            phi: Some(phi),
            message: None,
        })
    }
}

/// Runs a sweep on `jobs` worker threads (0 = rayon default).
pub fn run_sweep(base: &ValidatedParams, spec: &SweepSpec, variant: Variant, jobs: usize) -> Result<SweepGrid> {
    spec.check()?;
    let axes: Vec<Axis> = spec
        .axes
        .iter()
        .map(|a| Ok(Axis { name: a.name, values: a.values()? }))
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Scan(e.to_string()))?;

    pool.install(|| {
        let needs_sql = axes.iter().any(|a| a.name == AxisName::COverCsql);
        let c_sql = if needs_sql {
            Some(sql_baseline(base, variant)?.c_sql)
        } else {
            None
        };
        let ctx = Context {
            base,
            spec,
            variant,
            c_sql,
        };
        let first = &axes[0].values;
        let second: &[f64] = axes.get(1).map_or(&[f64::NAN], |a| &a.values);
        let pick = |x: f64, y: f64| -> Vec<f64> {
            if axes.len() == 1 {
                vec![x]
            } else {
                vec![x, y]
            }
        };

        let cells: Vec<Cell> = if spec.metric == Metric::Stability {
            stability_map(first, second, |x, y| ctx.verdict(&pick(x, y)))
                .into_iter()
                .map(|v| match v {
                    CellVerdict::Stable => Cell::failed(CellStatus::Stable, None),
                    CellVerdict::Unstable => Cell::failed(CellStatus::Unstable, None),
                    CellVerdict::Marginal => Cell::failed(CellStatus::Marginal, None),
                    CellVerdict::Error(m) => Cell::failed(CellStatus::Error, Some(m)),
                })
                .collect()
        } else {
            (0..first.len() * second.len())
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / second.len(), idx % second.len());
                    ctx.evaluate(&pick(first[i], second[j]))
                })
                .collect()
        };

        let grid = SweepGrid {
            spec: spec.clone(),
            meta: GridMeta {
                params: **base,
                params_hash: spec_hash(spec, base, variant),
                variant,
                omega_policy: match spec.omega_hz {
                    _ if axes.iter().any(|a| a.name == AxisName::Omega) => "axis".into(),
                    Some(w) => format!("fixed {w:e} Hz"),
                    None => "mechanical resonance".into(),
                },
                phi_policy: match spec.phi {
                    _ if spec.metric == Metric::Stability => "none".into(),
                    _ if axes.iter().any(|a| a.name == AxisName::Phi) => "axis".into(),
                    Some(f) => format!("fixed {f:e} rad"),
                    None => "optimal per cell".into(),
                },
                c_sql,
                n_add_sql: N_ADD_SQL,
                code_version: crate::CODE_VERSION.to_string(),
            },
            axes,
            cells,
        };
        if grid.computed_fraction() == 0.0 {
            return Err(Error::AllCellsFailed);
        }
        Ok(grid)
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

/// CSV body of a grid.
pub fn grid_csv(grid: &SweepGrid) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let stability = grid.spec.metric == Metric::Stability;
    let mut header: Vec<String> = if stability {
        (1..=grid.axes.len()).map(|k| format!("axis{k}")).collect()
    } else {
        grid.axes.iter().map(|a| a.name.to_string()).collect()
    };
    if stability {
        header.push("verdict".into());
    } else {
        header.extend([grid.spec.metric.as_str().into(), "phi_used".into(), "status".into()]);
    }
    w.write_record(&header).map_err(csv_err)?;
    for (idx, cell) in grid.cells.iter().enumerate() {
        let mut rec: Vec<String> = grid.coords(idx).iter().map(|v| format!("{v:e}")).collect();
        rec.push(cell.status.as_str().into());
        if !stability {
            let status = rec.pop().expect("status just pushed");
            rec.extend([fmt_opt(cell.value), fmt_opt(cell.phi), status]);
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// JSON sidecar of a grid.
pub fn grid_sidecar(grid: &SweepGrid, csv_name: &str) -> Result<Vec<u8>> {
    let errors: Vec<serde_json::Value> = grid
        .cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.message.as_ref().map(|m| serde_json::json!({"index": i, "message": m})))
        .collect();
    let doc = serde_json::json!({
        "csv": csv_name,
        "spec": grid.spec,
        "axes": grid.axes,
        "meta": grid.meta,
        "errors": errors,
    });
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other("output path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `{stem}.csv` and `{stem}.json` into `dir`.
pub fn emit(grid: &SweepGrid, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let stem = grid.file_stem();
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let csv = grid_csv(grid)?;
    let json = grid_sidecar(grid, &format!("{stem}.csv"))?;
    write_atomic(&csv_path, &csv)?;
    write_atomic(&json_path, &json)?;
    Ok((csv_path, json_path))
}

#[derive(Deserialize)]
struct Sidecar {
    spec: SweepSpec,
    axes: Vec<Axis>,
    meta: GridMeta,
    errors: Vec<SidecarError>,
}

#[derive(Deserialize)]
struct SidecarError {
    index: usize,
    message: String,
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad number `{field}`")))
}

/// Reads a grid back from its CSV and the JSON sidecar next to it.
pub fn parse(csv_path: &Path) -> Result<SweepGrid> {
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(csv_path.with_extension("json"))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let stability = sidecar.spec.metric == Metric::Stability;
    let n_axes = sidecar.axes.len();
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| Error::Parse(e.to_string()))?;
    let mut cells = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |k: usize| rec.get(k).ok_or_else(|| Error::Parse(format!("short row {rec:?}")));
        let cell = if stability {
            Cell::failed(CellStatus::parse(field(n_axes)?.trim())?, None)
        } else {
            Cell {
                value: parse_opt(field(n_axes)?)?,
                phi: parse_opt(field(n_axes + 1)?)?,
                status: CellStatus::parse(field(n_axes + 2)?.trim())?,
                message: None,
            }
        };
        cells.push(cell);
    }
    for e in sidecar.errors {
        let cell = cells
            .get_mut(e.index)
            .ok_or_else(|| Error::Parse(format!("error index {} out of range", e.index)))?;
        cell.message = Some(e.message);
    }
    Ok(SweepGrid {
        spec: sidecar.spec,
        axes: sidecar.axes,
        cells,
        meta: sidecar.meta,
    })
}
