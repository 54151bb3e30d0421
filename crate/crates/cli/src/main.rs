use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use magmech_core::config::load_params;
use magmech_core::linear_model::{build_model, cooperativity, Variant};
use magmech_core::params::{ValidatedParams, TWO_PI};
use magmech_core::spectra::{
    optimize_homodyne, spectrum, spectrum_sidecar, sql_baseline_with, write_spectrum_csv,
    FrequencyGrid, GridScale,
};
use magmech_core::stability::classify;
use magmech_core::steady_state::{solve_steady_state, BranchPolicy};
use magmech_core::sweep::{emit, run_sweep, write_atomic, Metric, SweepSpec};
use magmech_core::{Error, CODE_VERSION};

#[derive(Parser)]
#[command(name = "magmech", version, about = "Quantum-noise model of a Kerr cavity-magnomechanical force sensor")]
struct Cli {
    /// Parameter file (TOML key = value); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Linearization variant.
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantArg>,

    /// Steady-state branch: lowest, highest or index:K.
    #[arg(long, global = true, default_value = "lowest", value_parser = parse_branch)]
    branch: BranchPolicy,

    /// Output directory.
    #[arg(long, global = true, env = "MAGMECH_OUT", default_value = ".")]
    out: PathBuf,

    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Seed recorded in the manifest.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    AsPrinted,
    FullKerr,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::AsPrinted => Variant::AsPrinted,
            VariantArg::FullKerr => Variant::FullKerr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Lin,
    Log,
}

#[derive(Subcommand)]
enum Command {
    /// List every steady-state branch with its stability.
    Steady,
    /// Homodyne spectrum, added noise and force PSD on a frequency grid.
    Spectrum {
        /// Homodyne angle in rad; optimal at the mechanical resonance if omitted.
        #[arg(long)]
        phi: Option<f64>,
        /// Lower grid edge in Hz (default: 0.9999 of the mechanical frequency).
        #[arg(long)]
        omega_min_hz: Option<f64>,
        /// Upper grid edge in Hz (default: 1.0001 of the mechanical frequency).
        #[arg(long)]
        omega_max_hz: Option<f64>,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long, value_enum, default_value = "lin")]
        scale: ScaleArg,
    },
    /// Run a sweep spec and write CSV + JSON.
    Sweep { spec: PathBuf },
    /// Standard-quantum-limit cooperativity and added noise.
    Sql {
        /// Coarse scan points per decade of cooperativity.
        #[arg(long, default_value_t = 10)]
        per_decade: usize,
    },
    /// Stability verdicts over the axes of a sweep spec.
    StabilityMap { spec: PathBuf },
}

fn parse_branch(s: &str) -> Result<BranchPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(_)
            | Error::Config(_)
            | Error::Spec(_)
            | Error::Parse(_)
            | Error::Domain(_) => 2,
            Error::RootFinder { .. }
            | Error::StaleSteadyState { .. }
            | Error::NoSuchBranch(_)
            | Error::SingularSystem { .. }
            | Error::NoTransduction { .. }
            | Error::StabilityDisagreement { .. } => 3,
            Error::Unstable => 4,
            Error::Scan(_) | Error::AllCellsFailed => 5,
            Error::Io(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type Outcome = Result<(), Failure>;

struct Run<'a> {
    cli: &'a Cli,
    params: ValidatedParams,
    config_hash: String,
    started: Instant,
}

impl Run<'_> {
    fn variant(&self, spec: Option<Variant>) -> Variant {
        self.cli.variant.map(Variant::from).or(spec).unwrap_or_default()
    }

    fn write_json(&self, path: &Path, value: &Value) -> Outcome {
        let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values always serialize");
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
        Ok(())
    }

    fn manifest(&self, name: &str, stem: &str, variant: Variant, outputs: &[&Path]) -> Outcome {
        let outputs: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
        let doc = json!({
            "subcommand": name,
            "config": self.cli.config.as_ref().map(|p| p.display().to_string()),
            "config_sha256": self.config_hash,
            "params": *self.params,
            "variant": variant,
            "branch": self.cli.branch.to_string(),
            "jobs": self.cli.jobs,
            "seed": self.cli.seed,
            "outputs": outputs,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "code_version": CODE_VERSION,
        });
        let path = self.cli.out.join(format!("{stem}.manifest.json"));
        self.write_json(&path, &doc)?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

fn load(cli: &Cli) -> Result<(ValidatedParams, String), Failure> {
    match &cli.config {
        None => Ok((ValidatedParams::default(), "default".into())),
        Some(path) => {
            let bytes = fs::read(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let params = load_params(path)?;
            let params = params.validate().map_err(Error::Validation)?;
            Ok((params, hex::encode(Sha256::digest(&bytes))))
        }
    }
}

fn cmd_steady(run: &Run) -> Outcome {
    let p = &run.params;
    let variant = run.variant(None);
    let states = solve_steady_state(p)?;
    println!(
        "{:<7} {:<8} {:>14} {:>14} {:>14} {:>11} {:>11}  verdict",
        "index", "branch", "|m_s|^2", "Q_s", "delta_eff/2pi", "C", "residual"
    );
    let mut rows = Vec::new();
    for (k, s) in states.iter().enumerate() {
        let verdict = build_model(p, s, variant)
            .and_then(|m| classify(&m))
            .map(|r| r.verdict.to_string())
            .unwrap_or_else(|e| format!("error: {e}"));
        let c = cooperativity(p, s.n_m);
        println!(
            "{:<7} {:<8} {:>14.6e} {:>14.6e} {:>14.6e} {:>11.4e} {:>11.3e}  {}",
            k,
            s.branch,
            s.n_m,
            s.q_s,
            s.delta_m_eff / TWO_PI,
            c,
            s.residual,
            verdict
        );
        rows.push(json!({
            "index": k,
            "branch": s.branch,
            "n_m": s.n_m,
            "m_s": [s.m_s.re, s.m_s.im],
            "a_s": [s.a_s.re, s.a_s.im],
            "q_s": s.q_s,
            "delta_m_eff": s.delta_m_eff,
            "cooperativity": c,
            "residual": s.residual,
            "verdict": verdict,
        }));
    }
    fs::create_dir_all(&run.cli.out)?;
    let path = run.cli.out.join("steady.json");
    run.write_json(&path, &json!({ "variant": variant, "states": rows }))?;
    run.manifest("steady", "steady", variant, &[&path])
}

fn cmd_spectrum(
    run: &Run,
    phi: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    points: usize,
    scale: ScaleArg,
) -> Outcome {
    let p = &run.params;
    let variant = run.variant(None);
    let states = solve_steady_state(p)?;
    let state = run.cli.branch.select(&states)?;
    let model = build_model(p, state, variant)?;
    let phi = match phi {
        Some(f) => f,
        None => match optimize_homodyne(&model, p, p.omega_b) {
            Ok((phi, _)) => phi,
            Err(Error::NoTransduction { .. }) => {
                eprintln!("warning: no mechanical transduction at omega_b; using phi = 0");
                0.0
            }
            Err(e) => return Err(e.into()),
        },
    };
    let fb = p.omega_b / TWO_PI;
    let grid = FrequencyGrid {
        scale: match scale {
            ScaleArg::Lin => GridScale::Lin,
            ScaleArg::Log => GridScale::Log,
        },
        min: TWO_PI * lo.unwrap_or(fb * (1.0 - 1e-4)),
        max: TWO_PI * hi.unwrap_or(fb * (1.0 + 1e-4)),
        points,
    };
    let result = spectrum(&model, p, &grid.values()?, phi)?;

    fs::create_dir_all(&run.cli.out)?;
    let csv_path = run.cli.out.join("spectrum.csv");
    let json_path = run.cli.out.join("spectrum.json");
    let mut csv = Vec::new();
    write_spectrum_csv(&result, &mut csv)?;
    write_atomic(&csv_path, &csv)?;
    run.write_json(&json_path, &spectrum_sidecar(&result, p, variant, &grid))?;
    let best = result
        .n_add
        .iter()
        .zip(&result.omega_grid)
        .min_by(|a, b| a.0.total_cmp(b.0))
        .expect("grid is non-empty");
    println!("phi = {phi:.6} rad, min n_add = {:.6e} at {:.9e} Hz", best.0, best.1 / TWO_PI);
    println!("wrote {} ({} points)", csv_path.display(), result.omega_grid.len());
    run.manifest("spectrum", "spectrum", variant, &[&csv_path, &json_path])
}

fn cmd_sweep(run: &Run, spec_path: &Path, force_stability: bool) -> Outcome {
    let mut spec = SweepSpec::load(spec_path)?;
    if force_stability {
        spec.metric = Metric::Stability;
    }
    let variant = run.variant(spec.variant);
    let grid = run_sweep(&run.params, &spec, variant, run.cli.jobs)?;
    let (csv_path, json_path) = emit(&grid, &run.cli.out)?;
    let fraction = grid.computed_fraction();
    println!(
        "{} cells, {:.1}% computed; wrote {}",
        grid.cells.len(),
        100.0 * fraction,
        csv_path.display()
    );
    if let Some(c) = grid.meta.c_sql {
        println!("C_SQL = {c:.6e}");
    }
    let name = if force_stability { "stability-map" } else { "sweep" };
    run.manifest(name, &grid.file_stem(), variant, &[&csv_path, &json_path])?;
    if fraction < 0.9 {
        return Err(Failure {
            code: 5,
            message: format!("only {:.1}% of cells computed", 100.0 * fraction),
        });
    }
    Ok(())
}

fn cmd_sql(run: &Run, per_decade: usize) -> Outcome {
    let p = &run.params;
    if p.kerr_k != 0.0 {
        eprintln!("warning: kerr_K = {:e} rad/s ignored; the SQL is defined at K = 0", p.kerr_k);
    }
    let variant = run.variant(None);
    let b = sql_baseline_with(p, variant, per_decade)?;
    println!("C_SQL         = {:.6e}", b.c_sql);
    println!("n_add_SQL     = {}", b.n_add_sql);
    println!("n_add(C_SQL)  = {:.6e}", b.n_add_min);
    println!("phi(C_SQL)    = {:.6} rad", b.phi_at_min);
    fs::create_dir_all(&run.cli.out)?;
    let path = run.cli.out.join("sql.json");
    run.write_json(&path, &serde_json::to_value(b).expect("plain struct"))?;
    run.manifest("sql", "sql", variant, &[&path])
}

fn dispatch(cli: &Cli) -> Outcome {
    let (params, config_hash) = load(cli)?;
    let run = Run {
        cli,
        params,
        config_hash,
        started: Instant::now(),
    };
    match &cli.command {
        Command::Steady => cmd_steady(&run),
        Command::Spectrum {
            phi,
            omega_min_hz,
            omega_max_hz,
            points,
            scale,
        } => cmd_spectrum(&run, *phi, *omega_min_hz, *omega_max_hz, *points, *scale),
        Command::Sweep { spec } => cmd_sweep(&run, spec, false),
        Command::Sql { per_decade } => cmd_sql(&run, *per_decade),
        Command::StabilityMap { spec } => cmd_sweep(&run, spec, true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
