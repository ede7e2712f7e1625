//! Command-line experiment runner: single solves, baseline comparisons,
//! parameter sweeps and a quick oracle self-test. Every command writes CSV.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bcd::{self, BcdError, SolveReport, StopReason};
use crate::oracle;
use crate::power_alloc;
use crate::scenario::{db_to_linear, dbm_to_watts, ConfigFile, ScenarioConfig, ScenarioError};
use crate::secrecy;
use crate::specfun;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Input(String),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Solver(#[from] BcdError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Input(_) => EXIT_INPUT,
            CliError::Output { .. } | CliError::Csv(_) => EXIT_INPUT,
            CliError::Solver(BcdError::Scenario(_)) => EXIT_INPUT,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "uavjam", version, about = "UAV-jammer secrecy-rate optimizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, clap::Args)]
pub struct Overrides {
    /// Override the sweep limit.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Override the relative-improvement stopping threshold.
    #[arg(long)]
    pub theta: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        if let Some(t) = self.theta {
            cfg.theta = t;
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the alternating optimizer and write trajectory, powers, trace and summary.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one solve per parameter value and write a summary row for each.
    Sweep {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare the optimized scheme against the straight-path baseline.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check the closed forms against the independent oracles.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, CliError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|source| CliError::Output { path: path.display().to_string(), source })?;
    Ok(csv::Writer::from_writer(file))
}

#[derive(Serialize)]
struct TrajectoryRow {
    n: usize,
    x_m: f64,
    y_m: f64,
    z_m: f64,
}

#[derive(Serialize)]
struct PowerRow {
    n: usize,
    pa_w: f64,
    pu_w: f64,
}

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    rs_bits: f64,
    rel_err: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    rs_bits: f64,
    iterations: usize,
    stop_reason: StopReason,
}

#[derive(Serialize)]
struct CompareRow {
    rs_optimized: f64,
    rs_straight: f64,
    gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter_value: f64,
    pub rs_optimized: Option<f64>,
    pub rs_straight: Option<f64>,
    pub status: String,
}

/// Writes `trajectory.csv`, `powers.csv`, `trace.csv` and `summary.csv`.
pub fn write_report(report: &SolveReport, dir: &Path) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let mut w = writer(dir, "trajectory.csv")?;
    for (i, q) in report.final_traj.points.iter().enumerate() {
        w.serialize(TrajectoryRow { n: i + 1, x_m: q.x, y_m: q.y, z_m: q.z })?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;

    let mut w = writer(dir, "powers.csv")?;
    let p = &report.final_powers;
    for (i, (&pa, &pu)) in p.p_a.iter().zip(&p.p_u).enumerate() {
        w.serialize(PowerRow { n: i + 1, pa_w: pa, pu_w: pu })?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;

    let mut w = writer(dir, "trace.csv")?;
    for (i, (&r, &e)) in report.objective_trace.iter().zip(&report.relative_errors).enumerate() {
        w.serialize(TraceRow { iter: i, rs_bits: r, rel_err: e })?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;

    let mut w = writer(dir, "summary.csv")?;
    w.serialize(SummaryRow {
        rs_bits: report.final_rate(),
        iterations: report.iterations,
        stop_reason: report.stop_reason,
    })?;
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

fn load(config: &Path, overrides: Overrides) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ConfigFile::load(config)?.into_config();
    overrides.apply(&mut cfg);
    cfg.ensure_valid()?;
    Ok(cfg)
}

pub fn cmd_solve(config: &Path, out: &Path, overrides: Overrides) -> Result<i32, CliError> {
    let cfg = load(config, overrides)?;
    let report = bcd::run(&cfg)?;
    write_report(&report, out)?;
    println!(
        "rs = {:.9} bits/channel-use after {} sweeps ({})",
        report.final_rate(),
        report.iterations,
        report.stop_reason
    );
    if report.stop_reason == StopReason::Stalled && report.never_improved() {
        return Ok(EXIT_SOLVER);
    }
    Ok(EXIT_OK)
}

pub fn cmd_compare(config: &Path, out: &Path, overrides: Overrides) -> Result<i32, CliError> {
    let cfg = load(config, overrides)?;
    let opt = bcd::run(&cfg)?;
    let base = bcd::run_baseline_straight(&cfg)?;
    ensure_dir(out)?;
    let mut w = writer(out, "compare.csv")?;
    let row = CompareRow {
        rs_optimized: opt.final_rate(),
        rs_straight: base.final_rate(),
        gap: opt.final_rate() - base.final_rate(),
    };
    println!("optimized {:.9}  straight {:.9}  gap {:.3e}", row.rs_optimized, row.rs_straight, row.gap);
    w.serialize(row)?;
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Eve's average envelope power, linear.
    Ye,
    /// Meters.
    Altitude,
    /// Meters per second.
    Speed,
    /// Reference SNR, dB.
    SnrBeta0,
    /// Seconds; the slot count is kept and the slot length rescaled.
    FlightTime,
    /// Average source power, dBm.
    PaAvg,
}

impl SweepParameter {
    pub fn apply(self, cfg: &ScenarioConfig, v: f64) -> ScenarioConfig {
        let mut c = cfg.clone();
        match self {
            SweepParameter::Ye => c.ye = v,
            SweepParameter::Altitude => c = c.with_altitude(v),
            SweepParameter::Speed => c.speed = v,
            SweepParameter::SnrBeta0 => c.beta0 = db_to_linear(v),
            SweepParameter::FlightTime => c = c.with_flight_time(v),
            SweepParameter::PaAvg => c.p_a_avg = dbm_to_watts(v),
        }
        c
    }
}

/// Sweep file: the parameter, its values and a base scenario given either as
/// a path to a config file (relative to the sweep file) or inline.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base_config: Option<PathBuf>,
    pub base: Option<ConfigFile>,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base_config: ScenarioConfig,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: SweepFile = toml::from_str(&text).map_err(ScenarioError::Parse)?;
        let base = match (file.base_config, file.base) {
            (Some(_), Some(_)) => return Err(CliError::Input("give either base_config or [base], not both".into())),
            (Some(p), None) => {
                let p = if p.is_relative() { path.parent().unwrap_or(Path::new(".")).join(p) } else { p };
                ConfigFile::load(&p)?
            }
            (None, Some(b)) => b,
            (None, None) => ConfigFile::default(),
        };
        let spec = SweepSpec { parameter: file.parameter, values: file.values, base_config: base.into_config() };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Err(CliError::Input("sweep has no values".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Input(format!("sweep value {v} is not finite")));
        }
        self.base_config.ensure_valid()?;
        Ok(())
    }
}

fn sweep_row(spec: &SweepSpec, v: f64, overrides: Overrides) -> SweepRow {
    let mut cfg = spec.parameter.apply(&spec.base_config, v);
    overrides.apply(&mut cfg);
    let fail = |status: String| SweepRow { parameter_value: v, rs_optimized: None, rs_straight: None, status };
    if let Err(e) = cfg.ensure_valid() {
        return fail(format!("invalid: {e}"));
    }
    let opt = match bcd::run(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(format!("solver: {e}")),
    };
    let base = match bcd::run_baseline_straight(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(format!("baseline: {e}")),
    };
    SweepRow {
        parameter_value: v,
        rs_optimized: Some(opt.final_rate()),
        rs_straight: Some(base.final_rate()),
        status: opt.stop_reason.to_string(),
    }
}

/// Runs every sweep value on the rayon pool; rows keep input order.
pub fn run_sweep(spec: &SweepSpec, overrides: Overrides) -> Vec<SweepRow> {
    spec.values.par_iter().map(|&v| sweep_row(spec, v, overrides)).collect()
}

pub fn cmd_sweep(sweep: &Path, out: &Path, overrides: Overrides) -> Result<i32, CliError> {
    let spec = SweepSpec::load(sweep)?;
    let rows = run_sweep(&spec, overrides);
    ensure_dir(out)?;
    let mut w = writer(out, "sweep.csv")?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    for r in &rows {
        println!("{:>12}  {:?}  {:?}  {}", r.parameter_value, r.rs_optimized, r.rs_straight, r.status);
    }
    Ok(EXIT_OK)
}

/// Log-uniform sample of slot inputs `(h_b, p_a, y_e)`.
pub fn sample_slot_inputs<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    let mut lu = |lo: f64, hi: f64| 10f64.powf(rng.gen_range(lo..hi));
    (lu(-3.0, 3.0), lu(-3.0, 2.0), lu(-3.0, 2.0))
}

pub fn cmd_selftest(seed: u64, samples: usize) -> i32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_rate: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..samples {
        let (h, p, y) = sample_slot_inputs(&mut rng);
        let closed = secrecy::slot_rate_closed(h, p, y);
        let quad = secrecy::slot_rate_quadrature(h, p, y);
        match (closed, quad) {
            (Ok(c), Ok(q)) => worst_rate = worst_rate.max((c - q).abs() / c.abs().max(1.0)),
            _ => worst_rate = f64::INFINITY,
        }
        let quotient = oracle::source_power_difference(h, p, y, 1e-4 * p);
        match (power_alloc::pa_slot_derivative(p, h, y), quotient) {
            (Ok(d), Ok(q)) => {
                let scale = d.abs().max(q.abs());
                if scale > 0.0 {
                    worst_grad = worst_grad.max((d - q).abs() / scale);
                }
            }
            _ => worst_grad = f64::INFINITY,
        }
    }
    let mut worst_rec: f64 = 0.0;
    for k in 0..50 {
        let z = 10f64.powf(-3.0 + 5.0 * k as f64 / 49.0);
        let lhs = specfun::upper_gamma_m1(z).map(|r| r.value).unwrap_or(f64::NAN);
        let rhs = (-z).exp() / z - specfun::expint_e1(z).map(|r| r.value).unwrap_or(f64::NAN);
        worst_rec = worst_rec.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    let checks = [
        ("closed form vs quadrature", worst_rate, 1e-8),
        ("source-power slope vs finite differences", worst_grad, 1e-6),
        ("incomplete gamma recurrence", worst_rec, 1e-12),
    ];
    let mut ok = true;
    for (name, err, tol) in checks {
        let pass = err <= tol;
        ok &= pass;
        println!("{} {name}: worst {err:.3e} (tol {tol:.0e})", if pass { "PASS" } else { "FAIL" });
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_SOLVER
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Solve { config, out, overrides } => cmd_solve(&config, &out, overrides),
        Command::Sweep { sweep, out, overrides } => cmd_sweep(&sweep, &out, overrides),
        Command::Compare { config, out, overrides } => cmd_compare(&config, &out, overrides),
        Command::Selftest { seed, samples } => Ok(cmd_selftest(seed, samples)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parameters_use_documented_units() {
        let base = ScenarioConfig::default();
        assert_eq!(SweepParameter::Ye.apply(&base, 0.5).ye, 0.5);
        assert!((SweepParameter::SnrBeta0.apply(&base, 80.0).beta0 - 1e8).abs() < 1e-3);
        assert!((SweepParameter::PaAvg.apply(&base, 20.0).p_a_avg - 0.1).abs() < 1e-15);
        let c = SweepParameter::Altitude.apply(&base, 120.0);
        assert_eq!((c.altitude, c.q0.z, c.qf.z), (120.0, 120.0, 120.0));
        let c = SweepParameter::FlightTime.apply(&base, 300.0);
        assert!((c.flight_time() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn empty_sweep_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        fs::write(&p, "parameter = \"ye\"\nvalues = []\n").unwrap();
        let err = SweepSpec::load(&p).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_INPUT);
    }

    #[test]
    fn inline_base_table_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        fs::write(&p, "parameter = \"speed\"\nvalues = [2.0, 3.0]\n[base]\nnum_slots = 20\nslot_s = 10.0\n").unwrap();
        let s = SweepSpec::load(&p).unwrap();
        assert_eq!(s.base_config.num_slots, 20);
        assert_eq!(s.values, vec![2.0, 3.0]);
    }

    #[test]
    fn invalid_sweep_value_is_recorded() {
        let spec = SweepSpec {
            parameter: SweepParameter::Speed,
            values: vec![0.5],
            base_config: ScenarioConfig::default(),
        };
        let rows = run_sweep(&spec, Overrides::default());
        assert!(rows[0].status.starts_with("invalid"), "{}", rows[0].status);
        assert!(rows[0].rs_optimized.is_none());
    }
}
