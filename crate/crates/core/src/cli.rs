//! Command-line front end: TOML configuration in, CSV and report files out.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluxlib::{FluxCurve, Obstruction, SpatialCoeff};
use crate::fronttrack::{History, Profile, Scenario, Trace};
use crate::illposed::{self, Certificate, Staircase};
use crate::observe::{trace_l1, Side};
use crate::recon_flux::{self, AnalyticOracle, FrontTrackingOracle, NodePolicy, ReconstructionGrid};
use crate::recon_k;
use crate::recon_obstruction::{self as ro, ConstantObservables, JumpArrival, StationaryAmbient, World};

/// Time samples used for space-time L¹ integrals.
const TIME_SAMPLES: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub horizon: f64,
    pub delta: f64,
    pub flux: FluxSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<PiecewiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<PiecewiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_reconstruction: Option<FluxReconSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<ObstructionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illposed: Option<IllposedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<BatchSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxSpec {
    Quadratic {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    Polynomial { coeffs: Vec<f64>, lo: f64, hi: f64 },
    /// Monotone cubic through samples given inline or in a two-column CSV (`u,f`).
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    PiecewiseLinear { u: Vec<f64>, f: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// Piecewise-constant function: `values[i]` between `breakpoints[i-1]` and `breakpoints[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSpec {
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Snapshot times for `simulate`.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Trace positions for `simulate`.
    #[serde(default)]
    pub traces: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_tilde: Option<f64>,
    /// Interval `J` on which the coefficient is wanted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    FrontTracking,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxReconSpec {
    pub nu: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<f64>,
    #[serde(default = "one")]
    pub t_obs: f64,
    #[serde(default)]
    pub oracle: OracleKind,
    #[serde(default)]
    pub plateaus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionSpec {
    #[serde(default = "one")]
    pub k_o: f64,
    /// Uniform datum for the constant-data protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bar: Option<f64>,
    /// Known stationary states at `a` and `b` for the stationary protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_tilde: Option<f64>,
    /// Try the direct probe first when both edge states are below `u^m`.
    #[serde(default)]
    pub fast: bool,
    /// Refine interaction-affected locations by re-simulation.
    #[serde(default = "yes")]
    pub refine: bool,
    /// Measured waves; when present no simulation is run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<ObservedSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedSpec {
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<JumpArrival>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_shock: Option<JumpArrival>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_rarefaction: Option<JumpArrival>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Widen,
    Shift,
    Merge,
    Swap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IllposedSpec {
    pub family: Family,
    #[serde(default = "one")]
    pub k_o: f64,
    pub start: f64,
    /// `[length, value]` pairs, left to right.
    pub spans: Vec<[f64; 2]>,
    /// Family parameters: one member per entry.
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hat: Option<f64>,
    /// Plateau value and width of the datum fed into the empty window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Relative change of the first span value for the control comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Stationary,
    Constant,
    Staircase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub study: Study,
    pub count: usize,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Config::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon: must be positive, got {}", self.horizon)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta: must be positive, got {}", self.delta)));
        }
        for (name, p) in [("coefficient", &self.coefficient), ("initial", &self.initial)] {
            if let Some(p) = p {
                if p.values.len() != p.breakpoints.len() + 1 {
                    return Err(Error::Config(format!(
                        "{name}: needs one more value than breakpoints ({} values, {} breakpoints)",
                        p.values.len(),
                        p.breakpoints.len()
                    )));
                }
            }
        }
        if let Some(w) = self.window {
            if !(w.a < w.b) {
                return Err(Error::Config(format!("window: needs a < b, got a={}, b={}", w.a, w.b)));
            }
        }
        Ok(())
    }

    pub fn flux_curve(&self) -> Result<FluxCurve> {
        match &self.flux {
            FluxSpec::Quadratic { c, lo, hi } => FluxCurve::quadratic(*c, *lo, *hi),
            FluxSpec::Polynomial { coeffs, lo, hi } => FluxCurve::polynomial(coeffs.clone(), *lo, *hi),
            FluxSpec::PiecewiseLinear { u, f } => {
                if u.len() != f.len() {
                    return Err(Error::Config("flux: u and f must have equal length".into()));
                }
                FluxCurve::piecewise_linear(&u.iter().copied().zip(f.iter().copied()).collect::<Vec<_>>())
            }
            FluxSpec::Table { u, f, path } => match (u, f, path) {
                (Some(u), Some(f), None) => FluxCurve::from_table(u.clone(), f.clone()),
                (None, None, Some(p)) => {
                    let (u, f) = read_table(Path::new(p))?;
                    FluxCurve::from_table(u, f)
                }
                _ => Err(Error::Config("flux: a table needs either u and f, or path".into())),
            },
        }
    }

    fn coeff(&self) -> Result<SpatialCoeff> {
        let c = self.coefficient.as_ref().ok_or_else(|| Error::Config("coefficient: missing table".into()))?;
        SpatialCoeff::new(c.breakpoints.clone(), c.values.clone())
    }

    fn initial_profile(&self) -> Result<Profile> {
        let p = self.initial.as_ref().ok_or_else(|| Error::Config("initial: missing table".into()))?;
        Profile::new(p.breakpoints.clone(), p.values.clone(), 0.0)
    }

    fn window(&self) -> Result<(f64, f64)> {
        self.window.map(|w| (w.a, w.b)).ok_or_else(|| Error::Config("window: missing table".into()))
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let (mut u, mut f) = (Vec::new(), Vec::new());
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let get = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad number in row {:?}", path.display(), row)))
        };
        u.push(get(0)?);
        f.push(get(1)?);
    }
    Ok((u, f))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `key = value` lines; numbers at full precision.
#[derive(Default)]
struct Report(String);

impl Report {
    fn num(&mut self, key: &str, v: f64) {
        let _ = writeln!(self.0, "{key} = {}", num(v));
    }

    fn opt(&mut self, key: &str, v: Option<f64>) {
        match v {
            Some(v) => self.num(key, v),
            None => self.text(key, "none"),
        }
    }

    fn text(&mut self, key: &str, v: &str) {
        let _ = writeln!(self.0, "{key} = \"{v}\"");
    }

    fn flag(&mut self, key: &str, v: bool) {
        let _ = writeln!(self.0, "{key} = {v}");
    }

    fn section(&mut self, name: &str) {
        let _ = writeln!(self.0, "\n[{name}]");
    }

    fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.0)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObstructionMode {
    Stationary,
    Constant,
}

#[derive(Debug, Parser)]
#[command(name = "fluxrecon", version, about = "Front tracking and inverse reconstruction for u_t + (k(x) f(u))_x = 0")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// TOML configuration.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Front-tracking solution: snapshots and traces.
    Simulate(Common),
    /// Flux nodes from Riemann observations.
    ReconstructF(Common),
    /// Coefficient on an interval from two snapshots of one probe.
    ReconstructK(Common),
    /// Single obstruction from observations outside the window.
    ReconstructObstruction {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: ObstructionMode,
    },
    /// Indistinguishable coefficient families with transit-time certificates.
    Illposed(Common),
    /// Re-simulates a reconstruction and compares with the configured coefficient.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Reconstruction file written by a `reconstruct-*` command.
        #[arg(long)]
        reconstruction: PathBuf,
    },
    /// Seeded roundtrip study over random scenarios, in parallel.
    Batch(Common),
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: &Command) -> Result<()> {
    let common = match cmd {
        Command::Simulate(c) | Command::ReconstructF(c) | Command::ReconstructK(c) | Command::Illposed(c) | Command::Batch(c) => c,
        Command::ReconstructObstruction { common, .. } | Command::Verify { common, .. } => common,
    };
    let cfg = Config::load(&common.config)?;
    fs::create_dir_all(&common.out)?;
    let out = common.out.as_path();
    match cmd {
        Command::Simulate(_) => simulate(&cfg, out),
        Command::ReconstructF(_) => reconstruct_f(&cfg, out),
        Command::ReconstructK(_) => reconstruct_k(&cfg, out),
        Command::ReconstructObstruction { mode, .. } => reconstruct_obstruction(&cfg, *mode, out),
        Command::Illposed(_) => illposed_cmd(&cfg, out),
        Command::Verify { reconstruction, .. } => verify(&cfg, reconstruction, out),
        Command::Batch(_) => batch(&cfg, out),
    }
}

fn run_history(cfg: &Config, f: &FluxCurve, k: &SpatialCoeff, init: &Profile) -> Result<History> {
    Scenario::new(f.clone(), k.clone(), init.clone(), cfg.delta, cfg.horizon)?.run()
}

fn push_profile(t: &mut Table, time: f64, p: &Profile) {
    t.push(vec![num(time), "-inf".into(), num(p.values[0]), num(p.values[0])]);
    for (i, &x) in p.breakpoints.iter().enumerate() {
        t.push(vec![num(time), num(x), num(p.values[i]), num(p.values[i + 1])]);
    }
}

fn push_trace(t: &mut Table, tr: &Trace) {
    for i in 0..tr.times.len() {
        t.push(vec![num(tr.x), num(tr.times[i]), num(tr.left[i]), num(tr.right[i])]);
    }
}

pub fn simulate(cfg: &Config, out: &Path) -> Result<()> {
    let f = cfg.flux_curve()?;
    let k = cfg.coefficient.as_ref().map_or(Ok(SpatialCoeff::constant(1.0)), |_| cfg.coeff())?;
    let h = run_history(cfg, &f, &k, &cfg.initial_profile()?)?;
    let mut times = cfg.output.times.clone();
    if times.is_empty() {
        times.push(cfg.horizon);
    }
    let mut snaps = Table::new(&["time", "x", "u_left", "u_right"]);
    for &t in &times {
        if !(0.0..=cfg.horizon).contains(&t) {
            return Err(Error::Config(format!("output.times: {t} lies outside [0, {}]", cfg.horizon)));
        }
        push_profile(&mut snaps, t, &h.snapshot(t));
    }
    snaps.write(&out.join("snapshots.csv"))?;
    let mut traces = Table::new(&["x", "t", "u_left", "u_right"]);
    for &x in &cfg.output.traces {
        push_trace(&mut traces, &h.trace(x));
    }
    traces.write(&out.join("traces.csv"))?;
    let mut r = Report::default();
    r.num("horizon", cfg.horizon);
    r.num("delta", cfg.delta);
    r.num("reached", h.t_reached);
    r.opt("first_interaction", h.first_event);
    let _ = writeln!(r.0, "events = {}", h.events);
    r.save(&out.join("report.txt"))
}

pub fn reconstruct_f(cfg: &Config, out: &Path) -> Result<()> {
    let f = cfg.flux_curve()?;
    let spec = cfg.flux_reconstruction.as_ref().ok_or_else(|| Error::Config("flux_reconstruction: missing table".into()))?;
    let u_lo = spec.u_lo.unwrap_or(f.lo());
    let u_hi = spec.u_hi.unwrap_or(f.hi());
    let anchor = spec.anchor.unwrap_or(f.eval(u_lo));
    let grid = ReconstructionGrid::new(u_lo, u_hi, spec.nu, anchor, spec.t_obs)?;
    let policy = if spec.plateaus { NodePolicy::WithPlateaus } else { NodePolicy::Grid };
    let rec = match spec.oracle {
        OracleKind::FrontTracking => {
            recon_flux::reconstruct(&grid, &FrontTrackingOracle { flux: f.clone(), delta: cfg.delta }, policy)?
        }
        OracleKind::Analytic => recon_flux::reconstruct(&grid, &AnalyticOracle { flux: f.clone() }, policy)?,
    };
    let mut t = Table::new(&["u", "f_reconstructed", "f_true"]);
    let mut worst: f64 = 0.0;
    for &(u, v) in &rec.nodes {
        worst = worst.max((v - f.eval(u)).abs());
        t.push(vec![num(u), num(v), num(f.eval(u))]);
    }
    t.write(&out.join("flux_nodes.csv"))?;
    let mut r = Report::default();
    let _ = writeln!(r.0, "nu = {}", spec.nu);
    r.num("grid_step", grid.delta());
    r.num("max_node_error", worst);
    r.num("derivative_bound", rec.derivative_bound(f.lip_derivative()));
    let _ = writeln!(r.0, "shock_intervals = {}", rec.shock_intervals.iter().filter(|&&s| s).count());
    let _ = writeln!(r.0, "gaps = {:?}", rec.gaps);
    r.save(&out.join("report.txt"))
}

/// File written by the reconstruction commands and read by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionFile {
    pub coefficient: PiecewiseSpec,
    pub initial: PiecewiseSpec,
    /// Compare on `[lo, hi] × [0, T]` (`inside`) or on the traces at `lo` and `hi` (`outside`).
    pub region: [f64; 2],
    pub outside: bool,
}

fn spec_of_coeff(k: &SpatialCoeff) -> PiecewiseSpec {
    PiecewiseSpec { breakpoints: k.breakpoints().to_vec(), values: k.values().to_vec() }
}

fn spec_of_profile(p: &Profile) -> PiecewiseSpec {
    PiecewiseSpec { breakpoints: p.breakpoints.clone(), values: p.values.clone() }
}

fn write_reconstruction(out: &Path, file: &ReconstructionFile) -> Result<()> {
    let text = toml::to_string(file).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join("reconstruction.toml"), text)?;
    Ok(())
}

pub fn reconstruct_k(cfg: &Config, out: &Path) -> Result<()> {
    let f = cfg.flux_curve()?;
    let hidden = cfg.coeff()?;
    let probe = cfg.probe.clone().unwrap_or_default();
    let [j_lo, j_hi] = probe.j.ok_or_else(|| Error::Config("probe.j: the interval J is required".into()))?;
    let (rec, _) = recon_k::reconstruct_k(&f, &hidden, j_lo, j_hi, cfg.horizon, probe.u_tilde, cfg.delta)?;
    let mut t = Table::new(&["x_from", "k"]);
    t.push(vec![num(j_lo), num(rec.values[0])]);
    for (i, &x) in rec.jumps.iter().enumerate() {
        t.push(vec![num(x), num(rec.values[i + 1])]);
    }
    t.write(&out.join("coefficient.csv"))?;
    let mut r = Report::default();
    r.num("tau", rec.tau);
    r.num("u_tilde", rec.design.u_tilde);
    r.num("probe_lo", rec.design.i_lo);
    r.num("probe_hi", rec.design.i_hi);
    let _ = writeln!(r.0, "jumps = {}", rec.jumps.len());
    r.num("max_residual", rec.residuals.iter().fold(0.0, |m, v| m.max(v.abs())));
    r.save(&out.join("report.txt"))?;
    write_reconstruction(
        out,
        &ReconstructionFile {
            coefficient: spec_of_coeff(&rec.on_probe),
            initial: spec_of_profile(&rec.design.initial_data(&f)?),
            region: [j_lo, j_hi],
            outside: false,
        },
    )
}

fn obstruction_spec(cfg: &Config) -> Result<&ObstructionSpec> {
    cfg.obstruction.as_ref().ok_or_else(|| Error::Config("obstruction: missing table".into()))
}

pub fn reconstruct_obstruction(cfg: &Config, mode: ObstructionMode, out: &Path) -> Result<()> {
    let f = cfg.flux_curve()?;
    let spec = obstruction_spec(cfg)?;
    let (a, b) = cfg.window()?;
    let mut r = Report::default();
    let (k1, xi1, xi2, initial) = match mode {
        ObstructionMode::Constant => {
            let u_bar = spec.u_bar.ok_or_else(|| Error::Config("obstruction.u_bar: required in constant mode".into()))?;
            let (obs, rep) = match spec.observed {
                Some(o) => {
                    let obs = ConstantObservables {
                        u_bar,
                        k_o: spec.k_o,
                        a,
                        b,
                        horizon: o.horizon,
                        reflection: o.reflection,
                        exit_shock: o.exit_shock,
                        exit_rarefaction: o.exit_rarefaction,
                    };
                    let rep = ro::reconstruct_constant_data(&obs, &f, None)?;
                    (obs, rep)
                }
                None => {
                    let world = World { flux: f.clone(), coeff: cfg.coeff()?, delta: cfg.delta, horizon: cfg.horizon, a, b };
                    let (rep, obs) = ro::run_constant(&world, u_bar, spec.k_o, spec.refine)?;
                    (obs, rep)
                }
            };
            r.text("case", &format!("{:?}", rep.case));
            r.num("k1", rep.k1);
            r.num("xi1", rep.xi1);
            r.num("xi2", rep.xi2);
            r.flag("unique", rep.unique);
            r.text("xi1_source", &format!("{:?}", rep.xi1_source));
            r.text("xi2_source", &format!("{:?}", rep.xi2_source));
            r.opt("xi2_direct", rep.xi2_direct);
            match rep.verified {
                Some(v) => r.flag("verified", v),
                None => r.text("verified", "not applicable"),
            }
            r.section("observables");
            r.num("u_bar", u_bar);
            for (name, w) in [("reflection", obs.reflection), ("exit_shock", obs.exit_shock), ("exit_rarefaction", obs.exit_rarefaction)] {
                if let Some(w) = w {
                    r.num(&format!("{name}.time"), w.time);
                    r.num(&format!("{name}.left"), w.left);
                    r.num(&format!("{name}.right"), w.right);
                    r.num(&format!("{name}.speed"), w.speed);
                }
            }
            (rep.k1, rep.xi1, rep.xi2, Profile::constant(u_bar))
        }
        ObstructionMode::Stationary => {
            let u_a = spec.u_a.unwrap_or(f.lo());
            let u_b = spec.u_b.unwrap_or(u_a);
            let amb = StationaryAmbient::new(&f, spec.k_o, u_a, u_b, a, b)?;
            let tail = match &cfg.initial {
                Some(_) => cfg.initial_profile()?,
                None if u_a == f.lo() && u_b == f.lo() => Profile::constant(f.lo()),
                None => {
                    return Err(Error::Config(
                        "initial: the hidden stationary state is required unless u_a = u_b = u1".into(),
                    ))
                }
            };
            let world = World { flux: f.clone(), coeff: cfg.coeff()?, delta: cfg.delta, horizon: cfg.horizon, a, b };
            let x_tilde = spec.x_tilde.unwrap_or(0.5 * (b - a));
            let run = if spec.fast { ro::run_fast(&world, &amb, &tail, x_tilde)? } else { ro::run_stationary(&world, &amb, &tail, x_tilde)? };
            let rep = run.report;
            r.num("k1", rep.k1);
            r.num("xi1", rep.xi1);
            r.num("xi2", rep.xi2);
            r.opt("restarted_at", run.restarted_at);
            r.section("observables");
            for (key, v) in [
                ("tau_tilde", rep.tau_tilde),
                ("tau_o", rep.tau_o),
                ("tau_a", rep.tau_a),
                ("tau_b", rep.tau_b),
                ("tau_bar", rep.tau_bar),
                ("v", rep.v),
                ("w", rep.w),
                ("w_prime", rep.w_prime),
                ("edge_a", rep.edge_a),
                ("edge_b", rep.edge_b),
            ] {
                r.num(key, v);
            }
            let _ = writeln!(r.0, "steps = {}", rep.steps);
            let probe = ro::probe_stationary(&f, &amb, x_tilde)?;
            (rep.k1, rep.xi1, rep.xi2, probe.initial_data(a, &tail)?)
        }
    };
    r.save(&out.join("report.txt"))?;
    let k = Obstruction::new(k1, xi1, xi2, spec.k_o, a, b)?.coefficient();
    write_reconstruction(
        out,
        &ReconstructionFile { coefficient: spec_of_coeff(&k), initial: spec_of_profile(&initial), region: [a, b], outside: true },
    )
}

pub fn illposed_cmd(cfg: &Config, out: &Path) -> Result<()> {
    let f = cfg.flux_curve()?;
    let spec = cfg.illposed.as_ref().ok_or_else(|| Error::Config("illposed: missing table".into()))?;
    let (a, b) = cfg.window()?;
    let base = Staircase::new(spec.k_o, spec.start, spec.spans.iter().map(|s| (s[0], s[1])).collect())?;
    let mut members: Vec<(String, Staircase)> = Vec::new();
    match spec.family {
        Family::Widen => {
            for &e in &spec.params {
                members.push((format!("widen_{e}"), illposed::widen_family(&base, e, a, b)?));
            }
        }
        Family::Shift => {
            for &p in &spec.params {
                members.push((format!("shift_{p}"), illposed::shift_family(&base, p)?));
            }
        }
        Family::Merge => {
            for &e in &spec.params {
                let m = illposed::merge_family(&base, e, spec.k_hat)?;
                members.push((format!("merge_{e}"), m.shifted));
            }
            let m = illposed::merge_family(&base, 0.0, None)?;
            members.push(("merged".into(), m.merged));
            members.push(("collapsed".into(), m.collapsed));
        }
        Family::Swap => members.push(("swap".into(), illposed::swap_family(&base)?)),
    }
    let mut coeffs = Table::new(&["member", "x_from", "k"]);
    let mut push_coeff = |name: &str, st: &Staircase| -> Result<()> {
        let k = st.coefficient()?;
        coeffs.push(vec![name.to_string(), "-inf".into(), num(k.values()[0])]);
        for (i, &x) in k.breakpoints().iter().enumerate() {
            coeffs.push(vec![name.to_string(), num(x), num(k.values()[i + 1])]);
        }
        Ok(())
    };
    push_coeff("base", &base)?;
    for (n, m) in &members {
        push_coeff(n, m)?;
    }
    coeffs.write(&out.join("family.csv"))?;
    let omega = spec.omega.unwrap_or(0.25 * (f.lo() + f.hi()));
    let width = spec.width.unwrap_or(b - a);
    let datum = illposed::empty_road_datum(&f, a, omega, width)?;
    let base_k = base.coefficient()?;
    let mut certs = Table::new(&["member", "base_transit", "member_transit", "gap", "mean_deviation", "sup_deviation"]);
    let mut rows: Vec<(String, Certificate, illposed::Deviation)> = members
        .par_iter()
        .map(|(n, m)| -> Result<_> {
            let d = illposed::indistinguishable(&f, &base_k, &m.coefficient()?, (a, b), &datum, cfg.horizon, cfg.delta)?;
            Ok((n.clone(), Certificate::new(n, &base, m), d))
        })
        .collect::<Result<_>>()?;
    if let Some(c) = spec.control {
        let mut ctl = base.clone();
        ctl.spans[0].1 *= 1.0 + c;
        let d = illposed::indistinguishable(&f, &base_k, &ctl.coefficient()?, (a, b), &datum, cfg.horizon, cfg.delta)?;
        rows.push(("control".into(), Certificate::new("control", &base, &ctl), d));
    }
    for (n, c, d) in &rows {
        certs.push(vec![n.clone(), num(c.base_sum), num(c.member_sum), num(c.gap()), num(d.mean()), num(d.sup())]);
    }
    certs.write(&out.join("certificates.csv"))
}

/// Space-time L¹ distance on `[lo, hi] × [0, T]` by midpoint sampling in time.
pub fn spacetime_l1(p: &History, q: &History, lo: f64, hi: f64, horizon: f64) -> f64 {
    let dt = horizon / TIME_SAMPLES as f64;
    (0..TIME_SAMPLES)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            p.snapshot(t).l1_distance(&q.snapshot(t), lo, hi) * dt
        })
        .sum()
}

/// Trace L¹ distance at `a` (left limit) and `b` (right limit), per unit time.
pub fn outside_trace_l1(p: &History, q: &History, a: f64, b: f64, horizon: f64) -> f64 {
    let da = trace_l1(&p.trace(a), &q.trace(a), 0.0, horizon, Side::Left);
    let db = trace_l1(&p.trace(b), &q.trace(b), 0.0, horizon, Side::Right);
    da.max(db) / horizon
}

pub fn verify(cfg: &Config, reconstruction: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(reconstruction)?;
    let file: ReconstructionFile =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", reconstruction.display())))?;
    let f = cfg.flux_curve()?;
    let hidden = cfg.coeff()?;
    let recovered = SpatialCoeff::new(file.coefficient.breakpoints.clone(), file.coefficient.values.clone())?;
    let init = Profile::new(file.initial.breakpoints.clone(), file.initial.values.clone(), 0.0)?;
    let (p, q) = rayon::join(|| run_history(cfg, &f, &hidden, &init), || run_history(cfg, &f, &recovered, &init));
    let (p, q) = (p?, q?);
    let [lo, hi] = file.region;
    let mut r = Report::default();
    if file.outside {
        r.num("trace_l1_per_time", outside_trace_l1(&p, &q, lo, hi, cfg.horizon));
    } else {
        r.num("spacetime_l1", spacetime_l1(&p, &q, lo, hi, cfg.horizon));
    }
    r.save(&out.join("verify.txt"))
}

/// One row of a batch study.
#[derive(Debug, Clone)]
struct BatchRow {
    index: usize,
    truth: Vec<f64>,
    found: Vec<f64>,
    status: String,
}

pub fn batch(cfg: &Config, out: &Path) -> Result<()> {
    let f = cfg.flux_curve()?;
    let spec = cfg.batch.as_ref().ok_or_else(|| Error::Config("batch: missing table".into()))?;
    let (a, b) = cfg.window.map(|w| (w.a, w.b)).unwrap_or((0.0, 1.0));
    let k_o = cfg.obstruction.as_ref().map_or(1.0, |o| o.k_o);
    // draw every scenario up front so results do not depend on scheduling
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<Vec<f64>> = (0..spec.count).map(|_| (0..8).map(|_| rng.gen::<f64>()).collect()).collect();
    let rows: Vec<BatchRow> = draws
        .par_iter()
        .enumerate()
        .map(|(index, d)| {
            let outcome = match spec.study {
                Study::Stationary | Study::Constant => {
                    let k1 = k_o * (0.2 + 0.7 * d[0]);
                    let xi1 = a + (b - a) * 0.8 * d[1];
                    let xi2 = xi1 + (b - xi1) * (0.1 + 0.9 * d[2]);
                    let truth = vec![k1, xi1, xi2];
                    let res = Obstruction::new(k1, xi1, xi2, k_o, a, b).and_then(|o| {
                        let world = World::from_obstruction(f.clone(), &o, cfg.delta, cfg.horizon);
                        if spec.study == Study::Stationary {
                            let amb = StationaryAmbient::new(&f, k_o, f.lo(), f.lo(), a, b)?;
                            let r = ro::run_stationary(&world, &amb, &Profile::constant(f.lo()), 0.5 * (b - a))?.report;
                            Ok(vec![r.k1, r.xi1, r.xi2])
                        } else {
                            let u_bar = f.lo() + (f.maximizer()? - f.lo()) * (0.05 + 0.9 * d[3]);
                            let (r, _) = ro::run_constant(&world, u_bar, k_o, true)?;
                            Ok(vec![r.k1, r.xi1, r.xi2])
                        }
                    });
                    (truth, res)
                }
                Study::Staircase => {
                    let n = 1 + (d[0] * 6.0) as usize;
                    let mut bps: Vec<f64> = (0..n).map(|i| a + (b - a) * (i as f64 + 0.2 + 0.6 * d[(i + 1) % 8]) / n as f64).collect();
                    bps.dedup();
                    let vals: Vec<f64> = (0..=bps.len()).map(|i| 0.3 + 1.5 * d[(i + 3) % 8]).collect();
                    let mut truth = bps.clone();
                    truth.extend(&vals);
                    let res = SpatialCoeff::new_merged(bps, vals).and_then(|k| {
                        let (rec, _) = recon_k::reconstruct_k(&f, &k, a, b, cfg.horizon, None, cfg.delta)?;
                        let mut v = rec.jumps.clone();
                        v.extend(&rec.values);
                        Ok(v)
                    });
                    (truth, res)
                }
            };
            match outcome {
                (truth, Ok(found)) => BatchRow { index, truth, found, status: "ok".into() },
                (truth, Err(e)) => BatchRow { index, truth, found: Vec::new(), status: format!("exit {}: {e}", e.exit_code()) },
            }
        })
        .collect();
    let mut t = Table::new(&["index", "truth", "found", "max_error", "status"]);
    for r in &rows {
        let err = if r.found.len() == r.truth.len() {
            num(r.truth.iter().zip(&r.found).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs())))
        } else {
            "nan".into()
        };
        let join = |v: &[f64]| v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ");
        t.push(vec![r.index.to_string(), join(&r.truth), join(&r.found), err, r.status.clone()]);
    }
    t.write(&out.join("batch.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ACCIDENT: &str = r#"
horizon = 1.0
delta = 0.001

[flux]
kind = "quadratic"

[window]
a = 0.0
b = 2.0

[obstruction]
u_bar = 0.3333333333333333
observed = { horizon = 1.0, reflection = { time = 0.5, left = 0.3333333333333333, right = 0.8333333333333334, speed = -0.16666666666666666 }, exit_shock = { time = 0.66, left = 0.16666666666666666, right = 0.3333333333333333, speed = 0.5 } }
"#;

    #[test]
    fn config_round_trip() {
        let c = Config::parse(ACCIDENT).unwrap();
        let again = Config::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_toml().unwrap(), c.to_toml().unwrap());
    }

    #[test]
    fn field_level_messages() {
        let e = Config::parse("horizon = 1.0\ndelta = 0.1\n[flux]\nkind = \"quadratic\"\n[window]\na = 1.0\nb = 0.0\n").unwrap_err();
        assert!(e.to_string().contains("window"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = Config::parse("horizon = 1.0\ndelta = 0.1\nbogus = 3\n[flux]\nkind = \"quadratic\"\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(1.0 / 3.0), "3.3333333333333331e-1");
    }

    #[test]
    fn accident_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::parse(ACCIDENT).unwrap();
        reconstruct_obstruction(&cfg, ObstructionMode::Constant, dir.path()).unwrap();
        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        let value = |key: &str| -> f64 {
            let line = report.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap();
            line.split(" = ").nth(1).unwrap().parse().unwrap()
        };
        assert!((value("k1") - 5.0 / 9.0).abs() < 1e-12);
        assert!((value("xi1") - 1.0 / 12.0).abs() < 1e-12);
        assert!((value("xi2") - 1.67).abs() < 1e-12);
        assert!(report.contains("verified = false"));
    }
}
