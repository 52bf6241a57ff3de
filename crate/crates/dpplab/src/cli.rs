//! Batch runner behind the `dpplab` binary.
//!
//! Parameters come from `--config FILE` (JSON) and from flags; flags win.
//! Every run writes `<out>_summary.json`, one `<out>_<table>.csv` per table and,
//! where meaningful, `<out>_plot.csv` in long format (series, x, y, yerr).
//! Exit codes: 0 all checks pass, 1 a check failed or the run aborted, 2 bad configuration.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use rand::Rng as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::dpp::{self, GramFamily};
use crate::dsp::{self, Functional, InitialConfig, Process};
use crate::gff::{self, StationarityOptions};
use crate::kernels::{self, Family, KernelSpec, Point, RootType, ScalingMode};
use crate::loggas::{self, GasConfig, GasModel};
use crate::rng;
use crate::sle::{self, DrivingPath, Region, SleGas};
use crate::specfun;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("output error: {0}")]
    Output(String),
}

fn cfg<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn run_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Run(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "dpplab", version, about = "Kernels, samplers and Monte Carlo checks for determinantal processes, log-gases and multiple SLE")]
pub struct Cli {
    /// JSON config: {"command", "seed", "threads", "out", "params": {...}}
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; required by the stochastic subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output path prefix (default: the subcommand name).
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Kernel values on a grid, Hermiticity, negative correlation and trace.
    KernelTable(KernelTableArgs),
    /// Sample a matrix ensemble and compare its one-point density with the kernel.
    DppSample(DppSampleArgs),
    /// Counting law on [r, inf) (or the disc of radius r) against its Bernoulli-sum law.
    DualityCheck(DualityArgs),
    /// One log-gas trajectory.
    GasSimulate(GasSimulateArgs),
    /// Monte Carlo moments of a log-gas against the exact values.
    GasMoments(GasMomentsArgs),
    /// Direct against determinantal-martingale-weighted expectations.
    DspCheck(DspCheckArgs),
    /// Circular relaxation distance against time.
    Relaxation(RelaxationArgs),
    /// Loewner trace for a deterministic or Brownian driving function.
    SleTrace(SleTraceArgs),
    /// Martingale observable and Green covariation under gas-driven multiple SLE.
    SleMartingale(SleMartingaleArgs),
    /// Mean and variance bookkeeping of the coupled Gaussian field pairing.
    GffStationarity(GffArgs),
    /// Deterministic identities: Christoffel-Darboux, Weyl, orthonormality, traces, scaling limits.
    IdentitySuite(IdentityArgs),
}

impl Command {
    fn tag(&self) -> &'static str {
        match self {
            Command::KernelTable(_) => "kernel-table",
            Command::DppSample(_) => "dpp-sample",
            Command::DualityCheck(_) => "duality-check",
            Command::GasSimulate(_) => "gas-simulate",
            Command::GasMoments(_) => "gas-moments",
            Command::DspCheck(_) => "dsp-check",
            Command::Relaxation(_) => "relaxation",
            Command::SleTrace(_) => "sle-trace",
            Command::SleMartingale(_) => "sle-martingale",
            Command::GffStationarity(_) => "gff-stationarity",
            Command::IdentitySuite(_) => "identity-suite",
        }
    }
}

// ---------------------------------------------------------------------------
// parameter blocks (every field optional so that file and flags can be overlaid)

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTableArgs {
    /// hermite | laguerre | root-a | root-b | root-c | root-d | sinc | airy | bessel
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "N", alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DppSampleArgs {
    /// gue | lue | cue | ginibre
    #[arg(long)]
    pub ensemble: Option<String>,
    #[arg(long = "N", alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// integer ν for lue
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityArgs {
    /// hermite | laguerre | ginibre
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "N", alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSimulateArgs {
    /// dyson | bru-wishart | circular
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// use the κ-parameterization (β = 8/κ, time scale κ) instead of β
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long = "N", alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    #[arg(long = "T", alias = "t")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasMomentsArgs {
    /// dyson | bru-wishart
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "N", alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    #[arg(long = "T", alias = "t")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DspCheckArgs {
    /// bm | besq | circle
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Option<Vec<f64>>,
    /// window [a, b] at time t
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// two-time functional at t1 < t2
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub t2: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationArgs {
    #[arg(long = "N", alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SleTraceArgs {
    /// zero | tilted | brownian
    #[arg(long)]
    pub driving: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long = "T", alias = "t")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SleMartingaleArgs {
    /// H | O
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    /// observation point as re,im
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Option<Vec<f64>>,
    /// second point for the covariation check, as re,im
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub w: Option<Vec<f64>>,
    #[arg(long = "T", alias = "t")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub records: Option<usize>,
    #[arg(long)]
    pub cov_steps: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GffArgs {
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    /// centre of the bump as re,im
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub grid_dt: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityArgs {
    /// largest N for the Christoffel-Darboux and orthonormality checks
    #[arg(long = "N", alias = "n")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<String>,
    params: Option<Value>,
}

/// Overlay the non-null flag values on the file's parameter block.
fn resolve<T: Serialize + DeserializeOwned>(file: Option<&Value>, flags: &T) -> Result<T, CliError> {
    let mut base = match file {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(CliError::Config("\"params\" must be an object".into())),
    };
    if let Value::Object(f) = serde_json::to_value(flags).map_err(cfg)? {
        for (k, v) in f {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(cfg)
}

// ---------------------------------------------------------------------------
// outputs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Passes when `|value - target| <= tolerance`.
    pub fn near(check: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value - target).abs() <= tolerance;
        CheckRecord { check: check.into(), value, target, tolerance, pass }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub yerr: f64,
}

impl PlotRow {
    fn new(series: impl Into<String>, x: f64, y: f64, yerr: f64) -> Self {
        PlotRow { series: series.into(), x, y, yerr }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckRecord>,
    pub tables: Vec<Table>,
    pub plot: Vec<PlotRow>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    command: &'a str,
    seed: Option<u64>,
    pass: bool,
    checks: &'a [CheckRecord],
}

/// Write plot rows as tidy CSV.
pub fn emit_plotdata<W: Write>(rows: &[PlotRow], out: W) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Output("no plot data".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

fn check_finite(report: &Report) -> Result<(), CliError> {
    for t in &report.tables {
        if t.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Run(format!("non-finite value in table {}", t.name)));
        }
    }
    if report.plot.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.yerr.is_finite())) {
        return Err(CliError::Run("non-finite value in plot data".into()));
    }
    Ok(())
}

fn write_outputs(prefix: &str, command: &str, seed: Option<u64>, report: &Report) -> Result<Vec<PathBuf>, CliError> {
    check_finite(report)?;
    let io = |e: std::io::Error| CliError::Output(e.to_string());
    if let Some(parent) = Path::new(prefix).parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io)?;
        }
    }
    let mut written = Vec::new();
    for t in &report.tables {
        let path = PathBuf::from(format!("{prefix}_{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Output(e.to_string()))?;
        w.write_record(&t.header).map_err(|e| CliError::Output(e.to_string()))?;
        for row in &t.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| CliError::Output(e.to_string()))?;
        }
        w.flush().map_err(io)?;
        written.push(path);
    }
    if !report.plot.is_empty() {
        let path = PathBuf::from(format!("{prefix}_plot.csv"));
        emit_plotdata(&report.plot, fs::File::create(&path).map_err(io)?)?;
        written.push(path);
    }
    let path = PathBuf::from(format!("{prefix}_summary.json"));
    let summary = Summary { command, seed, pass: report.pass(), checks: &report.checks };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Output(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(io)?;
    written.push(path);
    Ok(written)
}

// ---------------------------------------------------------------------------
// driver

struct Ctx {
    seed: Option<u64>,
    tag: &'static str,
}

impl Ctx {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .map(|s| rng::derive_seed(s, self.tag))
            .ok_or_else(|| CliError::Config(format!("{} is stochastic and needs --seed", self.tag)))
    }
}

/// Parse `args`, run the subcommand and write its artifacts.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok((report, files)) => {
            for c in &report.checks {
                println!("{:<32} {:>14.6e}  target {:>12.4e}  tol {:>10.2e}  {}", c.check, c.value, c.target, c.tolerance, if c.pass { "PASS" } else { "FAIL" });
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Run a parsed command line; returns the report and the files written.
pub fn execute(cli: Cli) -> Result<(Report, Vec<PathBuf>), CliError> {
    let tag = cli.command.tag();
    let file: Option<FileConfig> = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    if let Some(c) = file.as_ref().and_then(|f| f.command.as_deref()) {
        if c != tag {
            return Err(CliError::Config(format!("config is for `{c}` but `{tag}` was invoked")));
        }
    }
    let seed = cli.seed.or(file.as_ref().and_then(|f| f.seed));
    let threads = cli.threads.or(file.as_ref().and_then(|f| f.threads));
    let out = cli.out.clone().or(file.as_ref().and_then(|f| f.out.clone())).unwrap_or_else(|| tag.to_string());
    let params = file.as_ref().and_then(|f| f.params.as_ref());
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Ctx { seed, tag };
    let report = match &cli.command {
        Command::KernelTable(a) => kernel_table(resolve(params, a)?),
        Command::DppSample(a) => dpp_sample(resolve(params, a)?, &ctx),
        Command::DualityCheck(a) => duality_check(resolve(params, a)?, &ctx),
        Command::GasSimulate(a) => gas_simulate(resolve(params, a)?, &ctx),
        Command::GasMoments(a) => gas_moments(resolve(params, a)?, &ctx),
        Command::DspCheck(a) => dsp_check(resolve(params, a)?, &ctx),
        Command::Relaxation(a) => relaxation(resolve(params, a)?, &ctx),
        Command::SleTrace(a) => sle_trace(resolve(params, a)?, &ctx),
        Command::SleMartingale(a) => sle_martingale(resolve(params, a)?, &ctx),
        Command::GffStationarity(a) => gff_stationarity(resolve(params, a)?, &ctx),
        Command::IdentitySuite(a) => identity_suite(resolve(params, a)?, seed.unwrap_or(0)),
    }?;
    let files = write_outputs(&out, tag, seed, &report)?;
    Ok((report, files))
}

// ---------------------------------------------------------------------------
// subcommands

fn need(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg.into()))
    }
}

fn complex_arg(v: Option<Vec<f64>>, default: C64, name: &str) -> Result<C64, CliError> {
    match v {
        None => Ok(default),
        Some(v) if v.len() == 2 => Ok(C64::new(v[0], v[1])),
        Some(_) => Err(CliError::Config(format!("--{name} takes re,im"))),
    }
}

fn kernel_family(name: &str, n: usize, nu: f64) -> Result<(Family, f64, f64), CliError> {
    let nf = n as f64;
    let root = |ty| (Family::RootSystem { ty, n }, 0.0, if ty == RootType::A { 2.0 * PI } else { PI });
    Ok(match name {
        "hermite" => (Family::HermiteN { n }, -(2.0 * nf).sqrt() - 2.0, (2.0 * nf).sqrt() + 2.0),
        "laguerre" => (Family::LaguerreN { n, nu }, 0.0, 4.0 * nf + 2.0 * nu.abs() + 10.0),
        "root-a" => root(RootType::A),
        "root-b" => root(RootType::B),
        "root-c" => root(RootType::C),
        "root-d" => root(RootType::D),
        "sinc" => (Family::Sinc, -4.0, 4.0),
        "airy" => (Family::Airy, -6.0, 3.0),
        "bessel" => (Family::Bessel { nu }, 0.0, 10.0),
        other => return Err(CliError::Config(format!("unknown kernel family `{other}`"))),
    })
}

fn kernel_table(a: KernelTableArgs) -> Result<Report, CliError> {
    let name = a.family.unwrap_or_else(|| "hermite".into());
    let n = a.n.unwrap_or(8);
    let (family, lo0, hi0) = kernel_family(&name, n, a.nu.unwrap_or(0.0))?;
    let spec = KernelSpec::new(family.clone()).map_err(cfg)?;
    let (lo, hi) = (a.lo.unwrap_or(lo0), a.hi.unwrap_or(hi0));
    let m = a.points.unwrap_or(41);
    need(m >= 2 && m <= 2000 && hi > lo, "need 2 <= points <= 2000 and lo < hi")?;
    let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let eval = |x: f64, y: f64| kernels::eval_kernel(&spec, &Point::Real(x), &Point::Real(y)).map_err(run_err);

    let mut table = Table::new("kernel", &["x", "y", "k"]);
    let mut dens = Table::new("density", &["x", "rho", "rho_lebesgue"]);
    let mut plot = Vec::new();
    let mut herm: f64 = 0.0;
    let mut negcor: f64 = 0.0;
    let diag: Vec<f64> = grid.iter().map(|&x| eval(x, x).map(|v| v.re)).collect::<Result<_, _>>()?;
    for (i, &x) in grid.iter().enumerate() {
        dens.rows.push(vec![x, diag[i], kernels::lebesgue_density(&spec, &Point::Real(x)).map_err(run_err)?]);
        for (j, &y) in grid.iter().enumerate() {
            let kxy = eval(x, y)?;
            let kyx = eval(y, x)?;
            herm = herm.max((kxy - kyx.conj()).norm() / (1.0 + kxy.norm()));
            negcor = negcor.max((kxy.norm_sqr() - diag[i] * diag[j]) / (1.0 + diag[i] * diag[j]));
            table.rows.push(vec![x, y, kxy.re]);
            plot.push(PlotRow::new(format!("x={x:.6}"), y, kxy.re, 0.0));
        }
    }
    let mut checks = vec![CheckRecord::near("hermitian", herm, 0.0, 1e-12), {
        let v = negcor.max(0.0);
        CheckRecord::near("negative_correlation", v, 0.0, 1e-12)
    }];
    if matches!(family, Family::HermiteN { .. } | Family::LaguerreN { .. } | Family::RootSystem { .. }) {
        let tr = kernels::projection_trace(&spec).map_err(run_err)?;
        checks.push(CheckRecord::near("projection_trace", tr, n as f64, 1e-6));
    }
    Ok(Report { checks, tables: vec![table, dens], plot })
}

fn dpp_sample(a: DppSampleArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let ens = a.ensemble.unwrap_or_else(|| "gue".into());
    let n = a.n.unwrap_or(8);
    let nu = a.nu.unwrap_or(0);
    let reps = a.replicas.unwrap_or(10_000);
    let bins = a.bins.unwrap_or(40);
    need((1..=500).contains(&n), "N must lie in 1..=500")?;
    need(reps >= 1000, "need at least 1000 replicas")?;
    need(bins >= 1, "need at least one bin")?;
    let nf = n as f64;
    let (spec, lo, hi) = match ens.as_str() {
        "gue" => (Some(Family::HermiteN { n }), -(2.0 * nf).sqrt() - 2.0, (2.0 * nf).sqrt() + 2.0),
        "lue" => (Some(Family::LaguerreN { n, nu: nu as f64 }), 0.0, 4.0 * nf + 2.0 * nu as f64 + 10.0),
        "cue" => (Some(Family::RootSystem { ty: RootType::A, n }), 0.0, 2.0 * PI),
        "ginibre" => (None, 0.0, 0.0),
        other => return Err(CliError::Config(format!("unknown ensemble `{other}`"))),
    };
    let seed = ctx.seed()?;
    let mut samples_t = Table::new("samples", &["replica", "index", "re", "im"]);
    let mut checks = Vec::new();
    let mut plot = Vec::new();
    if let Some(f) = spec {
        let spec = KernelSpec::new(f).map_err(cfg)?;
        let samples: Vec<Vec<f64>> = rng::replicas(seed, reps, |r, _| match ens.as_str() {
            "gue" => dpp::gue_eigenvalues(n, r),
            "lue" => dpp::chgue_eigenvalues(n, nu, r),
            _ => dpp::cue_angles(n, r),
        })
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(run_err)?;
        for (i, s) in samples.iter().enumerate() {
            for (j, &x) in s.iter().enumerate() {
                samples_t.rows.push(vec![i as f64, j as f64, x, 0.0]);
            }
        }
        let grid = dpp::Bins::new(lo, hi, bins);
        let est = dpp::estimate_correlation(&samples, 1, &grid).map_err(run_err)?;
        let mut zmax: f64 = 0.0;
        for i in 0..bins {
            let (x0, x1) = grid.edges(i);
            let exact = dpp::bin_average(|x| kernels::lebesgue_density(&spec, &Point::Real(x)).unwrap_or(f64::NAN), x0, x1);
            let se = est.std_errors[i].max(1e-12);
            zmax = zmax.max((est.values[i] - exact).abs() / se);
            plot.push(PlotRow::new("empirical", grid.center(i), est.values[i], est.std_errors[i]));
            plot.push(PlotRow::new("kernel", grid.center(i), exact, 0.0));
        }
        checks.push(CheckRecord::near("rho1_max_z", zmax, 0.0, 4.5));
    } else {
        let zs: Vec<Vec<C64>> = rng::replicas(seed, reps, |r, _| dpp::ginibre_eigenvalues(n, r))
            .into_iter()
            .collect::<Result<_, _>>()
            .map_err(run_err)?;
        for (i, s) in zs.iter().enumerate() {
            for (j, z) in s.iter().enumerate() {
                samples_t.rows.push(vec![i as f64, j as f64, z.re, z.im]);
            }
        }
        let counts: Vec<f64> = zs.iter().map(|s| s.iter().filter(|z| z.norm() < 1.0).count() as f64).collect();
        let (m, se) = rng::mean_se(&counts);
        let exact: f64 = (0..n).map(|k| specfun::gamma_p(k as f64 + 1.0, 1.0)).sum();
        checks.push(CheckRecord::near("unit_disc_mean_count", m, exact, 3.0 * se));
        let rmax = nf.sqrt() + 1.0;
        let grid = dpp::Bins::new(0.0, rmax, bins);
        let radii: Vec<Vec<f64>> = zs.iter().map(|s| s.iter().map(|z| z.norm()).collect()).collect();
        let est = dpp::estimate_correlation(&radii, 1, &grid).map_err(run_err)?;
        for i in 0..bins {
            plot.push(PlotRow::new("radial_density", grid.center(i), est.values[i], est.std_errors[i]));
        }
    }
    Ok(Report { checks, tables: vec![samples_t], plot })
}

fn duality_check(a: DualityArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let family = a.family.unwrap_or_else(|| "hermite".into());
    let reps = a.replicas.unwrap_or(100_000);
    need(reps >= 1000, "need at least 1000 replicas")?;
    let seed = ctx.seed();
    let (law, empirical, n, tol, extra) = match family.as_str() {
        "hermite" | "laguerre" => {
            let n = a.n.unwrap_or(if family == "hermite" { 8 } else { 6 });
            let nu = a.nu.unwrap_or(1);
            let r = a.r.unwrap_or(if family == "hermite" { 0.0 } else { 2.0 });
            let gram_family = if family == "hermite" { GramFamily::Hermite } else { GramFamily::Laguerre(nu as f64) };
            let gram = dpp::gram_restriction(gram_family, n, r).map_err(cfg)?;
            let law = dpp::counting_law(&gram).map_err(run_err)?;
            let seed = seed?;
            let counts: Vec<usize> = rng::replicas(seed, reps, |rr, _| {
                let s = if family == "hermite" { dpp::gue_eigenvalues(n, rr) } else { dpp::chgue_eigenvalues(n, nu, rr) };
                s.map(|s| s.iter().filter(|&&x| x >= r).count())
            })
            .into_iter()
            .collect::<Result<_, _>>()
            .map_err(run_err)?;
            (law, dpp::empirical_law(&counts, n + 1), n, a.tolerance.unwrap_or(0.01), None)
        }
        "ginibre" => {
            let n = a.n.unwrap_or(64);
            let r = a.r.unwrap_or(2.0);
            let law = dpp::ginibre_radial_law(r, n).map_err(cfg)?;
            let seed = seed?;
            let counts: Vec<usize> = rng::replicas(seed, reps, |rr, _| dpp::ginibre_eigenvalues(n, rr).map(|z| z.iter().filter(|w| w.norm() < r).count()))
                .into_iter()
                .collect::<Result<_, _>>()
                .map_err(run_err)?;
            let mean = counts.iter().sum::<usize>() as f64 / reps as f64;
            let extra = CheckRecord::near("mean_count", mean, r * r, 0.02 * r * r);
            (law, dpp::empirical_law(&counts, n + 1), n, a.tolerance.unwrap_or(0.015), Some(extra))
        }
        other => return Err(CliError::Config(format!("unknown duality family `{other}`"))),
    };
    let tv = dpp::total_variation(&empirical, &law.pmf);
    let mut table = Table::new("law", &["k", "empirical", "bernoulli_sum"]);
    let mut plot = Vec::new();
    for k in 0..=n {
        let e = empirical.get(k).copied().unwrap_or(0.0);
        let t = law.pmf.get(k).copied().unwrap_or(0.0);
        table.rows.push(vec![k as f64, e, t]);
        plot.push(PlotRow::new("empirical", k as f64, e, (e * (1.0 - e) / reps as f64).sqrt()));
        plot.push(PlotRow::new("bernoulli_sum", k as f64, t, 0.0));
    }
    let mut checks = vec![CheckRecord::near("total_variation", tv, 0.0, tol)];
    checks.extend(extra);
    let mut params = Table::new("bernoulli", &["index", "parameter"]);
    params.rows = law.bernoulli_params.iter().enumerate().map(|(i, &p)| vec![i as f64, p]).collect();
    Ok(Report { checks, tables: vec![table, params], plot })
}

fn gas_model(name: &str, beta: Option<f64>, kappa: Option<f64>, nu: f64, radius: f64) -> Result<GasModel, CliError> {
    if beta.is_some() && kappa.is_some() {
        return Err(CliError::Config("give either beta or kappa, not both".into()));
    }
    Ok(match (name, kappa) {
        ("dyson", Some(k)) => GasModel::dyson_kappa(k),
        ("dyson", None) => GasModel::dyson(beta.unwrap_or(2.0)),
        ("bru-wishart", Some(k)) => GasModel::bru_wishart_kappa(k, nu),
        ("bru-wishart", None) => GasModel::bru_wishart(beta.unwrap_or(2.0), nu),
        ("circular", None) => GasModel::CircularDyson { radius, beta: beta.unwrap_or(2.0) },
        ("circular", Some(_)) => return Err(CliError::Config("the circular model takes beta, not kappa".into())),
        (other, _) => return Err(CliError::Config(format!("unknown gas model `{other}`"))),
    })
}

fn default_initial(model: &GasModel, n: usize) -> Vec<f64> {
    match *model {
        GasModel::Dyson { .. } => (0..n).map(|i| if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 }).collect(),
        GasModel::BruWishart { .. } => (0..n).map(|i| 0.5 * (i + 1) as f64).collect(),
        GasModel::CircularDyson { radius, .. } => (0..n).map(|i| 2.0 * PI * radius * i as f64 / n as f64).collect(),
    }
}

fn gas_simulate(a: GasSimulateArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let model = gas_model(&a.model.unwrap_or_else(|| "dyson".into()), a.beta, a.kappa, a.nu.unwrap_or(0.0), a.radius.unwrap_or(1.0))?;
    let initial = a.initial.unwrap_or_else(|| default_initial(&model, a.n.unwrap_or(4)));
    let config = GasConfig::new(model, initial).map_err(cfg)?;
    let t = a.t.unwrap_or(1.0);
    let dt = a.dt.unwrap_or(1e-2);
    need(t > 0.0 && dt > 0.0, "T and dt must be positive")?;
    let tr = loggas::simulate(&config, t, dt, ctx.seed()?).map_err(run_err)?;
    let n = config.n();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    let mut table = Table { name: "trajectory".into(), header, rows: Vec::new() };
    let mut plot = Vec::new();
    for (s, state) in tr.times.iter().zip(&tr.states) {
        let mut row = vec![*s];
        row.extend(state);
        table.rows.push(row);
        for (i, &x) in state.iter().enumerate() {
            plot.push(PlotRow::new(format!("x{}", i + 1), *s, x, 0.0));
        }
    }
    let ordered = tr.states.iter().skip(1).all(|s| s.windows(2).all(|w| w[1] > w[0]));
    let gap = if n > 1 { tr.min_gap } else { f64::INFINITY };
    let mut check = CheckRecord::near("min_gap_positive", if gap.is_finite() { gap } else { 0.0 }, 0.0, f64::INFINITY);
    check.pass = n == 1 || (ordered && gap > 0.0);
    let mut steps = Table::new("steps", &["steps", "min_dt", "reflections"]);
    steps.rows.push(vec![tr.steps as f64, if tr.min_dt.is_finite() { tr.min_dt } else { 0.0 }, tr.reflections as f64]);
    Ok(Report { checks: vec![check], tables: vec![table, steps], plot })
}

fn gas_moments(a: GasMomentsArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let name = a.model.unwrap_or_else(|| "dyson".into());
    need(name == "dyson" || name == "bru-wishart", "gas-moments supports dyson and bru-wishart")?;
    let nu = a.nu.unwrap_or(0.0);
    let model = gas_model(&name, a.beta, a.kappa, nu, 1.0)?;
    let initial = a.initial.unwrap_or_else(|| default_initial(&model, a.n.unwrap_or(3)));
    let config = GasConfig::new(model, initial.clone()).map_err(cfg)?;
    let t = a.t.unwrap_or(1.0);
    let dt = a.dt.unwrap_or(1e-2);
    let reps = a.replicas.unwrap_or(100_000);
    need(t > 0.0 && dt > 0.0 && reps >= 100, "need T, dt > 0 and at least 100 replicas")?;
    let sums: Vec<f64> = loggas::terminal_ensemble(&config, t, dt, reps, ctx.seed()?)
        .into_iter()
        .map(|s| s.map(|v| v.iter().sum()))
        .collect::<Result<_, _>>()
        .map_err(run_err)?;
    let nf = initial.len() as f64;
    let u: f64 = initial.iter().sum();
    let (m, se) = rng::mean_se(&sums);
    let mut table = Table::new("moments", &["quantity", "estimate", "std_error", "target"]);
    let mut checks = Vec::new();
    match model {
        GasModel::Dyson { tau, .. } => {
            let n = sums.len() as f64;
            let v = sums.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            let m4 = sums.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
            let vse = ((m4 - v * v) / n).sqrt();
            let want = nf * tau * t;
            checks.push(CheckRecord::near("mean_sum", m, u, 3.0 * se));
            checks.push(CheckRecord::near("var_sum", v, want, 3.0 * vse));
            table.rows.push(vec![0.0, m, se, u]);
            table.rows.push(vec![1.0, v, vse, want]);
        }
        GasModel::BruWishart { beta, nu, tau } => {
            let want = u + tau * beta * nf * (nu + nf) * t;
            checks.push(CheckRecord::near("mean_sum", m, want, 3.0 * se));
            table.rows.push(vec![0.0, m, se, want]);
        }
        GasModel::CircularDyson { .. } => unreachable!(),
    }
    Ok(Report { checks, tables: vec![table], plot: Vec::new() })
}

fn dsp_check(a: DspCheckArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let name = a.process.unwrap_or_else(|| "bm".into());
    let radius = a.radius.unwrap_or(1.0);
    let process = match name.as_str() {
        "bm" => Process::Bm,
        "besq" => Process::Besq(a.nu.unwrap_or(0.5)),
        "circle" => Process::Circle(radius),
        other => return Err(CliError::Config(format!("unknown process `{other}`"))),
    };
    let points = a.points.unwrap_or_else(|| match process {
        Process::Bm => vec![-0.5, 0.5],
        Process::Besq(_) => vec![0.5, 1.5],
        Process::Circle(_) => vec![0.5, 2.0],
    });
    let xi = InitialConfig::simple(process, points).map_err(cfg)?;
    let (a0, b0, center) = match process {
        Process::Bm => (-1.0, 1.2, 0.4),
        Process::Besq(_) => (0.0, 3.0, 1.0),
        Process::Circle(_) => (0.0, 3.0, 0.0),
    };
    let t = a.t.unwrap_or(0.5);
    let (t1, t2) = (a.t1.unwrap_or(0.3), a.t2.unwrap_or(0.8));
    need(t > 0.0 && t1 > 0.0 && t2 > t1, "need t > 0 and 0 < t1 < t2")?;
    let h = match process {
        Process::Circle(r) => dsp::TestFn::Cosine { freq: 1.0 / r },
        _ => dsp::TestFn::Bump { center, width: 1.0 },
    };
    let fs = [
        ("window", Functional::Window { a: a.a.unwrap_or(a0), b: a.b.unwrap_or(b0), t }),
        ("two_time", Functional::TwoTime { h, t1, t2 }),
    ];
    let reps = a.replicas.unwrap_or(40_000);
    let dt = a.dt.unwrap_or(1e-2);
    need(reps >= 2 && dt > 0.0, "need replicas >= 2 and dt > 0")?;
    let seed = ctx.seed()?;
    let mut table = Table::new("estimates", &["functional", "direct", "direct_se", "weighted", "weighted_se", "z"]);
    let mut checks = Vec::new();
    let mut plot = Vec::new();
    for (k, (label, f)) in fs.iter().enumerate() {
        let e = dsp::dmr_expectation(&xi, f, reps, dt, seed.wrapping_add(k as u64)).map_err(run_err)?;
        let z = e.z_score();
        table.rows.push(vec![k as f64, e.direct, e.direct_se, e.weighted, e.weighted_se, z]);
        plot.push(PlotRow::new("direct", k as f64, e.direct, e.direct_se));
        plot.push(PlotRow::new("weighted", k as f64, e.weighted, e.weighted_se));
        checks.push(CheckRecord::near(format!("{label}_z"), z, 0.0, 3.0));
    }
    Ok(Report { checks, tables: vec![table], plot })
}

fn relaxation(a: RelaxationArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let n = a.n.unwrap_or(4);
    let radius = a.radius.unwrap_or(1.0);
    let times = a.times.unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0].into_iter().map(|t| t * radius * radius).collect());
    let reps = a.replicas.unwrap_or(20_000);
    let bins = a.bins.unwrap_or(16);
    let dt = a.dt.unwrap_or(1e-2);
    let tol = a.tolerance.unwrap_or(0.05);
    need(n >= 2 && radius > 0.0 && bins >= 1 && dt > 0.0, "need N >= 2, radius > 0, bins >= 1, dt > 0")?;
    need(!times.is_empty() && times.iter().all(|&t| t > 0.0), "times must be positive")?;
    need(reps >= 1000, "need at least 1000 replicas")?;
    let seed = ctx.seed()?;
    let mut table = Table::new("relaxation", &["t", "distance", "max_std_error"]);
    let mut plot = Vec::new();
    let mut last = None;
    for &t in &times {
        let rep = dsp::relaxation_distance_binned(n, radius, t, reps, bins, dt, seed).map_err(run_err)?;
        table.rows.push(vec![t, rep.distance, rep.max_std_error]);
        plot.push(PlotRow::new("distance", t, rep.distance, rep.max_std_error));
        last = Some((t, rep.distance));
    }
    let (t_last, d_last) = last.expect("nonempty times");
    Ok(Report { checks: vec![CheckRecord::near(format!("distance_at_t={t_last}"), d_last, 0.0, tol)], tables: vec![table], plot })
}

fn sle_trace(a: SleTraceArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let kind = a.driving.unwrap_or_else(|| "zero".into());
    let t = a.t.unwrap_or(1.0);
    let dt = a.dt.unwrap_or(5e-4);
    need(t > 0.0 && dt > 0.0 && dt < t, "need 0 < dt < T")?;
    let steps = (t / dt).ceil() as usize;
    let alpha = a.alpha.unwrap_or(1.0 / 3.0);
    let path = match kind.as_str() {
        "zero" => DrivingPath::from_fn(t, 1, |_| vec![0.0]).map_err(cfg)?,
        "tilted" => {
            need(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)")?;
            sle::tilted_driving(alpha, t, steps.max(1000)).map_err(cfg)?
        }
        "brownian" => {
            let kappa = a.kappa.unwrap_or(2.0);
            need(kappa > 0.0, "kappa must be positive")?;
            let mut r = rng::stream(ctx.seed()?, 0);
            let h = t / steps as f64;
            let mut x = 0.0;
            let mut vals = vec![vec![0.0]];
            for _ in 0..steps {
                x += (kappa * h).sqrt() * rng::normal(&mut r);
                vals.push(vec![x]);
            }
            DrivingPath::new((0..=steps).map(|k| k as f64 * h).collect(), vals).map_err(cfg)?
        }
        other => return Err(CliError::Config(format!("unknown driving `{other}`"))),
    };
    let tr = sle::trace_slit(&path, t, dt).map_err(run_err)?;
    let mut table = Table::new("trace", &["t", "re", "im"]);
    let mut plot = Vec::new();
    for (s, tips) in tr.times.iter().zip(&tr.tips) {
        table.rows.push(vec![*s, tips[0].re, tips[0].im]);
        plot.push(PlotRow::new("trace", tips[0].re, tips[0].im, 0.0));
    }
    let tip = tr.tips.last().ok_or_else(|| CliError::Run("empty trace".into()))?[0];
    let st = sle::forward_flow(&path, &[C64::new(0.1, 1.0)], t).map_err(run_err)?;
    let mut checks = vec![CheckRecord::near("hcap", sle::hcap_estimate(&st).map_err(run_err)?, 2.0 * t, 1e-4)];
    match kind.as_str() {
        "zero" => checks.push(CheckRecord::near("tip_distance", (tip - C64::new(0.0, 2.0 * t.sqrt())).norm(), 0.0, 1e-3 * 2.0 * t.sqrt())),
        "tilted" => checks.push(CheckRecord::near("tip_angle", tip.arg(), alpha * PI, 0.01 * alpha * PI)),
        _ => {}
    }
    Ok(Report { checks, tables: vec![table], plot })
}

fn sle_gas(region: Option<String>, kappa: Option<f64>, nu: Option<f64>, initial: Option<Vec<f64>>) -> Result<SleGas, CliError> {
    let region = match region.as_deref().unwrap_or("H") {
        "H" | "h" => Region::H,
        "O" | "o" => Region::O,
        other => return Err(CliError::Config(format!("unknown region `{other}`"))),
    };
    let initial = initial.unwrap_or_else(|| if region == Region::H { vec![-1.0, 1.0] } else { vec![1.0] });
    SleGas::new(region, kappa.unwrap_or(2.0), nu.unwrap_or(if region == Region::H { 0.0 } else { 0.5 }), initial).map_err(cfg)
}

fn sle_martingale(a: SleMartingaleArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let gas = sle_gas(a.region, a.kappa, a.nu, a.initial)?;
    let (dz, dw) = match gas.region {
        Region::H => (C64::new(0.4, 1.5), C64::new(0.7, 1.1)),
        Region::O => (C64::new(1.2, 1.6), C64::new(0.6, 1.4)),
    };
    let z = complex_arg(a.z, dz, "z")?;
    let w = complex_arg(a.w, dw, "w")?;
    need(gas.region.contains(z) && gas.region.contains(w) && z != w, "z and w must be distinct points of the domain")?;
    let t = a.t.unwrap_or(0.5);
    let steps = a.steps.unwrap_or(100);
    let records = a.records.unwrap_or(4);
    let cov_steps = a.cov_steps.unwrap_or(400);
    let reps = a.replicas.unwrap_or(10_000);
    need(t > 0.0 && records >= 1 && steps % records == 0, "need T > 0 and records dividing steps")?;
    need(reps >= 2 && cov_steps >= 1, "need replicas >= 2 and cov-steps >= 1")?;
    let seed = ctx.seed()?;
    let rep = sle::martingale_check(&gas, z, t, steps, steps / records, reps, seed).map_err(run_err)?;
    let cov = sle::covariation_check(&gas, z, w, t, cov_steps, reps, seed ^ 1).map_err(run_err)?;
    let mut table = Table::new("martingale", &["t", "mean_re", "mean_im", "se_re", "se_im"]);
    let mut plot = Vec::new();
    for ((s, m), se) in rep.times.iter().zip(&rep.mean).zip(&rep.std_error) {
        table.rows.push(vec![*s, m.re, m.im, se.re, se.im]);
        plot.push(PlotRow::new("re_m", *s, m.re, se.re));
        plot.push(PlotRow::new("im_m", *s, m.im, se.im));
    }
    let mut ct = Table::new("covariation", &["realized", "realized_se", "predicted", "predicted_se", "relative_error"]);
    ct.rows.push(vec![cov.realized, cov.realized_se, cov.predicted, cov.predicted_se, cov.relative_error]);
    let checks = vec![
        CheckRecord::near("martingale_max_z", rep.max_z, 0.0, 3.0),
        CheckRecord::near("covariation_relative_error", cov.relative_error, 0.0, 0.05),
    ];
    Ok(Report { checks, tables: vec![table, ct], plot })
}

fn gff_stationarity(a: GffArgs, ctx: &Ctx) -> Result<Report, CliError> {
    let gas = sle_gas(a.region, a.kappa, a.nu, a.initial)?;
    let dc = if gas.region == Region::H { C64::new(0.3, 1.5) } else { C64::new(1.3, 1.6) };
    let center = complex_arg(a.center, dc, "center")?;
    let f = gff::TestFn::new(gas.region, center, a.radius.unwrap_or(0.3)).map_err(cfg)?;
    let times = a.times.unwrap_or_else(|| vec![0.1, 0.25]);
    let reps = a.replicas.unwrap_or(10_000);
    let mut opts = StationarityOptions::default();
    if let Some(g) = a.grid_dt {
        opts.grid_dt = g;
    }
    if let Some(k) = a.nodes {
        opts.n_r = k;
        opts.n_theta = k;
    }
    need(opts.grid_dt > 0.0 && opts.n_r >= 4, "need grid-dt > 0 and nodes >= 4")?;
    let seed = ctx.seed()?;
    let rep = gff::stationarity_check(&gas, &f, &times, reps, seed, opts).map_err(|e| match e {
        gff::GffError::Parameter(_) | gff::GffError::TestFn(_) | gff::GffError::Domain(..) => cfg(e),
        other => run_err(other),
    })?;
    let mut table = Table::new("stationarity", &["t", "mean", "mean_se", "initial", "variance", "energy0", "energy_t", "variance_rel"]);
    let mut checks = Vec::new();
    let mut plot = Vec::new();
    for r in &rep.rows {
        table.rows.push(vec![r.t, r.mean, r.mean_se, r.initial, r.variance, r.energy0, r.energy_t, r.variance_rel]);
        plot.push(PlotRow::new("variance_plus_energy", r.t, r.variance + r.energy_t, 0.0));
        plot.push(PlotRow::new("energy0", r.t, r.energy0, 0.0));
        plot.push(PlotRow::new("mean", r.t, r.mean, r.mean_se));
        checks.push(CheckRecord::near(format!("mean_z_t={}", r.t), r.mean_z, 0.0, 3.0));
        checks.push(CheckRecord::near(format!("variance_rel_t={}", r.t), r.variance_rel, 0.0, 0.05));
        let mut mono = CheckRecord::near(format!("energy_monotone_t={}", r.t), if r.monotone { 1.0 } else { 0.0 }, 1.0, 0.0);
        mono.pass = r.monotone;
        checks.push(mono);
    }
    let mut ex = Table::new("replicas", &["kept", "excluded"]);
    ex.rows.push(vec![rep.replicas as f64, rep.excluded as f64]);
    Ok(Report { checks, tables: vec![table, ex], plot })
}

fn identity_suite(a: IdentityArgs, seed: u64) -> Result<Report, CliError> {
    let nmax = a.n.unwrap_or(30);
    need((1..=30).contains(&nmax), "N must lie in 1..=30")?;
    let mut checks = Vec::new();
    let ns: Vec<usize> = [1, 2, 5, 10, 17, 24, 30].into_iter().filter(|&n| n <= nmax).chain([nmax]).collect();
    let grid: Vec<f64> = (0..=40).map(|k| -10.0 + 0.5 * k as f64 + 0.013).collect();

    let (mut cd_h, mut cd_l): (f64, f64) = (0.0, 0.0);
    for &n in &ns {
        for &x in &grid {
            for &y in &grid {
                let s = (kernels::hermite_kernel_sum(n, x, x) * kernels::hermite_kernel_sum(n, y, y)).sqrt().max(1e-300);
                cd_h = cd_h.max((kernels::hermite_kernel(n, x, y) - kernels::hermite_kernel_sum(n, x, y)).abs() / s);
                if x >= 0.0 && y >= 0.0 {
                    for nu in [-0.5, 0.0, 2.0] {
                        let s = (kernels::laguerre_kernel_sum(n, nu, x, x) * kernels::laguerre_kernel_sum(n, nu, y, y)).sqrt().max(1e-300);
                        cd_l = cd_l.max((kernels::laguerre_kernel(n, nu, x, y) - kernels::laguerre_kernel_sum(n, nu, x, y)).abs() / s);
                    }
                }
            }
        }
    }
    checks.push(CheckRecord::near("christoffel_darboux_hermite", cd_h, 0.0, 1e-10));
    checks.push(CheckRecord::near("christoffel_darboux_laguerre", cd_l, 0.0, 1e-10));

    let mut r = rng::stream(rng::derive_seed(seed, "identity-suite"), 0);
    for (label, ty) in [("a", RootType::A), ("b", RootType::B), ("c", RootType::C), ("d", RootType::D)] {
        let mut trig: f64 = 0.0;
        let mut alg: f64 = 0.0;
        for n in 1..=6 {
            for _ in 0..10 {
                let z: Vec<C64> = (0..n).map(|_| C64::new(r.random_range(0.0..PI), r.random_range(-0.5..0.5))).collect();
                trig = trig.max(kernels::weyl_identity_residual(ty, &z).map_err(run_err)?);
                let u: Vec<C64> = (0..n).map(|_| C64::from_polar(r.random_range(0.5..1.5), r.random_range(0.0..2.0 * PI))).collect();
                alg = alg.max(kernels::weyl_denominator_residual(ty, &u).map_err(run_err)?);
            }
        }
        checks.push(CheckRecord::near(format!("weyl_{label}"), trig.max(alg), 0.0, 1e-9));
    }

    let gh = specfun::gauss_hermite(nmax + 10);
    let mut orth_h: f64 = 0.0;
    let phis: Vec<Vec<f64>> = gh.nodes.iter().map(|&x| specfun::hermite_phi_all(nmax, x)).collect();
    for j in 0..nmax {
        for k in 0..=j {
            let v: f64 = phis.iter().zip(&gh.weights).map(|(p, w)| w * p[j] * p[k]).sum::<f64>() / PI.sqrt();
            orth_h = orth_h.max((v - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    checks.push(CheckRecord::near("orthonormality_hermite", orth_h, 0.0, 1e-10));
    let mut orth_l: f64 = 0.0;
    for nu in [-0.5, 0.0, 2.0] {
        let gl = specfun::gauss_laguerre(nmax + 10, nu);
        let phis: Vec<Vec<f64>> = gl.nodes.iter().map(|&x| specfun::laguerre_phi_all(nmax, nu, x)).collect();
        let g = specfun::gamma(nu + 1.0);
        for j in 0..nmax {
            for k in 0..=j {
                let v: f64 = phis.iter().zip(&gl.weights).map(|(p, w)| w * p[j] * p[k]).sum::<f64>() / g;
                orth_l = orth_l.max((v - if j == k { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    checks.push(CheckRecord::near("orthonormality_laguerre", orth_l, 0.0, 1e-10));

    let mut trace: f64 = 0.0;
    let mut fams = vec![Family::HermiteN { n: nmax }];
    fams.extend([-0.5, 0.0, 2.0].map(|nu| Family::LaguerreN { n: nmax, nu }));
    fams.extend(RootType::ALL.map(|ty| Family::RootSystem { ty, n: nmax }));
    for f in fams {
        let tr = kernels::projection_trace(&KernelSpec::new(f).map_err(run_err)?).map_err(run_err)?;
        trace = trace.max((tr - nmax as f64).abs());
    }
    checks.push(CheckRecord::near("projection_trace", trace, 0.0, 1e-6));

    let limits = [
        ("scaling_bulk", vec![(ScalingMode::Bulk, -2.0, 2.0)]),
        ("scaling_soft_edge", vec![(ScalingMode::SoftEdge, -3.0, 2.0)]),
        ("scaling_hard_edge", vec![(ScalingMode::HardEdge(0.3), 0.0, 5.0)]),
        (
            "scaling_circular",
            vec![
                (ScalingMode::CircularBulk(RootType::A), -2.0, 2.0),
                (ScalingMode::CircularBulk(RootType::B), 0.0, 5.0),
                (ScalingMode::CircularBulk(RootType::C), 0.0, 5.0),
                (ScalingMode::CircularBulk(RootType::D), 0.0, 5.0),
            ],
        ),
    ];
    for (label, cases) in limits {
        let mut e: f64 = 0.0;
        for (mode, lo, hi) in cases {
            e = e.max(kernels::scaling_limit_error(mode, 200, lo, hi, 41).map_err(run_err)?);
        }
        checks.push(CheckRecord::near(label, e, 0.0, 1e-2));
    }
    let mut table = Table::new("identities", &["index", "value", "tolerance", "pass"]);
    table.rows = checks.iter().enumerate().map(|(i, c)| vec![i as f64, c.value, c.tolerance, if c.pass { 1.0 } else { 0.0 }]).collect();
    Ok(Report { checks, tables: vec![table], plot: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("dpplab").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file_params() {
        let file = serde_json::json!({"N": 5, "r": 1.0});
        let mut flags = DualityArgs::default();
        flags.r = Some(-1.0);
        let a = resolve(Some(&file), &flags).unwrap();
        assert_eq!(a.n, Some(5));
        assert_eq!(a.r, Some(-1.0));
        let bad = serde_json::json!({"bogus": 1});
        assert!(matches!(resolve(Some(&bad), &flags), Err(CliError::Config(_))));
    }

    #[test]
    fn uppercase_n_and_global_seed_after_subcommand() {
        let cli = parse(&["duality-check", "--N", "8", "--r", "0.0", "--replicas", "1000", "--seed", "7"]);
        assert_eq!(cli.seed, Some(7));
        match cli.command {
            Command::DualityCheck(a) => assert_eq!((a.n, a.r), (Some(8), Some(0.0))),
            _ => panic!(),
        }
    }

    #[test]
    fn stochastic_commands_need_a_seed() {
        let dir = std::env::temp_dir().join(format!("dpplab-cli-{}", std::process::id()));
        let out = dir.join("x").to_string_lossy().to_string();
        let cli = parse(&["relaxation", "--replicas", "1000", "--out", &out]);
        assert!(matches!(execute(cli), Err(CliError::Config(_))));
        assert!(!dir.exists());
    }

    #[test]
    fn kernel_table_writes_finite_outputs() {
        let dir = std::env::temp_dir().join(format!("dpplab-kt-{}", std::process::id()));
        let out = dir.join("k").to_string_lossy().to_string();
        let (rep, files) = execute(parse(&["kernel-table", "--family", "laguerre", "--N", "5", "--nu", "0.5", "--points", "15", "--out", &out])).unwrap();
        assert!(rep.pass());
        assert_eq!(files.len(), 4);
        let json: Value = serde_json::from_str(&fs::read_to_string(dir.join("k_summary.json")).unwrap()).unwrap();
        for c in json["checks"].as_array().unwrap() {
            for key in ["check", "value", "target", "tolerance", "pass"] {
                assert!(c.get(key).is_some());
            }
        }
        let again = execute(parse(&["kernel-table", "--family", "laguerre", "--N", "5", "--nu", "0.5", "--points", "15", "--out", &out])).unwrap();
        assert_eq!(rep, again.0);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn plotdata_is_long_format() {
        let mut buf = Vec::new();
        emit_plotdata(&[PlotRow::new("a", 1.0, 2.0, 0.5)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "series,x,y,yerr\na,1.0,2.0,0.5\n");
        assert!(emit_plotdata(&[], Vec::new()).is_err());
    }

    #[test]
    fn derived_seed_matches_rng_contract() {
        let ctx = Ctx { seed: Some(3), tag: "dsp-check" };
        assert_eq!(ctx.seed().unwrap(), rng::derive_seed(3, "dsp-check"));
    }
}
