//! Command-line front end. A run is fully described by a [`RunConfig`];
//! the config is echoed into `run_manifest.json` and its hash is embedded
//! in every artifact, so `rerun --manifest` reproduces the same bytes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barriers::{
    estimate_alpha_and_beta, make_exterior_ball_barrier, verify_barrier,
    verify_irregularity_barrier, BarrierReport, IrregularityBarrier, PetrovskiiBarrier, Sampler,
    TuskHouseBarrierSpec,
};
use crate::error::Error;
use crate::geometry::{Domain, DomainSpec, SpacetimePoint};
use crate::operator::OperatorParams;
use crate::regularity::{classify, petrovskii_sweep, probe_data, sweep_csv, ClassifyConfig};
use crate::solver::{cfl_bound, solve_observed, Grid, GridSpec, Storage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Family {
    ExteriorBall,
    Petrovskii,
    Irregularity,
    TuskHouse,
}

/// Boundary data for `solve`: `manufactured`, `heat_mode`, `constant:c`, or
/// `probe:x1,..,t` (the classifier's probe centered at that point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DataSpec {
    Manufactured,
    HeatMode,
    Constant(f64),
    Probe(Vec<f64>),
}

impl TryFrom<String> for DataSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<DataSpec> for String {
    fn from(d: DataSpec) -> String {
        match d {
            DataSpec::Manufactured => "manufactured".into(),
            DataSpec::HeatMode => "heat_mode".into(),
            DataSpec::Constant(c) => format!("constant:{c}"),
            DataSpec::Probe(v) => format!("probe:{}", join(&v)),
        }
    }
}

impl std::str::FromStr for DataSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "manufactured" => Ok(DataSpec::Manufactured),
            None if s == "heat_mode" => Ok(DataSpec::HeatMode),
            Some(("constant", c)) => c.trim().parse().map(DataSpec::Constant).map_err(|e| format!("{e}")),
            Some(("probe", v)) => parse_list(v).map(DataSpec::Probe),
            _ => Err(format!("unknown data '{s}'")),
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// A comma-separated list of numbers; fractions like `1/64` are allowed.
#[derive(Clone, Debug)]
pub struct FloatList(pub Vec<f64>);

impl std::str::FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_list(s).map(FloatList)
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    match parse_list(s)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(format!("expected one number, got '{s}'")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            match x.split_once('/') {
                Some((a, b)) => Ok(a.trim().parse::<f64>().map_err(|e| e.to_string())?
                    / b.trim().parse::<f64>().map_err(|e| e.to_string())?),
                None => x.parse::<f64>().map_err(|e| format!("'{x}': {e}")),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    VerifyBarrier {
        family: Family,
        #[serde(rename = "A")]
        a: Option<f64>,
        /// North-pole radius for `exterior_ball`; tangent ball when absent.
        r1: Option<f64>,
        tusk: Option<TuskHouseBarrierSpec>,
    },
    Solve {
        domain: DomainSpec,
        data: DataSpec,
        slices: usize,
    },
    Classify {
        domain: DomainSpec,
        point: Vec<f64>,
        ladder: Vec<f64>,
    },
    PetrovskiiSweep {
        #[serde(rename = "A")]
        a_list: Vec<f64>,
        ladder: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub h: f64,
    /// Time step as a fraction of the stability bound.
    pub cfl_safety: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta_reg: f64,
    pub theta_irr: f64,
    pub slack: f64,
    pub grad_tol: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        let c = ClassifyConfig::default();
        Self {
            theta_reg: c.theta_reg,
            theta_irr: c.theta_irr,
            slack: 0.0,
            grad_tol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub p: f64,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub grid: GridConfig,
    pub sampler: Sampler,
    pub thresholds: Thresholds,
}

impl RunConfig {
    /// SHA-256 of the config with the output directory blanked, so a rerun
    /// into a different directory keeps the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    fn params(&self) -> crate::error::Result<OperatorParams> {
        let mut params = OperatorParams::new(self.p)?.with_slack(self.thresholds.slack)?;
        if let Some(tol) = self.thresholds.grad_tol {
            params = params.with_grad_tol(tol)?;
        }
        Ok(params)
    }

    fn classify_config(&self, ladder: &[f64]) -> ClassifyConfig {
        ClassifyConfig {
            ladder: ladder.to_vec(),
            theta_reg: self.thresholds.theta_reg,
            theta_irr: self.thresholds.theta_irr,
            ..ClassifyConfig::default()
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub artifacts: Vec<String>,
}

/// How a run failed: bad input (exit 2) or a failed computation (exit 1).
#[derive(Debug)]
pub enum RunError {
    Config(Error),
    Compute(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute(_) => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let e = match self {
            RunError::Config(e) | RunError::Compute(e) => e,
        };
        serde_json::json!({ "error": e.name(), "message": e.to_string() }).to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Verification ran to completion but a check failed.
    ChecksFailed,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ChecksFailed => 3,
        }
    }
}

#[derive(Serialize)]
struct Stamped<'a, T> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: T,
}

struct Writer {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Writer {
    fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), RunError> {
        let s = serde_json::to_string_pretty(&Stamped {
            config_hash: &self.hash,
            body,
        })
        .map_err(|e| RunError::Compute(Error::Io(e.to_string())))?;
        self.raw(name, s + "\n")
    }

    /// CSV with the hash as a trailing comment line.
    fn csv(&mut self, name: &str, mut body: String) -> Result<(), RunError> {
        writeln!(body, "# config_hash={}", self.hash).expect("string write");
        self.raw(name, body)
    }

    fn raw(&mut self, name: &str, body: String) -> Result<(), RunError> {
        fs::write(self.dir.join(name), body).map_err(|e| RunError::Compute(Error::Io(e.to_string())))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn config_err<T>(r: crate::error::Result<T>) -> Result<T, RunError> {
    r.map_err(RunError::Config)
}

fn compute_err<T>(r: crate::error::Result<T>) -> Result<T, RunError> {
    r.map_err(RunError::Compute)
}

/// Executes a run and writes its artifacts plus `run_manifest.json` into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunStatus, RunError> {
    let params = config_err(config.params())?;
    fs::create_dir_all(&config.out).map_err(|e| RunError::Config(Error::Io(e.to_string())))?;
    let mut w = Writer {
        dir: config.out.clone(),
        hash: config.hash(),
        written: Vec::new(),
    };
    let status = match &config.command {
        Command::VerifyBarrier { family, a, r1, tusk } => {
            verify(config, &params, *family, *a, *r1, tusk.as_ref(), &mut w)?
        }
        Command::Solve { domain, data, slices } => {
            let dom = config_err(domain.build())?;
            solve_cmd(config, &params, &dom, data, *slices, &mut w)?;
            RunStatus::Ok
        }
        Command::Classify { domain, point, ladder } => {
            let dom = config_err(domain.build())?;
            if point.len() != dom.n() + 1 {
                return Err(RunError::Config(Error::InvalidParameter(format!(
                    "point needs {} coordinates, got {}",
                    dom.n() + 1,
                    point.len()
                ))));
            }
            let xi0 = SpacetimePoint::new(&point[..dom.n()], point[dom.n()]);
            let rep = classify(&dom, &xi0, &params, &config.classify_config(ladder)).map_err(|e| match e {
                Error::NotABoundaryPoint(_) => RunError::Config(e),
                e => RunError::Compute(e),
            })?;
            w.json("regularity_report.json", &rep)?;
            RunStatus::Ok
        }
        Command::PetrovskiiSweep { a_list, ladder } => {
            if a_list.iter().any(|a| !(*a > 0.0)) {
                return Err(RunError::Config(Error::InvalidParameter("A values must be positive".into())));
            }
            let rows = compute_err(petrovskii_sweep(config.p, config.n, a_list, &config.classify_config(ladder)))?;
            w.csv("petrovskii_sweep.csv", sweep_csv(&rows))?;
            RunStatus::Ok
        }
    };
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: w.hash.clone(),
        config: config.clone(),
        artifacts: w.written.clone(),
    };
    let s = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(config.out.join("run_manifest.json"), s + "\n")
        .map_err(|e| RunError::Compute(Error::Io(e.to_string())))?;
    Ok(status)
}

fn verify(
    config: &RunConfig,
    params: &OperatorParams,
    family: Family,
    a: Option<f64>,
    r1: Option<f64>,
    tusk: Option<&TuskHouseBarrierSpec>,
    w: &mut Writer,
) -> Result<RunStatus, RunError> {
    let n = config.n;
    let p = config.p;
    let origin = SpacetimePoint::new(&vec![0.0; n], 0.0);
    let report: BarrierReport = match family {
        Family::ExteriorBall => {
            let (xi1, r) = match r1 {
                Some(r) => (SpacetimePoint::new(&vec![0.0; n], -r), r),
                None => {
                    let mut x = vec![0.0; n];
                    x[0] = 1.0;
                    (SpacetimePoint::new(&x, 0.0), 1.0)
                }
            };
            let bar = config_err(make_exterior_ball_barrier(&origin, &xi1, r, p))?;
            let dom = config_err(bar.neighborhood())?;
            let mut rep = compute_err(verify_barrier(&bar.field(), &dom, &origin, params, &config.sampler))?;
            rep.family = "exterior_ball".into();
            rep
        }
        Family::Petrovskii => {
            let bar = config_err(PetrovskiiBarrier::new(p, n))?;
            let dom = config_err(Domain::petrovskii(a.unwrap_or(bar.k), n))?;
            let mut rep = compute_err(verify_barrier(&bar.field(), &dom, &origin, params, &config.sampler))?;
            rep.family = "petrovskii".into();
            rep
        }
        Family::Irregularity => {
            let a = a.ok_or_else(|| RunError::Config(Error::InvalidParameter("irregularity needs --A".into())))?;
            let bar = config_err(IrregularityBarrier::new(p, n, a, None))?;
            let dom = config_err(Domain::petrovskii(a, n))?;
            compute_err(verify_irregularity_barrier(&bar, &dom, params, &config.sampler))?
        }
        Family::TuskHouse => {
            let spec = match tusk {
                Some(s) => s.clone(),
                None => {
                    let mut xhat = vec![0.0; n];
                    xhat[0] = 1.0;
                    config_err(TuskHouseBarrierSpec::new(&xhat, 0.5, 2.0))?
                }
            };
            if spec.xhat.len() != n {
                return Err(RunError::Config(Error::InvalidParameter("tusk dimension differs from n".into())));
            }
            let ab = compute_err(estimate_alpha_and_beta(&spec, params, config.grid.h))?;
            w.json("alpha_beta.json", &serde_json::json!({ "spec": spec, "estimate": ab }))?;
            return Ok(if ab.beta > 0.0 { RunStatus::Ok } else { RunStatus::ChecksFailed });
        }
    };
    w.json("barrier_report.json", &report)?;
    Ok(if report.pass { RunStatus::Ok } else { RunStatus::ChecksFailed })
}

/// Boundary data and whether it is also the exact solution.
fn data_fn(data: &DataSpec, dom: &Domain, p: f64) -> Result<(Box<dyn Fn(&SpacetimePoint) -> f64>, bool), RunError> {
    let n = dom.n();
    Ok(match data.clone() {
        DataSpec::Manufactured => {
            let c = 2.0 * (n as f64 + p - 2.0);
            (Box::new(move |xi: &SpacetimePoint| xi.x.iter().map(|x| x * x).sum::<f64>() + c * xi.t), true)
        }
        DataSpec::HeatMode => (
            Box::new(move |xi: &SpacetimePoint| {
                (-(n as f64) * PI * PI * (xi.t + 1.0)).exp() * xi.x.iter().map(|x| (PI * x).sin()).product::<f64>()
            }),
            p == 2.0,
        ),
        DataSpec::Constant(c) => (Box::new(move |_: &SpacetimePoint| c), true),
        DataSpec::Probe(v) => {
            if v.len() != n + 1 {
                return Err(RunError::Config(Error::InvalidParameter(format!(
                    "probe point needs {} coordinates, got {}",
                    n + 1,
                    v.len()
                ))));
            }
            let xi0 = SpacetimePoint::new(&v[..n], v[n]);
            (Box::new(probe_data(dom, &xi0)), false)
        }
    })
}

#[derive(Serialize)]
struct SolveSummary {
    h: f64,
    dt: f64,
    steps: usize,
    nodes: usize,
    exact_known: bool,
    max_error: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
}

fn solve_cmd(
    config: &RunConfig,
    params: &OperatorParams,
    dom: &Domain,
    data: &DataSpec,
    slices: usize,
    w: &mut Writer,
) -> Result<(), RunError> {
    let n = dom.n();
    let (data_f, exact) = data_fn(data, dom, config.p)?;
    let g = &config.grid;
    if !(g.cfl_safety > 0.0 && g.cfl_safety <= 1.0) {
        return Err(RunError::Config(Error::InvalidParameter("cfl_safety must be in (0, 1]".into())));
    }
    let duration = dom.bbox().duration();
    let target = g.cfl_safety * cfl_bound(n, config.p, g.h);
    let dt = duration / (duration / target).ceil().max(1.0);
    let probe = config_err(Grid::new(dom, params, &GridSpec::new(g.h).with_dt(dt)))?;
    let stride = (probe.steps / slices.max(1)).max(1);
    let spec = GridSpec::new(g.h).with_dt(dt).with_storage(Storage::Stride(stride));
    let mut max_err: f64 = 0.0;
    let u = compute_err(solve_observed(dom, &data_f, params, &spec, |grid, slice| {
        if exact {
            for (k, v) in slice.values.iter().enumerate() {
                if !v.is_nan() {
                    let e = (v - data_f(&SpacetimePoint::new(&grid.node_x(k), slice.t))).abs();
                    max_err = max_err.max(e);
                }
            }
        }
    }))?;
    let mut csv = String::new();
    for d in 0..n {
        write!(csv, "x{},", d + 1).expect("string write");
    }
    csv.push_str("t,u\n");
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (pt, v) in u.nodes() {
        for x in &pt.x {
            write!(csv, "{x},").expect("string write");
        }
        writeln!(csv, "{},{v}", pt.t).expect("string write");
        lo = lo.min(v);
        hi = hi.max(v);
    }
    w.csv("solution.csv", csv)?;
    let summary = SolveSummary {
        h: u.grid.h,
        dt: u.grid.dt,
        steps: u.grid.steps,
        nodes: u.grid.node_count(),
        exact_known: exact,
        max_error: exact.then_some(max_err),
        min: lo.is_finite().then_some(lo),
        max: hi.is_finite().then_some(hi),
    };
    w.json("solve_summary.json", &summary)
}

#[derive(Parser)]
#[command(name = "pparabolic", version, about = "Normalized p-parabolic barriers, solver and boundary classifier")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory [default: ./out, or the manifest's for rerun].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Args)]
pub struct Common {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long = "grad-tol")]
    pub grad_tol: Option<f64>,
}

#[derive(Args)]
pub struct ClassifyArgs {
    /// Comma-separated grid steps, coarse to fine (fractions like 1/64 allowed).
    #[arg(long)]
    pub ladder: Option<FloatList>,
    #[arg(long = "theta-reg")]
    pub theta_reg: Option<f64>,
    #[arg(long = "theta-irr")]
    pub theta_irr: Option<f64>,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Verifies a barrier family and writes the report.
    VerifyBarrier {
        #[arg(long, value_enum)]
        family: Family,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long = "A")]
        a: Option<f64>,
        #[arg(long)]
        r1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        xhat: Option<FloatList>,
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long = "R0")]
        r0: Option<f64>,
        /// Grid step for the tusk-house solve.
        #[arg(long, value_parser = parse_num, default_value = "1/64")]
        h: f64,
    },
    /// Solves a boundary-value problem and writes slices as CSV.
    Solve {
        /// Domain descriptor: a JSON file path or inline JSON.
        #[arg(long)]
        domain: String,
        #[arg(long)]
        data: DataSpec,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_num)]
        h: f64,
        #[arg(long = "cfl-safety", default_value_t = 1.0)]
        cfl_safety: f64,
        /// Approximate number of slices written.
        #[arg(long, default_value_t = 8)]
        slices: usize,
    },
    /// Classifies a boundary point.
    Classify {
        #[arg(long)]
        domain: String,
        /// Comma-separated coordinates `x1,..,t`.
        #[arg(long, allow_hyphen_values = true)]
        point: FloatList,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cls: ClassifyArgs,
    },
    /// Classifies the Petrovskiĭ vertex for a list of constants.
    PetrovskiiSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long = "A")]
        a: FloatList,
        #[command(flatten)]
        cls: ClassifyArgs,
    },
    /// Re-executes the run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn load_domain(s: &str) -> Result<DomainSpec, RunError> {
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        fs::read_to_string(s).map_err(|e| RunError::Config(Error::Io(format!("{s}: {e}"))))?
    };
    serde_json::from_str(&text).map_err(|e| RunError::Config(Error::InvalidParameter(format!("domain: {e}"))))
}

fn base_config(command: Command, common: &Common, n: usize, seed: u64, out: &Option<PathBuf>) -> RunConfig {
    RunConfig {
        command,
        p: common.p,
        n,
        seed,
        out: out.clone().unwrap_or_else(|| PathBuf::from("./out")),
        grid: GridConfig { h: 1.0 / 64.0, cfl_safety: 1.0 },
        sampler: Sampler { seed, ..Sampler::default() },
        thresholds: Thresholds {
            slack: common.slack.unwrap_or(0.0),
            grad_tol: common.grad_tol,
            ..Thresholds::default()
        },
    }
}

fn apply_cls(cfg: &mut RunConfig, cls: &ClassifyArgs) {
    if let Some(t) = cls.theta_reg {
        cfg.thresholds.theta_reg = t;
    }
    if let Some(t) = cls.theta_irr {
        cfg.thresholds.theta_irr = t;
    }
}

/// Turns parsed arguments into a config.
pub fn resolve(cli: Cli) -> Result<RunConfig, RunError> {
    let default_ladder = ClassifyConfig::default().ladder;
    let cfg = match cli.command {
        Cmd::VerifyBarrier { family, common, n, a, r1, xhat, r, r0, h } => {
            let tusk = match (family, xhat, r, r0) {
                (Family::TuskHouse, xhat, r, r0) if xhat.is_some() || r.is_some() || r0.is_some() => {
                    let xhat = xhat.map(|l| l.0).unwrap_or_else(|| {
                        let mut v = vec![0.0; n];
                        v[0] = 1.0;
                        v
                    });
                    Some(config_err(TuskHouseBarrierSpec::new(&xhat, r.unwrap_or(0.5), r0.unwrap_or(2.0)))?)
                }
                _ => None,
            };
            let mut c = base_config(Command::VerifyBarrier { family, a, r1, tusk }, &common, n, cli.seed, &cli.out);
            c.grid.h = h;
            c
        }
        Cmd::Solve { domain, data, common, h, cfl_safety, slices } => {
            let spec = load_domain(&domain)?;
            let n = config_err(spec.build())?.n();
            let mut c = base_config(Command::Solve { domain: spec, data, slices }, &common, n, cli.seed, &cli.out);
            c.grid = GridConfig { h, cfl_safety };
            c
        }
        Cmd::Classify { domain, point, common, cls } => {
            let spec = load_domain(&domain)?;
            let n = config_err(spec.build())?.n();
            let ladder = cls.ladder.clone().map_or(default_ladder, |l| l.0);
            let mut c = base_config(Command::Classify { domain: spec, point: point.0, ladder }, &common, n, cli.seed, &cli.out);
            apply_cls(&mut c, &cls);
            c
        }
        Cmd::PetrovskiiSweep { common, n, a, cls } => {
            let ladder = cls.ladder.clone().map_or(default_ladder, |l| l.0);
            let mut c = base_config(Command::PetrovskiiSweep { a_list: a.0, ladder }, &common, n, cli.seed, &cli.out);
            apply_cls(&mut c, &cls);
            c
        }
        Cmd::Rerun { manifest } => {
            let text = fs::read_to_string(&manifest)
                .map_err(|e| RunError::Config(Error::Io(format!("{}: {e}", manifest.display()))))?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| RunError::Config(Error::InvalidParameter(format!("manifest: {e}"))))?;
            let mut c = m.config;
            if let Some(out) = cli.out {
                c.out = out;
            }
            c
        }
    };
    Ok(cfg)
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
