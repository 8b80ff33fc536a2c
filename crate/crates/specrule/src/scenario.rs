//! Scenario runner: flat key-value configuration, named suites, ordered
//! parallel execution and report emission.
//!
//! # Configuration grammar
//!
//! A scenario file is a TOML document restricted to top-level keys. Every key
//! is optional; unset keys fall back to per-suite defaults.
//!
//! ```text
//! suite       = "trk"                 # one of SUITES
//! seed        = 1                     # u64, drives every random instance
//! dims        = [4, 8]                # matrix dimensions
//! trials      = 50                    # random instances per dimension
//! grid_points = 9                     # τ-grid size on [0, 1] for path suites
//! z_values    = 3                     # random shifts z per subset
//! nu_grid     = { start = 0.6, stop = 3.0, points = 17 }   # or an array
//! bessel_m    = 3                     # levels in the concavity suite
//! bessel_k    = 5                     # rows per ν in the level table
//! bessel_n    = 4000                  # interior grid points
//! moment_nu   = [0.0, 0.5, 1.0, 2.0]
//! hdot_nu     = [1.5, 2.0, 3.0]
//! lt_tau_well = { start = 0.05, stop = 2.0, points = 9, spacing = "log" }
//! lt_tau_bump = [0.01, 0.1, 1.0]
//! lt_n        = 2001
//! tol_scale   = 1.0                   # multiplies every tolerance
//! tol         = { "trk-sum-rule" = 1e-8 }   # absolute override by anchor
//! out_dir     = "out"
//! ```
//!
//! Unknown keys and ill-typed values are rejected with the key named.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bessel::{self, LevelTableRow, PartitionSuite};
use crate::error::{Result, SpecError};
use crate::family::{fd_derivative_check, FdOptions, OperatorFamily};
use crate::liebthirring::{self, LtRow, PotentialSpec};
use crate::linalg::{eigendecompose, Eigensystem, HermitianMatrix, Matrix};
use crate::quad::{linspace, logspace};
use crate::random::{
    gapped_hermitian, random_complex, random_density, random_hermitian, random_positive_definite, rng, SpecRng,
};
use crate::report::{CheckKind, CheckReport, PathReport};
use crate::riesz::{riesz_monotonicity_scan, Coefficient, Hypotheses, Levels, RieszCoefficients, RieszScan, TabulatedLevels};
use crate::scalar::ScalarFunction;
use crate::sumrules;
use crate::tol;
use crate::traceineq::{self, BottomPart, MeanCase, TracePathPart, TransformVariant};

/// Registered suite names, in the order `all` runs them.
pub const SUITES: [&str; 11] = [
    "trk",
    "hs-quadratic",
    "fh2",
    "squeeze",
    "riesz-scan",
    "trace",
    "entropy",
    "matrix-sum",
    "bessel",
    "lieb-thirring",
    "all",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Trk,
    HsQuadratic,
    Fh2,
    Squeeze,
    RieszScan,
    Trace,
    Entropy,
    MatrixSum,
    Bessel,
    LiebThirring,
    All,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "trk" => Suite::Trk,
            "hs-quadratic" => Suite::HsQuadratic,
            "fh2" => Suite::Fh2,
            "squeeze" => Suite::Squeeze,
            "riesz-scan" => Suite::RieszScan,
            "trace" => Suite::Trace,
            "entropy" => Suite::Entropy,
            "matrix-sum" => Suite::MatrixSum,
            "bessel" => Suite::Bessel,
            "lieb-thirring" => Suite::LiebThirring,
            "all" => Suite::All,
            _ => {
                return Err(SpecError::Config {
                    key: "suite".into(),
                    message: format!("unknown suite {name:?}; expected one of {}", SUITES.join(", ")),
                })
            }
        })
    }

    pub fn name(self) -> &'static str {
        SUITES[self as usize]
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => (0..SUITES.len() - 1).map(|i| Suite::parse(SUITES[i]).expect("registered")).collect(),
            s => vec![s],
        }
    }
}

/// Parsed scenario. `None` means "use the suite default".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub suite: Suite,
    pub seed: u64,
    pub dims: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub grid_points: usize,
    pub z_values: usize,
    pub nu_grid: Vec<f64>,
    pub bessel_m: usize,
    pub bessel_k: usize,
    pub bessel_n: usize,
    pub moment_nu: Vec<f64>,
    pub hdot_nu: Vec<f64>,
    pub lt_tau_well: Vec<f64>,
    pub lt_tau_bump: Vec<f64>,
    pub lt_n: usize,
    pub tol_scale: f64,
    pub tol_overrides: BTreeMap<String, f64>,
    pub out_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(suite: Suite) -> Self {
        ScenarioConfig {
            suite,
            seed: 1,
            dims: None,
            trials: None,
            grid_points: 9,
            z_values: 3,
            nu_grid: linspace(0.6, 3.0, 17),
            bessel_m: 3,
            bessel_k: 5,
            bessel_n: bessel::DEFAULT_N,
            moment_nu: vec![0.0, 0.5, 1.0, 2.0],
            hdot_nu: vec![1.5, 2.0, 3.0],
            lt_tau_well: logspace(0.05, 2.0, 9),
            lt_tau_bump: logspace(0.01, 1.0, 9),
            lt_n: 2001,
            tol_scale: 1.0,
            tol_overrides: BTreeMap::new(),
            out_dir: None,
        }
    }

    /// Parses the flat key-value format; `suite` may be omitted when the
    /// caller supplies it separately.
    pub fn parse(text: &str, default_suite: Option<Suite>) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| SpecError::Config {
            key: e.span().map(|s| key_at(text, s.start)).unwrap_or_default(),
            message: e.message().to_string(),
        })?;
        let suite = match table.get("suite") {
            Some(v) => Suite::parse(&as_str("suite", v)?)?,
            None => default_suite.ok_or_else(|| cfg_err("suite", "missing"))?,
        };
        let mut c = ScenarioConfig::new(suite);
        for (key, v) in &table {
            let k = key.as_str();
            match k {
                "suite" => {}
                "seed" => c.seed = as_int(k, v)?,
                "dims" => c.dims = Some(as_list(k, v, |x| positive(k, as_int(k, x)?))?),
                "trials" => c.trials = Some(positive(k, as_int(k, v)?)?),
                "grid_points" => c.grid_points = at_least(k, as_int(k, v)?, traceineq::MIN_GRID)?,
                "z_values" => c.z_values = positive(k, as_int(k, v)?)?,
                "nu_grid" => c.nu_grid = as_grid(k, v)?,
                "bessel_m" => c.bessel_m = positive(k, as_int(k, v)?)?,
                "bessel_k" => c.bessel_k = positive(k, as_int(k, v)?)?,
                "bessel_n" => c.bessel_n = at_least(k, as_int(k, v)?, 16)?,
                "moment_nu" => c.moment_nu = as_grid(k, v)?,
                "hdot_nu" => c.hdot_nu = as_grid(k, v)?,
                "lt_tau_well" => c.lt_tau_well = as_grid(k, v)?,
                "lt_tau_bump" => c.lt_tau_bump = as_grid(k, v)?,
                "lt_n" => c.lt_n = at_least(k, as_int(k, v)?, liebthirring::MIN_GRID)?,
                "tol_scale" => {
                    let s = as_float(k, v)?;
                    if !(s.is_finite() && s > 0.0) {
                        return Err(cfg_err(k, "must be a positive number"));
                    }
                    c.tol_scale = s;
                }
                "tol" => {
                    let t = v.as_table().ok_or_else(|| cfg_err(k, "expected a table of anchor = tolerance"))?;
                    for (anchor, x) in t {
                        let key = format!("tol.{anchor}");
                        let val = as_float(&key, x)?;
                        if !(val.is_finite() && val >= 0.0) {
                            return Err(cfg_err(&key, "must be a nonnegative number"));
                        }
                        c.tol_overrides.insert(anchor.clone(), val);
                    }
                }
                "out_dir" => c.out_dir = Some(PathBuf::from(as_str(k, v)?)),
                _ => return Err(cfg_err(k, "unknown key")),
            }
        }
        Ok(c)
    }

    pub fn from_file(path: &Path, default_suite: Option<Suite>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SpecError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, default_suite)
    }
}

fn cfg_err(key: &str, message: &str) -> SpecError {
    SpecError::Config { key: key.to_string(), message: message.to_string() }
}

/// Key on the line containing byte offset `pos`, for parse errors.
fn key_at(text: &str, pos: usize) -> String {
    let start = text[..pos.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next().unwrap_or("");
    line.split('=').next().unwrap_or("").trim().to_string()
}

fn as_int<T: TryFrom<i64>>(key: &str, v: &toml::Value) -> Result<T> {
    let i = v.as_integer().ok_or_else(|| cfg_err(key, &format!("expected an integer, got {}", v.type_str())))?;
    T::try_from(i).map_err(|_| cfg_err(key, &format!("{i} is out of range")))
}

fn as_float(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(cfg_err(key, &format!("expected a number, got {}", v.type_str()))),
    }
}

fn as_str(key: &str, v: &toml::Value) -> Result<String> {
    v.as_str().map(str::to_string).ok_or_else(|| cfg_err(key, &format!("expected a string, got {}", v.type_str())))
}

fn positive(key: &str, n: usize) -> Result<usize> {
    at_least(key, n, 1)
}

fn at_least(key: &str, n: usize, min: usize) -> Result<usize> {
    if n < min {
        return Err(cfg_err(key, &format!("must be at least {min}, got {n}")));
    }
    Ok(n)
}

fn as_list<T>(key: &str, v: &toml::Value, f: impl Fn(&toml::Value) -> Result<T>) -> Result<Vec<T>> {
    let a = v.as_array().ok_or_else(|| cfg_err(key, &format!("expected an array, got {}", v.type_str())))?;
    if a.is_empty() {
        return Err(cfg_err(key, "must not be empty"));
    }
    a.iter().map(f).collect()
}

/// An explicit array, or `{ start, stop, points, spacing = "linear" | "log" }`.
fn as_grid(key: &str, v: &toml::Value) -> Result<Vec<f64>> {
    let g = match v {
        toml::Value::Array(_) => as_list(key, v, |x| as_float(key, x))?,
        toml::Value::Table(t) => {
            for k in t.keys() {
                if !["start", "stop", "points", "spacing"].contains(&k.as_str()) {
                    return Err(cfg_err(&format!("{key}.{k}"), "unknown key"));
                }
            }
            let get = |k: &str| t.get(k).ok_or_else(|| cfg_err(&format!("{key}.{k}"), "missing"));
            let a = as_float(&format!("{key}.start"), get("start")?)?;
            let b = as_float(&format!("{key}.stop"), get("stop")?)?;
            let n = at_least(&format!("{key}.points"), as_int(&format!("{key}.points"), get("points")?)?, 2)?;
            match t.get("spacing").map(|s| as_str(&format!("{key}.spacing"), s)).transpose()?.as_deref() {
                None | Some("linear") => linspace(a, b, n),
                Some("log") if a > 0.0 && b > 0.0 => logspace(a, b, n),
                Some("log") => return Err(cfg_err(&format!("{key}.spacing"), "log spacing needs positive endpoints")),
                Some(s) => return Err(cfg_err(&format!("{key}.spacing"), &format!("expected \"linear\" or \"log\", got {s:?}"))),
            }
        }
        _ => return Err(cfg_err(key, &format!("expected an array or a range table, got {}", v.type_str()))),
    };
    if g.iter().any(|x| !x.is_finite()) {
        return Err(cfg_err(key, "values must be finite"));
    }
    Ok(g)
}

/// Build and precision information; deliberately free of timestamps and host
/// names so that reports are byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvStamp {
    pub version: String,
    pub precision: String,
    pub tol_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Summary {
    pub total: usize,
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub suite: String,
    pub seed: u64,
    pub env: EnvStamp,
    pub summary: Summary,
    pub checks: Vec<CheckReport>,
    #[serde(skip)]
    pub bessel_levels: Vec<LevelTableRow>,
    /// Per-potential Lieb–Thirring rows.
    #[serde(skip)]
    pub lt_rows: Vec<(String, LtRow)>,
}

impl RunReport {
    pub fn empty(suite: &str, seed: u64) -> Self {
        RunReport {
            suite: suite.to_string(),
            seed,
            env: env_stamp(1.0),
            summary: Summary::default(),
            checks: Vec::new(),
            bessel_levels: Vec::new(),
            lt_rows: Vec::new(),
        }
    }

    pub fn success(&self) -> bool {
        self.summary.fail == 0
    }

    fn summarize(&mut self) {
        let mut s = Summary { total: self.checks.len(), ..Summary::default() };
        for c in &self.checks {
            if c.skipped {
                s.skipped += 1;
            } else if c.pass {
                s.pass += 1;
            } else {
                s.fail += 1;
            }
        }
        self.summary = s;
    }
}

fn env_stamp(tol_scale: f64) -> EnvStamp {
    EnvStamp {
        version: env!("CARGO_PKG_VERSION").to_string(),
        precision: "f64 (IEEE 754 binary64)".to_string(),
        tol_scale: tol_scale * tol::scale(),
    }
}

#[derive(Default)]
struct JobOutput {
    checks: Vec<CheckReport>,
    levels: Vec<LevelTableRow>,
    lt: Vec<(String, LtRow)>,
}

impl JobOutput {
    fn checks(checks: Vec<CheckReport>) -> Self {
        JobOutput { checks, ..Default::default() }
    }
}

type JobFn = Box<dyn Fn() -> Result<JobOutput> + Send + Sync>;

struct Job {
    suite: Suite,
    label: String,
    run: JobFn,
}

fn job(suite: Suite, label: String, run: impl Fn() -> Result<JobOutput> + Send + Sync + 'static) -> Job {
    Job { suite, label, run: Box::new(run) }
}

/// Executes every check of the configured suite. Jobs run in parallel on the
/// current rayon pool; results are merged in registration order.
pub fn run_scenario(config: &ScenarioConfig) -> RunReport {
    let jobs: Vec<Job> = config.suite.members().into_iter().flat_map(|s| build_jobs(s, config)).collect();
    let outputs: Vec<(usize, JobOutput)> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, j)| (i, execute(j)))
        .collect();
    let mut report = RunReport::empty(config.suite.name(), config.seed);
    report.env = env_stamp(config.tol_scale);
    for (i, out) in outputs {
        let j = &jobs[i];
        for c in out.checks {
            let c = c.with("suite", j.suite.name()).with("instance", &j.label);
            report.checks.push(apply_tolerance(c, config));
        }
        report.bessel_levels.extend(out.levels);
        report.lt_rows.extend(out.lt);
    }
    report.summarize();
    report
}

fn execute(j: &Job) -> JobOutput {
    match catch_unwind(AssertUnwindSafe(|| (j.run)())) {
        Ok(Ok(out)) => out,
        Ok(Err(e)) => JobOutput::checks(vec![CheckReport::failed(format!("{}-error", j.suite.name()), "evaluation", &e.to_string())]),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            JobOutput::checks(vec![CheckReport::failed(format!("{}-panic", j.suite.name()), "evaluation", &msg)])
        }
    }
}

fn apply_tolerance(c: CheckReport, config: &ScenarioConfig) -> CheckReport {
    if c.skipped || c.tol.is_nan() {
        return c;
    }
    if let Some(&t) = config.tol_overrides.get(&c.anchor) {
        return c.with_tol(t * tol::scale() * config.tol_scale);
    }
    if config.tol_scale != 1.0 {
        let t = c.tol * config.tol_scale;
        return c.with_tol(t);
    }
    c
}

/// Keeps the check with the least slack for each anchor, preserving first
/// appearance order, and records how many were evaluated.
pub fn worst_per_anchor(checks: Vec<CheckReport>) -> Vec<CheckReport> {
    let mut order: Vec<String> = Vec::new();
    let mut best: BTreeMap<String, (CheckReport, usize)> = BTreeMap::new();
    for c in checks {
        let key = c.anchor.clone();
        match best.get_mut(&key) {
            None => {
                order.push(key.clone());
                best.insert(key, (c, 1));
            }
            Some((cur, n)) => {
                *n += 1;
                if slack(&c) < slack(cur) {
                    *cur = c;
                }
            }
        }
    }
    order
        .into_iter()
        .map(|k| {
            let (c, n) = best.remove(&k).expect("recorded");
            c.with("evaluated", n)
        })
        .collect()
}

fn slack(c: &CheckReport) -> f64 {
    if c.skipped {
        return f64::INFINITY;
    }
    if !c.pass && !c.residual_or_margin.is_finite() {
        return f64::NEG_INFINITY;
    }
    match c.kind {
        CheckKind::Identity => c.tol - c.residual_or_margin.abs(),
        CheckKind::Inequality => c.residual_or_margin + c.tol,
    }
}

fn stream(suite: Suite, dim_index: usize, trial: usize) -> u64 {
    ((suite as u64) << 40) | ((dim_index as u64) << 20) | trial as u64
}

fn uniform(r: &mut SpecRng, a: f64, b: f64) -> f64 {
    use rand::Rng;
    a + (b - a) * r.random::<f64>()
}

/// Dimensions and trials for a random-matrix suite.
fn instances(config: &ScenarioConfig, dims: &[usize], trials: usize) -> Vec<(usize, usize, usize)> {
    let dims = config.dims.clone().unwrap_or_else(|| dims.to_vec());
    let trials = config.trials.unwrap_or(trials);
    let mut out = Vec::new();
    for (di, &n) in dims.iter().enumerate() {
        for t in 0..trials {
            out.push((di, n, t));
        }
    }
    out
}

fn tau_grid(config: &ScenarioConfig) -> Vec<f64> {
    linspace(0.0, 1.0, config.grid_points)
}

fn build_jobs(suite: Suite, config: &ScenarioConfig) -> Vec<Job> {
    match suite {
        Suite::Trk => trk_jobs(config),
        Suite::HsQuadratic => hs_jobs(config),
        Suite::Fh2 => fh2_jobs(config),
        Suite::Squeeze => squeeze_jobs(config),
        Suite::RieszScan => riesz_jobs(config),
        Suite::Trace => trace_jobs(config),
        Suite::Entropy => entropy_jobs(config),
        Suite::MatrixSum => matrix_sum_jobs(config),
        Suite::Bessel => bessel_jobs(config),
        Suite::LiebThirring => lt_jobs(config),
        Suite::All => Vec::new(),
    }
}

/// Even trials use a Hermitian probe, odd trials a general complex one.
fn probe(r: &mut SpecRng, n: usize, trial: usize) -> Matrix {
    if trial % 2 == 0 {
        random_hermitian(r, n).into_matrix()
    } else {
        random_complex(r, n)
    }
}

fn trk_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let seed = config.seed;
    instances(config, &[2, 4, 8, 16], 50)
        .into_iter()
        .map(|(di, n, t)| {
            job(Suite::Trk, format!("n={n} trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::Trk, di, t));
                let sys = Eigensystem::new(random_hermitian(&mut r, n))?;
                let g = probe(&mut r, n, t);
                let checks = (0..n).map(|j| sumrules::trk_sum_rule(&sys, &g, j)).collect::<Result<Vec<_>>>()?;
                Ok(JobOutput::checks(worst_per_anchor(checks)))
            })
        })
        .collect()
}

fn hs_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let (seed, zn) = (config.seed, config.z_values);
    instances(config, &[2, 4, 8, 16], 50)
        .into_iter()
        .map(|(di, n, t)| {
            job(Suite::HsQuadratic, format!("n={n} trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::HsQuadratic, di, t));
                let sys = Eigensystem::new(random_hermitian(&mut r, n))?;
                let g = probe(&mut r, n, t);
                let lam = sys.decomp.sorted_eigenvalues();
                let (lo, hi) = (lam[0] - 1.0, lam[n - 1] + 1.0);
                let mut checks = Vec::new();
                for m in 1..=n {
                    let subset: Vec<usize> = (0..m).collect();
                    for _ in 0..zn {
                        let z = uniform(&mut r, lo, hi);
                        checks.push(sumrules::hs_quadratic_sum_rule(&sys, &g, &subset, z)?);
                    }
                    if m < n {
                        let z = uniform(&mut r, lam[m - 1], lam[m]);
                        checks.extend(sumrules::hs_band_bound(&sys, &g, m, z)?);
                    }
                }
                Ok(JobOutput::checks(worst_per_anchor(checks)))
            })
        })
        .collect()
}

/// Largest second-derivative residual at plain central-difference step `h`.
fn fd_residual(family: &OperatorFamily, tau: f64, h: f64) -> Result<f64> {
    let snap = family.snapshot(tau, FdOptions { h, levels: 1 })?;
    let mut worst = 0.0f64;
    for j in 0..snap.dim() {
        worst = worst.max(sumrules::second_derivative_identity(&snap, j)?.residual_or_margin.abs());
    }
    Ok(worst)
}

/// Observed order of the second-difference error from steps `h` and `h/2`.
fn fd_order_check(family: &OperatorFamily, tau: f64) -> Result<CheckReport> {
    let h = 0.01;
    let (r1, r2) = (fd_residual(family, tau, h)?, fd_residual(family, tau, 0.5 * h)?);
    if r1 < 1e-9 {
        return Ok(CheckReport::skipped("fh2-fd-order", "fd-second-order-convergence", "residual at roundoff level"));
    }
    let order = (r1 / r2).log2();
    // At least second order; faster decay on small instances is harmless.
    Ok(CheckReport::at_least("fh2-fd-order", "fd-second-order-convergence", order, 2.0, 0.5)
        .with("residual_h", r1)
        .with("residual_h_half", r2)
        .with("h", h))
}

fn fh2_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let (seed, zn) = (config.seed, config.z_values);
    instances(config, &[2, 4, 8, 12], 25)
        .into_iter()
        .map(|(di, n, t)| {
            let unitary = t % 2 == 1;
            let kind = if unitary { "unitary" } else { "linear" };
            job(Suite::Fh2, format!("{kind} n={n} trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::Fh2, di, t));
                let a = gapped_hermitian(&mut r, n, 0.05);
                let b = random_hermitian(&mut r, n);
                let (family, tau) = if unitary {
                    let g = HermitianMatrix::symmetrize(b.matrix().scale_real(0.5));
                    (OperatorFamily::unitary_conjugation(a.clone(), g)?, uniform(&mut r, -0.5, 0.5))
                } else {
                    let b = HermitianMatrix::symmetrize(b.matrix().scale_real(0.3));
                    (OperatorFamily::linear(a.clone(), b)?, uniform(&mut r, 0.0, 1.0))
                };
                let snap = sumrules::snapshot(&family, tau)?;
                let mut checks = Vec::new();
                for j in 0..n {
                    checks.push(sumrules::second_derivative_identity(&snap, j)?);
                }
                let lam = snap.lambda().to_vec();
                for m in 1..n {
                    let subset: Vec<usize> = (0..m).collect();
                    for _ in 0..zn {
                        let z = uniform(&mut r, lam[0] - 1.0, lam[n - 1] + 1.0);
                        checks.extend(sumrules::fh2_quadratic(&snap, &subset, z)?);
                    }
                }
                checks.extend(fd_derivative_check(&family, tau, 1e-4)?);
                checks.extend(sumrules::gap_formula_check(&family, tau, 1e-4)?);
                if n > 1 {
                    checks.push(fd_order_check(&family, tau)?);
                }
                if unitary {
                    let g = HermitianMatrix::symmetrize(b.matrix().scale_real(0.5));
                    let m = 1 + t % n.max(1);
                    let subset: Vec<usize> = (0..m.min(n)).collect();
                    let z = uniform(&mut r, lam[0] - 1.0, lam[n - 1] + 1.0);
                    checks.extend(sumrules::unitary_reduction_check(&a, &g, &subset, z)?);
                }
                Ok(JobOutput::checks(worst_per_anchor(checks)))
            })
        })
        .collect()
}

fn squeeze_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let seed = config.seed;
    instances(config, &[2, 4, 6, 8], 25)
        .into_iter()
        .map(|(di, n, t)| {
            job(Suite::Squeeze, format!("n={n} trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::Squeeze, di, t));
                let a = gapped_hermitian(&mut r, n, 0.2);
                let b = HermitianMatrix::symmetrize(random_hermitian(&mut r, n).matrix().scale_real(0.1));
                let family = OperatorFamily::linear(a, b)?;
                let snap = sumrules::snapshot(&family, 0.0)?;
                let mut checks = Vec::new();
                for m in 1..n {
                    checks.extend(sumrules::squeeze_bounds(&snap, m)?);
                }
                Ok(JobOutput::checks(worst_per_anchor(checks)))
            })
        })
        .collect()
}

/// Levels `λ_j(τ) = z - w_j e^{-τ}`: with `η = 0`, `θ = 1` the bracket of
/// the Riesz derivative vanishes and the weighted mean is constant.
fn equality_levels(z: f64, w: &[f64], grid: &[f64]) -> TabulatedLevels {
    let levels = grid
        .iter()
        .map(|&t| {
            let mut lambda: Vec<f64> = w.iter().map(|&wj| z - wj * (-t).exp()).collect();
            lambda.sort_by(f64::total_cmp);
            let lambda_dot = lambda.iter().map(|l| z - l).collect();
            Levels { lambda, lambda_dot, complete_below: f64::INFINITY }
        })
        .collect();
    TabulatedLevels { grid: grid.to_vec(), levels }
}

fn riesz_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let seed = config.seed;
    let trials = config.trials.unwrap_or(5);
    let mut jobs: Vec<Job> = (0..trials)
        .map(|t| {
            job(Suite::RieszScan, format!("equality trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::RieszScan, 0, t));
                let z = uniform(&mut r, -2.0, 2.0);
                let w: Vec<f64> = (0..1 + t % 4).map(|_| uniform(&mut r, 0.1, 3.0)).collect();
                let grid = linspace(0.0, 1.0, 11);
                let src = equality_levels(z, &w, &grid);
                let coeffs = RieszCoefficients::new(Coefficient::Constant(0.0), Coefficient::Constant(1.0));
                let rep = riesz_monotonicity_scan(&src, &grid, &RieszScan::new(z, coeffs, Hypotheses::Direct))?;
                let q = &rep.series["quantity"];
                let spread = q.iter().map(|v| (v - q[0]).abs()).fold(0.0, f64::max);
                let mut checks = rep.checks;
                checks.push(CheckReport::identity("riesz-equality-constant", "riesz-equality-case", q[0] + spread, q[0], tol::tol(tol::EXACT_IDENTITY, q[0])));
                Ok(JobOutput::checks(checks))
            })
        })
        .collect();
    // Discretized Schrödinger operators -τΔ + V: η = 0, θ = 4τ, so A = τ^{-1/4}.
    let n = config.lt_n;
    for (name, grid) in [("square-well", config.lt_tau_well.clone()), ("capped-bump", config.lt_tau_bump.clone())] {
        for z_frac in [0.0, 0.1] {
            let grid = grid.clone();
            jobs.push(job(Suite::RieszScan, format!("{name} z={z_frac}V0"), move || {
                let spec = match name {
                    "square-well" => PotentialSpec::square_well(50.0, 1.0, n)?,
                    _ => PotentialSpec::capped_bump(n)?,
                };
                let depth = if name == "square-well" { 50.0 } else { 1.0 };
                let levels = grid.par_iter().map(|&t| liebthirring::levels_with_kinetic(&spec, t)).collect::<Result<Vec<_>>>()?;
                let src = TabulatedLevels { grid: grid.clone(), levels };
                let coeffs = RieszCoefficients::new(Coefficient::Constant(0.0), Coefficient::Linear(4.0));
                let rep = riesz_monotonicity_scan(&src, &grid, &RieszScan::new(-z_frac * depth, coeffs, Hypotheses::Direct))?;
                Ok(JobOutput::checks(rep.checks.into_iter().map(|c| c.with("potential", name)).collect()))
            }));
        }
    }
    // Bessel levels along ν with η = 4, θ = -2(ν²-¼)/ν.
    let bn = config.bessel_n;
    jobs.push(job(Suite::RieszScan, "bessel z=20".into(), move || {
        let grid = linspace(bessel::VALIDATED_MIN_NU, 3.0, 9);
        let src = bessel::BesselSource { levels: 10, n: bn };
        let w0 = grid[0] * grid[0] - 0.25;
        let coeffs = RieszCoefficients::new(Coefficient::Constant(4.0), Coefficient::Custom(Arc::new(|nu: f64| -2.0 * (nu * nu - 0.25) / nu)));
        let mut scan = RieszScan::new(20.0 * w0, coeffs, Hypotheses::Direct);
        scan.tol_base = tol::BESSEL;
        Ok(JobOutput::checks(riesz_monotonicity_scan(&src, &grid, &scan)?.checks))
    }));
    jobs.extend((0..trials).map(|t| {
        job(Suite::RieszScan, format!("cube-root n=6 trial={t}"), move || {
            let mut r = rng(seed, stream(Suite::RieszScan, 1, t));
            let a = random_hermitian(&mut r, 6);
            let b = random_hermitian(&mut r, 6);
            let c = random_positive_definite(&mut r, 6, 0.1);
            let neg = HermitianMatrix::symmetrize(c.matrix().scale_real(-0.5));
            let family = OperatorFamily::polynomial(vec![a, b, neg])?;
            let lam = eigendecompose(&family.hamiltonian(0.5)?)?.sorted_eigenvalues();
            let z = 0.5 * (lam[2] + lam[3]);
            let rep = sumrules::cuberoot_convexity_check(&family, &linspace(0.0, 1.0, 41), z)?;
            Ok(JobOutput::checks(rep.checks))
        })
    }));
    jobs
}

fn path_checks(rep: PathReport) -> Vec<CheckReport> {
    rep.checks
}

fn trace_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let seed = config.seed;
    let grid = tau_grid(config);
    instances(config, &[2, 4, 6, 8, 10], 20)
        .into_iter()
        .map(|(di, n, t)| {
            let grid = grid.clone();
            job(Suite::Trace, format!("n={n} trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::Trace, di, t));
                let (a, b) = (random_hermitian(&mut r, n), random_hermitian(&mut r, n));
                let (pa, pb) = (random_positive_definite(&mut r, n, 0.5), random_positive_definite(&mut r, n, 0.5));
                let family = OperatorFamily::linear(a.clone(), b.clone())?;
                let pos = OperatorFamily::linear(pa.clone(), pb.clone())?;
                let exp = ScalarFunction::exp();
                let cubic = ScalarFunction::polynomial(&[0.3, -1.0, 0.5, 0.2]);
                let quintic = ScalarFunction::polynomial(&[0.1, 0.2, -0.3, 0.1, 0.05, 0.02]);
                let mut checks = Vec::new();
                checks.extend(path_checks(traceineq::trace_path_suite(&family, &grid, &exp, TracePathPart::Convexity)?));
                checks.extend(path_checks(traceineq::trace_path_suite(&family, &grid, &exp, TracePathPart::OperatorBound)?));
                checks.extend(path_checks(traceineq::trace_path_suite(&family, &grid, &cubic, TracePathPart::OperatorBound)?));
                checks.extend(path_checks(traceineq::trace_path_suite(&family, &grid, &exp, TracePathPart::Improved)?));
                checks.extend(path_checks(traceineq::trace_path_suite(&family, &grid, &quintic, TracePathPart::Improved)?));
                checks.extend(traceineq::klein_suite(&a, &b, &exp, &grid)?);
                checks.extend(traceineq::klein_suite(&a, &b, &ScalarFunction::polynomial(&[0.0, 0.0, 1.0]), &grid)?);
                for (f, v, pd) in [
                    (ScalarFunction::exp(), TransformVariant::LogConvex, false),
                    (ScalarFunction::exp(), TransformVariant::Determinant, true),
                    (ScalarFunction::power(3.0), TransformVariant::PowerConvex { p: 3.0 }, true),
                    (ScalarFunction::power(0.5), TransformVariant::PowerConcave { p: 0.5 }, true),
                ] {
                    let (x, y) = if pd { (&pa, &pb) } else { (&a, &b) };
                    checks.extend(path_checks(traceineq::scalar_transform_suite(x, y, &f, v, &grid)?));
                }
                checks.extend(path_checks(traceineq::mean_transform_suite(&a, &b, &exp, MeanCase::IncreasingConvex, &grid)?));
                checks.extend(path_checks(traceineq::mean_transform_suite(&pa, &pb, &ScalarFunction::ln(), MeanCase::IncreasingConcave, &grid)?));
                checks.extend(path_checks(traceineq::bottom_spectrum_suite(
                    &pos,
                    &grid,
                    &ScalarFunction::power(-1.0),
                    n,
                    BottomPart::DecreasingConvex,
                )?));
                let low = grid
                    .iter()
                    .map(|&s| Ok(eigendecompose(&family.hamiltonian(s)?)?.eigenvalues[0]))
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                let m = 1 + t % n;
                checks.extend(path_checks(traceineq::bottom_spectrum_suite(
                    &family,
                    &grid,
                    &ScalarFunction::neg_shifted_square(low - 1.0),
                    m.min(n),
                    BottomPart::ConcaveGap,
                )?));
                Ok(JobOutput::checks(worst_per_anchor(checks)))
            })
        })
        .collect()
}

fn entropy_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let seed = config.seed;
    let grid = traceineq::default_grid();
    let mut jobs: Vec<Job> = instances(config, &[2, 3, 4, 6, 8], 10)
        .into_iter()
        .map(|(di, n, t)| {
            let grid = grid.clone();
            job(Suite::Entropy, format!("n={n} trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::Entropy, di, t));
                let (a, b) = (random_density(&mut r, n), random_density(&mut r, n));
                let rep = traceineq::entropy_suite(&a, &b, None, &grid)?;
                Ok(JobOutput::checks(rep.checks))
            })
        })
        .collect();
    jobs.push(job(Suite::Entropy, "lambert-w".into(), || {
        let branch = -(-1.0f64).exp();
        let mut worst = (0.0f64, 0.0);
        for i in 1..=400 {
            // Points crowd both ends of [-1/e, 0).
            let s = i as f64 / 401.0;
            let y = branch * (1.0 - s.powi(3)).max(1e-300);
            let w = traceineq::lambert_w_neg_branch(y)?;
            let rel = (w * w.exp() - y) / y;
            if rel.abs() > worst.0.abs() {
                worst = (rel, y);
            }
        }
        Ok(JobOutput::checks(vec![CheckReport::identity(
            "lambert-w-roundtrip",
            "lambert-w-roundtrip",
            worst.0,
            0.0,
            tol::absolute(1e-12),
        )
        .with("y", worst.1)]))
    }));
    jobs
}

fn matrix_sum_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let seed = config.seed;
    let grid = tau_grid(config);
    instances(config, &[2, 4, 6, 8, 10], 20)
        .into_iter()
        .map(|(di, n, t)| {
            let grid = grid.clone();
            job(Suite::MatrixSum, format!("n={n} trial={t}"), move || {
                let mut r = rng(seed, stream(Suite::MatrixSum, di, t));
                let (a, b) = (random_hermitian(&mut r, n), random_hermitian(&mut r, n));
                let tau = uniform(&mut r, 0.0, 1.0);
                let mut checks = Vec::new();
                for m in 1..=n {
                    checks.extend(traceineq::matrix_sum_bounds(&a, &b, tau, m)?);
                    checks.push(traceineq::theta_m_concavity(&a, &b, m, &grid)?);
                }
                Ok(JobOutput::checks(worst_per_anchor(checks)))
            })
        })
        .collect()
}

fn bessel_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let grid = config.nu_grid.clone();
    let (m, k, n) = (config.bessel_m, config.bessel_k, config.bessel_n);
    let mut jobs = Vec::new();
    {
        let grid = grid.clone();
        jobs.push(job(Suite::Bessel, "level-table".into(), move || {
            let rows = bessel::level_table(&grid, k, n)?;
            Ok(JobOutput { levels: rows.into_iter().flatten().collect(), ..Default::default() })
        }));
    }
    {
        let grid = grid.clone();
        jobs.push(job(Suite::Bessel, format!("concavity m={m}"), move || {
            Ok(JobOutput::checks(bessel::spacing_concavity_suite(&grid, m, n)?.checks))
        }));
    }
    jobs.push(job(Suite::Bessel, "riesz-partition".into(), move || {
        let cfg = PartitionSuite { n, ..PartitionSuite::default() };
        Ok(JobOutput::checks(bessel::riesz_partition_suite(&grid, &cfg)?.checks))
    }));
    for &nu in &config.moment_nu {
        jobs.push(job(Suite::Bessel, format!("rayleigh nu={nu}"), move || {
            Ok(JobOutput::checks(vec![bessel::inverse_moment_check(nu, 1, bessel::MIN_MOMENT_LEVELS, n)?.with("nu", nu)]))
        }));
    }
    for &nu in &config.hdot_nu {
        jobs.push(job(Suite::Bessel, format!("hdot nu={nu}"), move || {
            Ok(JobOutput::checks(bessel::hdot_square_check(nu, 1, n)?.into_iter().map(|c| c.with("nu", nu)).collect()))
        }));
    }
    jobs
}

fn lt_jobs(config: &ScenarioConfig) -> Vec<Job> {
    let n = config.lt_n;
    let cases: [(&str, Vec<f64>); 2] = [("square-well", config.lt_tau_well.clone()), ("capped-bump", config.lt_tau_bump.clone())];
    let mut jobs = Vec::new();
    for (name, grid) in cases {
        jobs.push(job(Suite::LiebThirring, name.to_string(), move || {
            let spec = match name {
                "square-well" => PotentialSpec::square_well(50.0, 1.0, n)?,
                _ => PotentialSpec::capped_bump(n)?,
            };
            let rep = liebthirring::lt_monotonicity_and_bound(&spec, &grid)?;
            let lt = liebthirring::lt_rows(&rep).into_iter().map(|row| (spec.name.clone(), row)).collect();
            let mut checks: Vec<CheckReport> = rep.checks;
            let tau = grid[grid.len() / 2];
            for j in 0..2 {
                match liebthirring::kinetic_derivative_check(&spec, tau, j) {
                    Ok(c) => checks.push(c.with("potential", &spec.name)),
                    Err(SpecError::InvalidArgument(msg)) => {
                        checks.push(CheckReport::skipped("lt-kinetic-derivative", "lt-feynman-hellmann-kinetic", &msg))
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(JobOutput { checks, lt, ..Default::default() })
        }));
    }
    jobs
}

/// Output format of [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(cfg_err("format", &format!("expected json, csv or text, got {s:?}"))),
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "txt",
        }
    }
}

pub fn to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| SpecError::Io(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| SpecError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| SpecError::Io(e.to_string()))
}

/// One row per check: `name,lhs,rhs,residual_or_margin,tol,pass`.
pub fn to_csv(report: &RunReport) -> Result<String> {
    csv_string(|w| {
        w.write_record(["name", "lhs", "rhs", "residual_or_margin", "tol", "pass"])?;
        for c in &report.checks {
            w.write_record([
                c.name.clone(),
                c.lhs.to_string(),
                c.rhs.to_string(),
                c.residual_or_margin.to_string(),
                c.tol.to_string(),
                c.pass.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn bessel_levels_csv(rows: &[LevelTableRow]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["nu", "k", "E_k", "Edot_k", "Eddot_k", "N", "extrapolated"])?;
        for r in rows {
            w.write_record([
                r.nu.to_string(),
                r.k.to_string(),
                r.energy.to_string(),
                r.energy_dot.to_string(),
                r.energy_ddot.to_string(),
                r.n.to_string(),
                r.extrapolated.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn lt_csv(rows: &[(String, LtRow)]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["potential", "tau", "sum_sq", "bound", "margin"])?;
        for (p, r) in rows {
            w.write_record([p.clone(), r.tau.to_string(), r.sum_sq.to_string(), r.bound.to_string(), r.margin.to_string()])?;
        }
        Ok(())
    })
}

/// Aligned summary table.
pub fn to_text(report: &RunReport) -> String {
    let status = |c: &CheckReport| {
        if c.skipped {
            "SKIP"
        } else if c.pass {
            "PASS"
        } else {
            "FAIL"
        }
    };
    let rows: Vec<[String; 6]> = report
        .checks
        .iter()
        .map(|c| {
            [
                status(c).to_string(),
                c.name.clone(),
                c.context.get("instance").cloned().unwrap_or_default(),
                format!("{:.3e}", c.residual_or_margin),
                format!("{:.1e}", c.tol),
                c.anchor.clone(),
            ]
        })
        .collect();
    let header = ["status", "check", "instance", "resid/margin", "tol", "anchor"].map(str::to_string);
    let mut width = header.clone().map(|h| h.len());
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = r.iter().zip(width).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    let s = report.summary;
    let _ = writeln!(
        out,
        "\nsuite {}  seed {}  total {}  pass {}  fail {}  skipped {}",
        report.suite, report.seed, s.total, s.pass, s.fail, s.skipped
    );
    out
}

pub fn render(report: &RunReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(report)?,
        Format::Text => to_text(report),
    })
}

/// Writes `report.<ext>` into `dir`, plus the Bessel level table and the
/// Lieb–Thirring rows as CSV when the run produced them.
pub fn emit_report(report: &RunReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SpecError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = vec![(dir.join(format!("report.{}", format.extension())), render(report, format)?)];
    if !report.bessel_levels.is_empty() {
        files.push((dir.join("bessel_levels.csv"), bessel_levels_csv(&report.bessel_levels)?));
    }
    if !report.lt_rows.is_empty() {
        files.push((dir.join("lieb_thirring.csv"), lt_csv(&report.lt_rows)?));
    }
    let mut written = Vec::new();
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| SpecError::Io(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
