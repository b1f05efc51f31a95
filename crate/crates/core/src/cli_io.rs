//! Scenario files, run reports and the subcommand runners behind the CLI.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytics::{
    equilibrium_bound, equilibrium_monte_carlo, limit_constants, partition_lln, PartitionExtension,
    PartitionSpec,
};
use crate::claims::ClaimLaw;
use crate::deviations::{rate_j, CumulantModel};
use crate::error::{Error, Result};
use crate::kernel::{KernelSequence, DEFAULT_TRUNCATION};
use crate::microstructure::{
    analytic_second_moments, epps_curve, signature_plot, simulate_prices, CovarianceTable,
};
use crate::ruin::{simulate_ruin_curve, Horizon, RiskModel};
use crate::simulate::{replicate, simulate_branching, RngStream};
use crate::stats::mean_se;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Truncation tolerance of the analytic series.
    #[serde(default = "default_series_tol")]
    pub series: f64,
    /// Expected residual point count allowed by generation truncation.
    #[serde(default = "default_simulation_tol")]
    pub simulation: f64,
    /// Grid step `Δ` of convolution-based quantities.
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Divergence cap of the cumulant recursion.
    #[serde(default = "default_divergence_cap")]
    pub divergence_cap: f64,
}

fn default_series_tol() -> f64 {
    1e-12
}
fn default_simulation_tol() -> f64 {
    1e-6
}
fn default_grid_step() -> f64 {
    crate::kernel::DEFAULT_GRID_STEP
}
fn default_divergence_cap() -> f64 {
    crate::deviations::DEFAULT_DIVERGENCE_CAP
}
fn default_replications() -> usize {
    100
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            series: default_series_tol(),
            simulation: default_simulation_tol(),
            grid_step: default_grid_step(),
            divergence_cap: default_divergence_cap(),
        }
    }
}

/// Claim law, premium rate `p` and initial reserve `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimsBlock {
    pub premium: f64,
    #[serde(default)]
    pub initial_reserve: f64,
    #[serde(flatten)]
    pub law: ClaimLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrostructureBlock {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_lag_step")]
    pub lag_step: f64,
    /// Half-width `L` of the lag grid; twice the longest kernel truncation
    /// length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taus: Vec<f64>,
}

fn default_n_max() -> usize {
    30
}
fn default_lag_step() -> f64 {
    0.005
}

impl Default for MicrostructureBlock {
    fn default() -> Self {
        MicrostructureBlock {
            n_max: default_n_max(),
            lag_step: default_lag_step(),
            max_lag: None,
            taus: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub horizon: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub process: KernelSequence,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claims: Option<ClaimsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub microstructure: Option<MicrostructureBlock>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("series", t.series),
            ("simulation", t.simulation),
            ("grid_step", t.grid_step),
            ("divergence_cap", t.divergence_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if let Some(c) = &self.claims {
            c.law.validate()?;
            if !(c.premium > 0.0) || !(c.initial_reserve >= 0.0) {
                return Err(Error::InvalidParameter(
                    "premium must be positive and the initial reserve nonnegative".into(),
                ));
            }
        }
        if let Some(p) = &self.partition {
            p.validate()?;
        }
        if let Some(m) = &self.microstructure {
            if !(m.lag_step > 0.0) || m.taus.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::InvalidParameter(
                    "microstructure lag step and sampling scales must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Non-fatal diagnostics, currently the net profit condition.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(c) = &self.claims {
            if let Ok(lc) = limit_constants(&self.process, self.tolerances.series) {
                let outflow = lc.m * c.law.mean();
                if c.premium <= outflow {
                    out.push(format!(
                        "net profit condition violated: p = {} ≤ m·E[C₁] = {outflow}; ruin analytics will refuse",
                        c.premium
                    ));
                }
            }
        }
        out
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParameter(format!("cannot serialize scenario: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            Error::Config {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_toml(&std::fs::read_to_string(path)?)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    write_atomic(path, scenario.to_toml()?.as_bytes())
}

/// Writes through a temporary file in the target directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Scalar result with its truncation or Monte Carlo error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub value: f64,
    pub error: f64,
}

impl Value {
    pub fn new(value: f64, error: f64) -> Self {
        Value { value, error }
    }

    pub fn exact(value: f64) -> Self {
        Value { value, error: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    pub streams: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub scenario: Scenario,
    pub results: BTreeMap<String, Value>,
    pub files: Vec<String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Moments,
    Ldp,
    MdpCheck,
    Equilibrium,
    Microstructure,
    Ruin,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Moments => "moments",
            Command::Ldp => "ldp",
            Command::MdpCheck => "mdp-check",
            Command::Equilibrium => "equilibrium",
            Command::Microstructure => "microstructure",
            Command::Ruin => "ruin",
        }
    }
}

/// Evenly spaced grid `name:a:b:n`, both ends included.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSpec {
    pub variable: String,
    pub points: Vec<f64>,
}

impl std::str::FromStr for CurveSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("curve must look like name:start:end:count, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [name, a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let a: f64 = a.parse().map_err(|_| bad())?;
        let b: f64 = b.parse().map_err(|_| bad())?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        let points = if n == 1 {
            vec![a]
        } else {
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        Ok(CurveSpec {
            variable: name.to_string(),
            points,
        })
    }
}

/// Comma-separated list of positive reals.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| *x > 0.0 && x.is_finite())
                .ok_or_else(|| Error::InvalidParameter(format!("bad grid value {v:?}")))
        })
        .collect()
}

/// Command-line overrides of the scenario.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub theta: Option<f64>,
    pub curve: Option<CurveSpec>,
    pub tau_grid: Option<Vec<f64>>,
    /// Time horizon `T`; for `ruin`, the finite-horizon parameter `z`.
    pub horizon: Option<f64>,
}

fn csv_row(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v:.9}");
    }
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs one subcommand, writing its CSV files and `report-<command>.json`
/// into the output directory.
pub fn run(command: Command, scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let started = Instant::now();
    let mut sc = scenario.clone();
    if let Some(s) = opts.seed {
        sc.seed = s;
    }
    if let Some(r) = opts.reps {
        sc.replications = r;
    }
    if let Some(t) = opts.tol {
        sc.tolerances.series = t;
        sc.tolerances.simulation = t;
    }
    if let (Some(h), false) = (opts.horizon, command == Command::Ruin) {
        sc.horizon = h;
    }
    sc.validate()?;
    let dir = opts
        .out
        .clone()
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Output { dir, files: Vec::new() };
    let mut results = BTreeMap::new();
    let streams = match command {
        Command::Simulate => run_simulate(&sc, &mut out, &mut results)?,
        Command::Moments => run_moments(&sc, &mut out, &mut results)?,
        Command::Ldp => run_ldp(&sc, opts, &mut out, &mut results)?,
        Command::MdpCheck => run_mdp(&sc, opts, &mut out, &mut results)?,
        Command::Equilibrium => run_equilibrium(&sc, opts, &mut out, &mut results)?,
        Command::Microstructure => run_microstructure(&sc, opts, &mut out, &mut results)?,
        Command::Ruin => run_ruin(&sc, opts, &mut out, &mut results)?,
    };
    let report = Report {
        command: command.name().to_string(),
        warnings: sc.warnings(),
        scenario: sc.clone(),
        results,
        files: out.files.clone(),
        provenance: Provenance {
            generator: "ChaCha8, one stream per replication".into(),
            seed: sc.seed,
            streams,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Numerical(format!("cannot serialize report: {e}")))?;
    write_atomic(&out.dir.join(format!("report-{}.json", command.name())), json.as_bytes())?;
    Ok(report)
}

type Results = BTreeMap<String, Value>;

fn run_simulate(sc: &Scenario, out: &mut Output, results: &mut Results) -> Result<usize> {
    let seq = &sc.process;
    let tol = sc.tolerances.simulation;
    let first = simulate_branching(seq, sc.horizon, RngStream::new(sc.seed, 0), tol)?;
    out.write("events.csv", &first.to_csv())?;
    let summaries = replicate(seq, sc.horizon, sc.seed, sc.replications, tol)?;
    let mut csv = String::from("replication,count,truncation_generation,truncation_bound\n");
    for (i, s) in summaries.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{:.9e}", s.count, s.truncation_generation, s.truncation_bound);
    }
    out.write("summary.csv", &csv)?;
    let rates: Vec<f64> = summaries.iter().map(|s| s.count as f64 / sc.horizon).collect();
    let est = mean_se(&rates);
    results.insert("rate_NT_over_T".into(), Value::new(est.value, est.error));
    let bound = summaries.iter().map(|s| s.truncation_bound).fold(0.0, f64::max);
    results.insert("truncation_bound".into(), Value::exact(bound));
    let lc = limit_constants(seq, sc.tolerances.series)?;
    results.insert("m".into(), Value::new(lc.m, lc.truncation_error_m));
    Ok(sc.replications)
}

fn run_moments(sc: &Scenario, out: &mut Output, results: &mut Results) -> Result<usize> {
    let lc = limit_constants(&sc.process, sc.tolerances.series)?;
    results.insert("m".into(), Value::new(lc.m, lc.truncation_error_m));
    results.insert("sigma2".into(), Value::new(lc.sigma2, lc.truncation_error_sigma2));
    results.insert("rho".into(), Value::exact(sc.process.rho()));
    let eta = sc.process.eta();
    results.insert("eta".into(), Value::exact(if eta.heavy_tail { f64::INFINITY } else { eta.value }));
    let mut csv = String::from("n,m_n\n");
    for (n, v) in lc.m_n.iter().enumerate() {
        let _ = writeln!(csv, "{n},{v:.9e}");
    }
    out.write("generations.csv", &csv)?;
    if let Some(part) = &sc.partition {
        let pl = partition_lln(&sc.process, part, sc.tolerances.series)?;
        for (i, r) in pl.rates.iter().enumerate() {
            results.insert(format!("partition_rate_{i}"), Value::new(*r, pl.truncation_error));
        }
    }
    Ok(0)
}

fn cumulant_model(sc: &Scenario) -> CumulantModel {
    CumulantModel::with_tolerances(sc.process.clone(), 1e-15, sc.tolerances.divergence_cap)
}

fn run_ldp(sc: &Scenario, opts: &RunOptions, out: &mut Output, results: &mut Results) -> Result<usize> {
    let model = cumulant_model(sc);
    let tc = model.theta_c();
    results.insert("theta_c".into(), Value::new(tc.value, tc.divergent - tc.value));
    results.insert("theta_c_capped".into(), Value::exact(if tc.capped { 1.0 } else { 0.0 }));
    if let Some(theta) = opts.theta {
        results.insert("gamma".into(), Value::new(model.gamma(theta), 1e-12));
        results.insert("f_limit".into(), Value::new(model.f_limit(theta), 1e-12));
    }
    let lc = limit_constants(&sc.process, sc.tolerances.series)?;
    let curve = match &opts.curve {
        Some(c) => c.clone(),
        None => format!("x:0:{}:31", 3.0 * lc.m).parse()?,
    };
    if curve.variable == "theta" {
        let mut csv = String::from("theta,gamma,finite\n");
        for &t in &curve.points {
            let g = model.gamma(t);
            let _ = writeln!(csv, "{t:.9},{g:.9},{}", u8::from(g.is_finite()));
        }
        out.write("cumulant.csv", &csv)?;
    } else {
        let mut csv = String::from("x,rate\n");
        for &x in &curve.points {
            csv.push_str(&csv_row(&[x, model.rate_i(x)]));
        }
        out.write("rate.csv", &csv)?;
    }
    Ok(0)
}

fn run_mdp(sc: &Scenario, opts: &RunOptions, out: &mut Output, results: &mut Results) -> Result<usize> {
    let lc = limit_constants(&sc.process, sc.tolerances.series)?;
    let t = sc.horizon;
    let scale = t.powf(0.75);
    let xs = match &opts.curve {
        Some(c) => c.points.clone(),
        None => vec![0.5, 1.0],
    };
    let summaries = replicate(&sc.process, t, sc.seed, sc.replications, sc.tolerances.simulation)?;
    let z: Vec<f64> = summaries.iter().map(|s| (s.count as f64 - lc.m * t) / scale).collect();
    let mut csv = String::from("x,J,empirical,frequency,se\n");
    for &x in &xs {
        let n = z.len() as f64;
        let freq = z.iter().filter(|v| **v > x).count() as f64 / n;
        let se = (freq * (1.0 - freq) / n).sqrt();
        let emp = if freq > 0.0 { -(t / (scale * scale)) * freq.ln() } else { f64::NAN };
        let j = rate_j(&lc, x);
        csv.push_str(&csv_row(&[x, j, emp, freq, se]));
        results.insert(format!("J({x})"), Value::new(j, lc.truncation_error_sigma2));
        // delta method on −(T/a²) log f
        results.insert(
            format!("empirical_rate({x})"),
            Value::new(emp, if freq > 0.0 { t / (scale * scale) * se / freq } else { f64::NAN }),
        );
    }
    out.write("mdp.csv", &csv)?;
    results.insert("sigma2".into(), Value::new(lc.sigma2, lc.truncation_error_sigma2));
    Ok(sc.replications)
}

fn run_equilibrium(sc: &Scenario, opts: &RunOptions, out: &mut Output, results: &mut Results) -> Result<usize> {
    let seq = &sc.process;
    let ss = match &opts.curve {
        Some(c) => c.points.clone(),
        None => vec![2.0, 5.0, 10.0],
    };
    let warmup = 10.0 * seq.max_truncation_length(DEFAULT_TRUNCATION);
    let mut csv = String::from("s,bound,truncation_error,mc_frequency,mc_se\n");
    let mut cap = None;
    for (k, &s) in ss.iter().enumerate() {
        let b = equilibrium_bound(seq, s, sc.horizon, sc.tolerances.grid_step, sc.tolerances.series)?;
        let (freq, _) = equilibrium_monte_carlo(
            seq,
            s,
            sc.horizon,
            warmup,
            sc.seed.wrapping_add(k as u64),
            sc.replications,
            sc.tolerances.simulation,
        )?;
        let se = (freq * (1.0 - freq) / sc.replications as f64).sqrt();
        csv.push_str(&csv_row(&[s, b.value, b.truncation_error, freq, se]));
        results.insert(format!("bound(s={s})"), Value::new(b.value, b.truncation_error));
        results.insert(format!("frequency(s={s})"), Value::new(freq, se));
        cap = b.strong_cap;
    }
    if let Some(c) = cap {
        results.insert("strong_cap".into(), Value::new(c, sc.tolerances.series));
    }
    out.write("equilibrium.csv", &csv)?;
    Ok(sc.replications * ss.len())
}

fn default_taus() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0]
}

fn run_microstructure(sc: &Scenario, opts: &RunOptions, out: &mut Output, results: &mut Results) -> Result<usize> {
    let seq = &sc.process;
    let block = sc.microstructure.clone().unwrap_or_default();
    let part = sc.partition.clone().unwrap_or(PartitionSpec {
        classes: 4,
        explicit: vec![],
        extension: PartitionExtension::Cyclic(vec![0, 2]),
    });
    let max_lag = block
        .max_lag
        .unwrap_or_else(|| (2.0 * seq.max_truncation_length(DEFAULT_TRUNCATION)).max(1.0));
    let table = CovarianceTable::new(seq, block.n_max, block.lag_step, max_lag)?;
    let taus = match (&opts.tau_grid, block.taus.is_empty()) {
        (Some(t), _) => t.clone(),
        (None, false) => block.taus.clone(),
        (None, true) => default_taus()
            .into_iter()
            .filter(|t| *t <= 0.5 * table.max_lag() && *t <= sc.horizon)
            .collect(),
    };
    let moments = taus
        .iter()
        .map(|&t| analytic_second_moments(&table, &part, t))
        .collect::<Result<Vec<_>>>()?;
    let paths = simulate_prices(seq, &part, sc.horizon, sc.replications, sc.seed, sc.tolerances.simulation)?;
    let x1: Vec<_> = paths.iter().map(|p| p.0.clone()).collect();
    let sig = signature_plot(&x1, &taus)?;
    let mut csv = String::from("tau,empirical,se,analytic\n");
    for (p, m) in sig.iter().zip(&moments) {
        csv.push_str(&csv_row(&[p.tau, opt(p.value), p.se, m.signature()]));
        results.insert(format!("C({})", p.tau), Value::new(m.signature(), m.truncation_error / p.tau));
    }
    out.write("signature.csv", &csv)?;
    if part.classes == 4 {
        let pairs: Vec<_> = paths.into_iter().map(|(a, b)| (a, b.expect("four-class partition"))).collect();
        let epps = epps_curve(&pairs, &taus)?;
        let mut csv = String::from("tau,empirical,se,analytic\n");
        for (p, m) in epps.iter().zip(&moments) {
            csv.push_str(&csv_row(&[p.tau, opt(p.value), p.se, opt(m.correlation())]));
            if let Some(r) = m.correlation() {
                results.insert(format!("rho({})", p.tau), Value::new(r, m.truncation_error / m.x1.min(m.x2)));
            }
        }
        out.write("epps.csv", &csv)?;
    }
    out.write("covariance.csv", &table.to_csv(((0.05 / block.lag_step).round() as usize).max(1)))?;
    results.insert("table_truncation_bound".into(), Value::exact(table.truncation_bound()));
    results.insert("warmup".into(), Value::exact(crate::microstructure::stationary_warmup(seq)));
    Ok(sc.replications)
}

fn run_ruin(sc: &Scenario, opts: &RunOptions, out: &mut Output, results: &mut Results) -> Result<usize> {
    let claims = sc
        .claims
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("the ruin command needs a [claims] block".into()))?;
    let model = RiskModel::new(claims.initial_reserve, claims.premium, claims.law.clone(), sc.process.clone())?;
    let horizon = opts.horizon.map_or(Horizon::Infinite, Horizon::Finite);
    let margins = model.margins();
    results.insert("net_profit_margin".into(), Value::exact(margins.net_profit));
    if let Some(l) = margins.light_tail {
        results.insert("light_tail_margin".into(), Value::new(l, 1e-10));
    }
    let asymptote: Box<dyn Fn(f64) -> f64> = if claims.law.is_light_tailed() {
        let theta = model.lundberg_exponent()?;
        results.insert("theta_dagger".into(), Value::new(theta, 1e-10));
        let rate = match horizon {
            Horizon::Infinite => theta,
            Horizon::Finite(z) => {
                let w = model.finite_horizon_rate(z)?;
                results.insert("w(z)".into(), Value::new(w, 1e-8));
                w
            }
        };
        Box::new(move |u: f64| (-rate * u).exp())
    } else {
        let asym = model.heavy_tail_asymptote(horizon)?;
        results.insert("asymptotic_constant".into(), Value::exact(asym.constant));
        Box::new(move |u: f64| asym.eval(u))
    };
    let reserves = match &opts.curve {
        Some(c) => c.points.clone(),
        None => vec![claims.initial_reserve],
    };
    let est = simulate_ruin_curve(&model, &reserves, horizon, sc.replications, sc.seed, sc.tolerances.simulation)?;
    let mut csv = String::from("u,psi,se,psi_asym\n");
    for e in &est {
        csv.push_str(&csv_row(&[e.u, e.psi, e.se, asymptote(e.u)]));
        results.insert(format!("psi({})", e.u), Value::new(e.psi, e.se));
        if let Some(t) = e.tail_bound {
            results.insert(format!("tail_bound({})", e.u), Value::exact(t));
        }
    }
    out.write("ruin.csv", &csv)?;
    Ok(sc.replications)
}
