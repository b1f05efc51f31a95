//! Signature plot and Epps effect for prices built from partitioned
//! generation counts.
//!
//! Second moments come from the pair densities
//! `ρ(i,j,t−s) = E[Nⁱ(dt)Nʲ(ds)]/(dt ds)`. Tables store the covariance part
//! `κ(i,j,·) = ρ(i,j,·) − λ_iλ_j`, which is integrable, where
//! `λ_i = γ̄₀ ∏_{k≤i} ‖γ_k‖` is the stationary intensity of generation `i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::PartitionSpec;
use crate::error::{Error, Result};
use crate::kernel::{discrete_convolve, KernelSequence, DEFAULT_TRUNCATION};
use crate::simulate::{simulate_stationary, EventLog, RngStream};
use crate::stats::{jackknife, mean_se};

/// Function of the lag on the symmetric grid `{−nΔ, …, nΔ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagFunction {
    step: f64,
    half: usize,
    values: Vec<f64>,
}

impl LagFunction {
    fn zeros(step: f64, half: usize) -> Self {
        LagFunction {
            step,
            half,
            values: vec![0.0; 2 * half + 1],
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn max_lag(&self) -> f64 {
        self.half as f64 * self.step
    }

    /// Node values, lag `(k − n)Δ` at index `k`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| (k as f64 - self.half as f64) * self.step)
    }

    /// Linear interpolation; zero beyond the grid.
    pub fn eval(&self, lag: f64) -> f64 {
        let x = lag / self.step + self.half as f64;
        if x < 0.0 || x > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let k = (x.floor() as usize).min(self.values.len() - 2);
        let w = x - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    /// `f(−x)`.
    pub fn reversed(&self) -> LagFunction {
        let mut values = self.values.clone();
        values.reverse();
        LagFunction {
            step: self.step,
            half: self.half,
            values,
        }
    }

    pub fn integral(&self) -> f64 {
        crate::kernel::trapezoid(&self.values, self.step)
    }

    /// `∫_{−τ}^{τ} (τ − |x|) f(x) dx = ∫₀^τ∫₀^τ f(s − u) ds du`.
    pub fn triangle_integral(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let h = self.step;
        let lo = ((self.half as f64 - tau / h).floor().max(0.0)) as usize;
        let hi = ((self.half as f64 + tau / h).ceil() as usize).min(self.values.len() - 1);
        let weighted = |x: f64| (tau - x.abs()) * self.eval(x);
        let mut total = 0.0;
        for k in lo..hi {
            let a = ((k as f64 - self.half as f64) * h).max(-tau);
            let b = ((k as f64 + 1.0 - self.half as f64) * h).min(tau);
            if b > a {
                total += 0.5 * (b - a) * (weighted(a) + weighted(b));
            }
        }
        total
    }

    /// `x ↦ ∫₀^∞ g(b) f(x + b) db` for a kernel sampled on `{0, Δ, …}`.
    fn correlate(&self, kernel: &[f64]) -> LagFunction {
        let k = kernel.len() - 1;
        let mut reversed: Vec<f64> = kernel.iter().rev().copied().collect();
        reversed[0] *= 0.5;
        reversed[k] *= 0.5;
        let conv = discrete_convolve(&self.values, &reversed);
        LagFunction {
            step: self.step,
            half: self.half,
            values: conv[k..k + self.values.len()].iter().map(|v| v * self.step).collect(),
        }
    }

    /// `x ↦ ∫ a(y) f(x − y) dy` for an even function sampled on `{−KΔ, …, KΔ}`.
    fn convolve_even(&self, even: &[f64]) -> LagFunction {
        let k = (even.len() - 1) / 2;
        let mut weighted = even.to_vec();
        weighted[0] *= 0.5;
        weighted[2 * k] *= 0.5;
        let conv = discrete_convolve(&self.values, &weighted);
        LagFunction {
            step: self.step,
            half: self.half,
            values: conv[k..k + self.values.len()].iter().map(|v| v * self.step).collect(),
        }
    }
}

/// Kernel samples and their autocorrelation `A(y) = ∫₀^∞ γ(a)γ(a + |y|) da`.
struct Tabulation {
    samples: Vec<f64>,
    autocorrelation: Vec<f64>,
}

impl Tabulation {
    fn new(samples: Vec<f64>, step: f64) -> Self {
        let k = samples.len() - 1;
        let reversed: Vec<f64> = samples.iter().rev().copied().collect();
        let conv = discrete_convolve(&samples, &reversed);
        let mut autocorrelation = vec![0.0; 2 * k + 1];
        for lag in 0..=k {
            let raw = conv[k - lag];
            let ends = if lag == k {
                samples[0] * samples[k]
            } else {
                0.5 * (samples[0] * samples[lag] + samples[k - lag] * samples[k])
            };
            let v = step * (raw - ends);
            autocorrelation[k + lag] = v;
            autocorrelation[k - lag] = v;
        }
        Tabulation {
            samples,
            autocorrelation,
        }
    }
}

/// Covariance densities `κ(i,j,·)` for `0 ≤ i ≤ j ≤ n_max` on `(−L, L)`.
#[derive(Clone, Debug)]
pub struct CovarianceTable {
    step: f64,
    n_max: usize,
    intensities: Vec<f64>,
    entries: Vec<LagFunction>,
    mean_rate: f64,
    rho: f64,
    null_beyond: Option<usize>,
}

impl CovarianceTable {
    /// Runs the same-generation, cross-generation and adjacent-generation
    /// recursions on a grid of step `Δ` and half-width `L`.
    pub fn new(seq: &KernelSequence, n_max: usize, step: f64, max_lag: f64) -> Result<Self> {
        if !seq.baseline().is_constant() {
            return Err(Error::ConstantBaselineRequired);
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
        }
        let longest = seq.max_truncation_length(DEFAULT_TRUNCATION);
        if !(max_lag >= 2.0 * longest) {
            return Err(Error::InvalidParameter(format!(
                "maximum lag L = {max_lag} is shorter than twice the longest kernel truncation length {longest}"
            )));
        }
        let half = (max_lag / step).ceil() as usize;
        let points = (2 * half + 1) * (n_max + 1) * (n_max + 2) / 2;
        if points > crate::analytics::MAX_GRID_POINTS * 4 {
            return Err(Error::GridBudget {
                points,
                cap: crate::analytics::MAX_GRID_POINTS * 4,
            });
        }
        let null_beyond = (0..=n_max).find(|n| seq.is_null_beyond(*n));
        let n_max = null_beyond.map_or(n_max, |k| n_max.min(k));

        let tabulations: Vec<Tabulation> = seq
            .explicit()
            .iter()
            .map(|k| {
                let len = k.truncation_length(DEFAULT_TRUNCATION);
                let n = ((len / step).ceil() as usize).max(1);
                Tabulation::new(k.tabulate(step, n as f64 * step).values, step)
            })
            .collect();
        let tab = |n: usize| seq.index_of(n).map(|i| &tabulations[i]);

        let mut intensities = vec![seq.mean_rate()];
        for n in 1..=n_max {
            intensities.push(intensities[n - 1] * seq.norm_at(n));
        }

        let zero = LagFunction::zeros(step, half);
        let mut entries = Vec::with_capacity((n_max + 1) * (n_max + 2) / 2);
        let mut diagonal = zero.clone();
        for i in 0..=n_max {
            if i > 0 {
                diagonal = match tab(i) {
                    Some(t) => {
                        let mut next = diagonal.convolve_even(&t.autocorrelation);
                        let k = (t.autocorrelation.len() - 1) / 2;
                        for (d, v) in next.values.iter_mut().enumerate() {
                            let y = d as isize - half as isize + k as isize;
                            if y >= 0 && (y as usize) < t.autocorrelation.len() {
                                *v += intensities[i - 1] * t.autocorrelation[y as usize];
                            }
                        }
                        next
                    }
                    None => zero.clone(),
                };
            }
            entries.push(diagonal.clone());
            let mut prev = diagonal.clone();
            for j in i + 1..=n_max {
                let next = match tab(j) {
                    Some(t) => {
                        let mut next = prev.correlate(&t.samples);
                        if j == i + 1 {
                            // a generation-i point at t parents generation i+1 at s > t
                            for (b, g) in t.samples.iter().enumerate() {
                                if b > half {
                                    break;
                                }
                                let w = if b == 0 { 0.5 } else { 1.0 };
                                next.values[half - b] += w * intensities[i] * g;
                            }
                        }
                        next
                    }
                    None => zero.clone(),
                };
                entries.push(next.clone());
                prev = next;
            }
        }
        Ok(CovarianceTable {
            step,
            n_max,
            intensities,
            entries,
            mean_rate: seq.mean_rate(),
            rho: seq.rho(),
            null_beyond,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn max_lag(&self) -> f64 {
        self.entries[0].max_lag()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `λ_i`, the stationary intensity of generation `i`; zero beyond `n_max`.
    pub fn intensity(&self, i: usize) -> f64 {
        self.intensities.get(i).copied().unwrap_or(0.0)
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i * (self.n_max + 1) - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// `κ(i,j,·)` for `i ≤ j ≤ n_max`.
    pub fn entry(&self, i: usize, j: usize) -> Option<&LagFunction> {
        (i <= j && j <= self.n_max).then(|| &self.entries[self.index(i, j)])
    }

    /// `κ(i,j,lag)` in either order, using `κ(j,i,x) = κ(i,j,−x)`.
    pub fn covariance(&self, i: usize, j: usize, lag: f64) -> f64 {
        if i <= j {
            self.entry(i, j).map_or(0.0, |f| f.eval(lag))
        } else {
            self.entry(j, i).map_or(0.0, |f| f.eval(-lag))
        }
    }

    /// Raw pair density `ρ(i,j,lag) = κ(i,j,lag) + λ_iλ_j`, `lag ≠ 0`.
    pub fn rho(&self, i: usize, j: usize, lag: f64) -> f64 {
        self.covariance(i, j, lag) + self.intensity(i) * self.intensity(j)
    }

    /// `∫₀^τ∫₀^τ κ(i,j,s−u) ds du`, symmetric in `(i, j)`.
    pub fn pair_integral(&self, i: usize, j: usize, tau: f64) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.entry(a, b).map_or(0.0, |f| f.triangle_integral(tau))
    }

    /// Weight `γ̄₀²(n_max+2)ρ^{n_max}/(1−ρ)²` of the discarded generation pairs.
    pub fn truncation_bound(&self) -> f64 {
        if self.null_beyond.is_some_and(|k| k <= self.n_max) || self.rho == 0.0 {
            return 0.0;
        }
        let r = self.rho;
        self.mean_rate.powi(2) * (self.n_max as f64 + 2.0) * r.powi(self.n_max as i32)
            / (1.0 - r).powi(2)
    }

    /// Bound on the contribution of discarded pairs to any second moment at
    /// scale `τ`.
    pub fn moment_truncation_error(&self, tau: f64) -> f64 {
        if self.null_beyond.is_some_and(|k| k <= self.n_max) || self.rho == 0.0 {
            return 0.0;
        }
        let (r, g, n) = (self.rho, self.mean_rate, self.n_max as f64);
        let s0 = r.powf(n + 1.0) / (1.0 - r);
        let s1 = r.powf(n + 1.0) * ((n + 1.0) - n * r) / (1.0 - r).powi(2);
        let covariance = g * tau * (2.0 * s1 + s0) / (1.0 - r) + g * tau * s0;
        let kept = (1.0 - r.powf(n + 1.0)) / (1.0 - r);
        let means = g * g * tau * tau * ((1.0 - r).powi(-2) - kept * kept);
        covariance + means
    }

    /// `i,j,lag,value` rows for every `stride`-th lag.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("i,j,lag,value\n");
        for i in 0..=self.n_max {
            for j in i..=self.n_max {
                let f = &self.entries[self.index(i, j)];
                for (k, (lag, v)) in f.lags().zip(&f.values).enumerate() {
                    if k % stride == 0 {
                        out.push_str(&format!("{i},{j},{lag:.9},{v:.9}\n"));
                    }
                }
            }
        }
        out
    }
}

/// `E[(X¹_τ)²]`, `E[(X²_τ)²]`, `E[X¹_τX²_τ]` for the stationary process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub tau: f64,
    pub x1: f64,
    pub x2: f64,
    pub x12: f64,
    pub truncation_error: f64,
}

impl SecondMoments {
    /// `C(τ) = E[(X¹_τ)²]/τ`.
    pub fn signature(&self) -> f64 {
        self.x1 / self.tau
    }

    /// `ρ(τ)`; `None` when a variance vanishes.
    pub fn correlation(&self) -> Option<f64> {
        let d = (self.x1 * self.x2).sqrt();
        (d > 0.0).then(|| self.x12 / d)
    }
}

/// Signs of a generation in the two prices: `X¹ = N_{A₁} − N_{A₂}` and,
/// for four classes, `X² = N_{A₃} − N_{A₄}`.
fn signs(part: &PartitionSpec, generation: usize) -> (f64, f64) {
    match part.class_of(generation) {
        0 => (1.0, 0.0),
        1 => (-1.0, 0.0),
        2 => (0.0, 1.0),
        _ => (0.0, -1.0),
    }
}

fn check_price_partition(part: &PartitionSpec) -> Result<()> {
    part.validate()?;
    if part.classes != 2 && part.classes != 4 {
        return Err(Error::InvalidParameter(format!(
            "price partitions need 2 or 4 classes, got {}",
            part.classes
        )));
    }
    Ok(())
}

pub fn analytic_second_moments(table: &CovarianceTable, part: &PartitionSpec, tau: f64) -> Result<SecondMoments> {
    check_price_partition(part)?;
    if !(tau >= 0.0 && tau <= 0.5 * table.max_lag()) {
        return Err(Error::InvalidParameter(format!(
            "τ = {tau} must lie in [0, L/2] = [0, {}]",
            0.5 * table.max_lag()
        )));
    }
    let n = table.n_max();
    let s: Vec<(f64, f64)> = (0..=n).map(|g| signs(part, g)).collect();
    let (mut x1, mut x2, mut x12) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let li = table.intensity(i);
        x1 += s[i].0 * s[i].0 * li * tau;
        x2 += s[i].1 * s[i].1 * li * tau;
        for j in i..=n {
            let w11 = s[i].0 * s[j].0;
            let w22 = s[i].1 * s[j].1;
            let w12 = s[i].0 * s[j].1 + s[j].0 * s[i].1;
            if w11 == 0.0 && w22 == 0.0 && w12 == 0.0 {
                continue;
            }
            let mult = if i == j { 1.0 } else { 2.0 };
            let m = table.pair_integral(i, j, tau) + li * table.intensity(j) * tau * tau;
            x1 += mult * w11 * m;
            x2 += mult * w22 * m;
            // ordered pairs (i,j) and (j,i) each enter once
            x12 += if i == j { w12 * 0.5 } else { w12 } * m;
        }
    }
    Ok(SecondMoments {
        tau,
        x1,
        x2,
        x12,
        truncation_error: table.moment_truncation_error(tau),
    })
}

/// Piecewise-constant price with unit jumps, `X₀ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PricePath {
    horizon: f64,
    jumps: Vec<(f64, i8)>,
}

impl PricePath {
    pub fn from_log<F: Fn(usize) -> i8>(log: &EventLog, sign: F) -> Self {
        let jumps = log
            .events
            .iter()
            .filter_map(|e| {
                let s = sign(e.generation as usize);
                (s != 0).then_some((e.time, s))
            })
            .collect();
        PricePath {
            horizon: log.horizon,
            jumps,
        }
    }

    /// Component `0` (`X¹`) or `1` (`X²`, four classes only) of a partition.
    pub fn component(log: &EventLog, part: &PartitionSpec, component: usize) -> Result<Self> {
        check_price_partition(part)?;
        if component > 1 || (component == 1 && part.classes == 2) {
            return Err(Error::InvalidParameter(format!(
                "component {component} does not exist for a {}-class partition",
                part.classes
            )));
        }
        Ok(Self::from_log(log, |g| {
            let (a, b) = signs(part, g);
            (if component == 0 { a } else { b }) as i8
        }))
    }

    /// `N(plus) − N(minus)` over two logs on the same horizon.
    pub fn difference(plus: &EventLog, minus: &EventLog) -> Self {
        let mut jumps: Vec<(f64, i8)> = plus
            .events
            .iter()
            .map(|e| (e.time, 1))
            .chain(minus.events.iter().map(|e| (e.time, -1)))
            .collect();
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        PricePath {
            horizon: plus.horizon.min(minus.horizon),
            jumps,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> &[(f64, i8)] {
        &self.jumps
    }

    pub fn value_at(&self, t: f64) -> i64 {
        self.jumps.iter().take_while(|j| j.0 <= t).map(|j| j.1 as i64).sum()
    }

    /// `X_{(k+1)τ} − X_{kτ}` for the `⌊T/τ⌋` complete increments.
    pub fn increments(&self, tau: f64) -> Vec<f64> {
        let n = (self.horizon / tau + 1e-9).floor() as usize;
        let mut out = vec![0.0; n];
        for &(t, s) in &self.jumps {
            let k = (t / tau).ceil() as usize;
            // a jump at exactly kτ belongs to the increment ending there
            if k >= 1 && k <= n {
                out[k - 1] += s as f64;
            }
        }
        out
    }

    /// `(1/(nτ)) Σ_k (ΔX_k)²` with `n = ⌊T/τ⌋`.
    pub fn realized_variance(&self, tau: f64) -> f64 {
        let inc = self.increments(tau);
        inc.iter().map(|x| x * x).sum::<f64>() / (inc.len() as f64 * tau)
    }
}

fn realized_covariance(a: &PricePath, b: &PricePath, tau: f64) -> f64 {
    let (x, y) = (a.increments(tau), b.increments(tau));
    let n = x.len().min(y.len());
    x.iter().zip(&y).map(|(u, v)| u * v).sum::<f64>() / (n as f64 * tau)
}

/// Curve value at one sampling scale; `value` is `None` where undefined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub value: Option<f64>,
    pub se: f64,
}

fn check_scales(paths_horizon: f64, taus: &[f64]) -> Result<()> {
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t <= paths_horizon)) {
        return Err(Error::InvalidParameter(format!(
            "sampling scale τ = {t} must lie in (0, T] with T = {paths_horizon}"
        )));
    }
    Ok(())
}

/// `Ĉ(τ)` averaged over paths with its standard error.
pub fn signature_plot(paths: &[PricePath], taus: &[f64]) -> Result<Vec<CurvePoint>> {
    let horizon = paths.iter().map(|p| p.horizon).fold(f64::INFINITY, f64::min);
    if paths.is_empty() {
        return Err(Error::InvalidParameter("no price paths".into()));
    }
    check_scales(horizon, taus)?;
    Ok(taus
        .iter()
        .map(|&tau| {
            let per_path: Vec<f64> = paths.par_iter().map(|p| p.realized_variance(tau)).collect();
            let est = mean_se(&per_path);
            CurvePoint {
                tau,
                value: Some(est.value),
                se: est.error,
            }
        })
        .collect())
}

/// `ρ̂(τ) = Ĉ₁₂/√(Ĉ₁Ĉ₂)` pooled over paths, jackknife standard error.
pub fn epps_curve(pairs: &[(PricePath, PricePath)], taus: &[f64]) -> Result<Vec<CurvePoint>> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no price paths".into()));
    }
    let horizon = pairs
        .iter()
        .map(|(a, b)| a.horizon.min(b.horizon))
        .fold(f64::INFINITY, f64::min);
    check_scales(horizon, taus)?;
    Ok(taus
        .iter()
        .map(|&tau| {
            let stats: Vec<[f64; 3]> = pairs
                .par_iter()
                .map(|(a, b)| [a.realized_variance(tau), b.realized_variance(tau), realized_covariance(a, b, tau)])
                .collect();
            let ratio = |idx: &[usize]| -> Option<f64> {
                let mut s = [0.0; 3];
                for &i in idx {
                    for (acc, v) in s.iter_mut().zip(&stats[i]) {
                        *acc += v;
                    }
                }
                let d = (s[0] * s[1]).sqrt();
                (d > 0.0).then(|| s[2] / d)
            };
            let all: Vec<usize> = (0..stats.len()).collect();
            match ratio(&all) {
                Some(v) if stats.len() > 1 => CurvePoint {
                    tau,
                    value: Some(v),
                    se: jackknife(stats.len(), |idx| ratio(idx).unwrap_or(v)),
                },
                value => CurvePoint { tau, value, se: f64::NAN },
            }
        })
        .collect())
}

/// Warm-up span `B`: ten times the longest kernel truncation length.
pub fn stationary_warmup(seq: &KernelSequence) -> f64 {
    10.0 * seq.max_truncation_length(DEFAULT_TRUNCATION)
}

/// Stationary paths of `X¹` (and `X²` for four classes) from one process.
pub fn simulate_prices(
    seq: &KernelSequence,
    part: &PartitionSpec,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<(PricePath, Option<PricePath>)>> {
    check_price_partition(part)?;
    let warmup = stationary_warmup(seq);
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let log = simulate_stationary(seq, horizon, warmup, RngStream::new(seed, i), tol)?;
            let x1 = PricePath::component(&log, part, 0)?;
            let x2 = (part.classes == 4).then(|| PricePath::component(&log, part, 1)).transpose()?;
            Ok((x1, x2))
        })
        .collect()
}

/// Pairs `X¹ = N(a) − N(b)`, `X² = N(c) − N(d)` from four independent
/// stationary processes with the same law; both prices are centred and
/// independent, so `ρ(τ) = 0`.
pub fn simulate_independent_prices(
    seq: &KernelSequence,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<(PricePath, PricePath)>> {
    let warmup = stationary_warmup(seq);
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let logs = (0..4)
                .map(|k| simulate_stationary(seq, horizon, warmup, RngStream::new(seed, 4 * i + k), tol))
                .collect::<Result<Vec<_>>>()?;
            Ok((
                PricePath::difference(&logs[0], &logs[1]),
                PricePath::difference(&logs[2], &logs[3]),
            ))
        })
        .collect()
}
