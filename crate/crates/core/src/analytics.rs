//! Limit constants of the law of large numbers and central limit theorem,
//! the partition bridge to multivariate Hawkes processes, and the
//! convergence-to-equilibrium bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{GridFunction, KernelSequence, DEFAULT_TRUNCATION};

/// Default absolute tolerance for truncated series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;

/// Largest grid handled by the convolution-series routines.
pub const MAX_GRID_POINTS: usize = 1 << 24;

const MAX_SERIES_TERMS: usize = 10_000_000;

/// `m_n`, `m = Σ m_n` and `σ²`, with certified truncation errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub m_n: Vec<f64>,
    pub m: f64,
    pub sigma2: f64,
    pub truncation_error_m: f64,
    pub truncation_error_sigma2: f64,
}

/// `R_j = 1 + Σ_{p≥1} ∏_{i=j+1}^{j+p} ‖γ_i‖` for `j = 0..=last`.
///
/// On the periodic tail the sum is a geometric series in the cycle product
/// and is evaluated exactly; the head follows from `R_j = 1 + ‖γ_{j+1}‖R_{j+1}`.
pub fn offspring_factors(seq: &KernelSequence, last: usize) -> Vec<f64> {
    let layout = seq.layout();
    let (h, k) = (layout.head, layout.period);
    let cycle: f64 = (1..=k).map(|r| seq.norm_at(h + r)).product();
    // R at the start of each tail phase h + r, r = 0..k
    let tail_r = |r: usize| {
        let mut partial = 1.0;
        let mut acc = 0.0;
        for p in 0..k {
            acc += partial;
            partial *= seq.norm_at(h + r + p + 1);
        }
        acc / (1.0 - cycle)
    };
    let phases: Vec<f64> = (0..k).map(tail_r).collect();
    let top = last.max(h);
    let mut out = vec![0.0; top + 1];
    for j in (0..=top).rev() {
        out[j] = if j >= h {
            phases[(j - h) % k]
        } else {
            1.0 + seq.norm_at(j + 1) * out[j + 1]
        };
    }
    out.truncate(last + 1);
    out
}

/// `m` and `σ²` with both outer series cut once their geometric remainders
/// drop below `tol`.
pub fn limit_constants(seq: &KernelSequence, tol: f64) -> Result<LimitConstants> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("series tolerance must be positive, got {tol}")));
    }
    let g0 = seq.mean_rate();
    let rho = seq.rho();
    let tail_m = rho / (1.0 - rho);
    let tail_s = rho / (1.0 - rho).powi(3);
    let mut m_n = vec![g0];
    let mut log_p = 0.0f64;
    loop {
        let last = *m_n.last().unwrap();
        if last * tail_m < tol && last * tail_s < tol {
            break;
        }
        let n = m_n.len();
        if n > MAX_SERIES_TERMS {
            return Err(Error::TruncationCap {
                needed: n,
                cap: MAX_SERIES_TERMS,
                achievable_bound: last * tail_s,
            });
        }
        log_p += seq.norm_at(n).ln();
        m_n.push(g0 * log_p.exp());
    }
    let last = *m_n.last().unwrap();
    let factors = offspring_factors(seq, m_n.len() - 1);
    let m = m_n.iter().sum();
    let sigma2 = m_n
        .iter()
        .zip(&factors)
        .map(|(mj, r)| r * r * mj)
        .sum();
    Ok(LimitConstants {
        m_n,
        m,
        sigma2,
        truncation_error_m: last * tail_m,
        truncation_error_sigma2: last * tail_s,
    })
}

/// `E[N_t] = ∫₀ᵗ Σ_n (γ₀∗γ₁∗⋯∗γ_n)(s) ds` on a grid of step `step`.
///
/// Returns the value and the geometric bound on the discarded generations.
pub fn mean_count(seq: &KernelSequence, t: f64, step: f64, tol: f64) -> Result<(f64, f64)> {
    if t <= 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {step}")));
    }
    let points = (t / step).round() as usize + 1;
    if points > MAX_GRID_POINTS {
        return Err(Error::GridBudget {
            points,
            cap: MAX_GRID_POINTS,
        });
    }
    let baseline = seq.baseline();
    let mut u = GridFunction::new(
        step,
        (0..points).map(|i| baseline.eval(i as f64 * step)).collect(),
    );
    let immigrants = baseline.integral_to(t);
    let rho = seq.rho();
    let mut total = u.l1_norm();
    let mut n = 0;
    let mut product = 1.0;
    loop {
        let remainder = immigrants * product * rho / (1.0 - rho);
        if remainder < tol || product == 0.0 {
            return Ok((total, if product == 0.0 { 0.0 } else { remainder }));
        }
        n += 1;
        if n > crate::simulate::MAX_GENERATIONS {
            return Err(Error::TruncationCap {
                needed: n,
                cap: crate::simulate::MAX_GENERATIONS,
                achievable_bound: remainder,
            });
        }
        product *= seq.norm_at(n);
        let Some(kernel) = seq.kernel_at(n) else {
            return Ok((total, 0.0));
        };
        let support = kernel.truncation_length(DEFAULT_TRUNCATION).min(t);
        let k = kernel.tabulate(step, support);
        u = k.convolve(&u)?.resized(points);
        total += u.l1_norm();
    }
}

/// Assignment of generations to classes `0..classes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub classes: usize,
    /// Classes of generations `0, 1, …, explicit.len()−1`.
    #[serde(default)]
    pub explicit: Vec<usize>,
    pub extension: PartitionExtension,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "classes", rename_all = "kebab-case")]
pub enum PartitionExtension {
    /// Repeat the pattern after the explicit list.
    Cyclic(Vec<usize>),
    /// Every later generation goes to one class.
    Constant(usize),
}

impl PartitionSpec {
    pub fn new(classes: usize, explicit: Vec<usize>, extension: PartitionExtension) -> Result<Self> {
        let p = PartitionSpec {
            classes,
            explicit,
            extension,
        };
        p.validate()?;
        Ok(p)
    }

    /// Generations with even index to class 0, odd to class 1.
    pub fn even_odd() -> Self {
        PartitionSpec {
            classes: 2,
            explicit: vec![],
            extension: PartitionExtension::Cyclic(vec![0, 1]),
        }
    }

    pub fn single() -> Self {
        PartitionSpec {
            classes: 1,
            explicit: vec![],
            extension: PartitionExtension::Constant(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::InvalidParameter("a partition needs at least one class".into()));
        }
        let tail: &[usize] = match &self.extension {
            PartitionExtension::Cyclic(p) if p.is_empty() => {
                return Err(Error::InvalidParameter("cyclic partition pattern is empty".into()))
            }
            PartitionExtension::Cyclic(p) => p,
            PartitionExtension::Constant(c) => std::slice::from_ref(c),
        };
        if let Some(c) = self.explicit.iter().chain(tail).find(|c| **c >= self.classes) {
            return Err(Error::InvalidParameter(format!(
                "class {c} out of range for a {}-class partition",
                self.classes
            )));
        }
        Ok(())
    }

    pub fn class_of(&self, generation: usize) -> usize {
        if let Some(c) = self.explicit.get(generation) {
            return *c;
        }
        let n = generation - self.explicit.len();
        match &self.extension {
            PartitionExtension::Cyclic(p) => p[n % p.len()],
            PartitionExtension::Constant(c) => *c,
        }
    }
}

/// Class-wise limits `(Σ_{n∈A_i} m_n)_i` and the shared truncation bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionLimits {
    pub rates: Vec<f64>,
    pub truncation_error: f64,
}

pub fn partition_lln(seq: &KernelSequence, part: &PartitionSpec, tol: f64) -> Result<PartitionLimits> {
    part.validate()?;
    let c = limit_constants(seq, tol)?;
    let mut rates = vec![0.0; part.classes];
    for (n, mn) in c.m_n.iter().enumerate() {
        rates[part.class_of(n)] += mn;
    }
    Ok(PartitionLimits {
        rates,
        truncation_error: c.truncation_error_m,
    })
}

/// Bracket on the spectral radius of a nonnegative matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBracket {
    pub lower: f64,
    pub upper: f64,
}

/// Collatz–Wielandt bounds from power iteration on `Φ + I`.
pub fn spectral_radius(phi: &DMatrix<f64>) -> SpectralBracket {
    let d = phi.nrows();
    let shifted = phi + DMatrix::identity(d, d);
    let mut x = DVector::from_element(d, 1.0);
    let mut bracket = SpectralBracket {
        lower: 0.0,
        upper: f64::INFINITY,
    };
    for _ in 0..10_000 {
        let y = &shifted * &x;
        let ratios = y.iter().zip(x.iter()).map(|(a, b)| a / b);
        let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        bracket.lower = bracket.lower.max(lo - 1.0);
        bracket.upper = bracket.upper.min(hi - 1.0);
        if bracket.upper < 1.0 || bracket.lower >= 1.0 || bracket.upper - bracket.lower < 1e-13 {
            break;
        }
        // keep strictly positive so the ratios stay defined
        let norm = y.max();
        x = y.map(|v| (v / norm).max(1e-300));
    }
    bracket
}

/// Solves `(I − Φ)x = ν` after checking that the spectral radius of `Φ` is
/// below one.
pub fn multivariate_check(nu: &[f64], phi: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = nu.len();
    if phi.nrows() != d || phi.ncols() != d {
        return Err(Error::InvalidParameter(format!(
            "Φ must be {d}×{d}, got {}×{}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    if phi.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("Φ must be finite and nonnegative".into()));
    }
    let bracket = spectral_radius(phi);
    if !(bracket.upper < 1.0) {
        return Err(Error::SpectralRadius(bracket.upper));
    }
    let a = DMatrix::identity(d, d) - phi;
    let x = a
        .lu()
        .solve(&DVector::from_column_slice(nu))
        .ok_or_else(|| Error::Numerical("singular I − Φ".into()))?;
    Ok(x.iter().copied().collect())
}

/// Immigration vector and branching matrix of the bivariate process
/// `(N^even, N^odd)` when odd generations use `h` and even ones `g`.
///
/// `Φ[i][j]` is the mean number of class-`i` children of a class-`j` point.
pub fn even_odd_bridge(mean_rate: f64, h_norm: f64, g_norm: f64) -> (Vec<f64>, DMatrix<f64>) {
    (
        vec![mean_rate, 0.0],
        DMatrix::from_row_slice(2, 2, &[0.0, g_norm, h_norm, 0.0]),
    )
}

/// Bounds on the contribution of pre-`(−s)` immigrants to `(0, T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumBound {
    pub s: f64,
    pub horizon: f64,
    /// `∫₀ᵀ Σ_n E[λ^{†,n}_{−s}(t)] dt`, an upper bound on
    /// `P(N^†_{−s}(0,T) > 0)`.
    pub value: f64,
    pub truncation_error: f64,
    /// `γ̄₀ Σ_n n ρ^{n−1} η`, independent of `s` and `T`; absent when `η` is
    /// flagged as infinite.
    pub strong_cap: Option<f64>,
}

/// `Σ_{n>N} n x^{n−1}`.
fn tail_of_derivative_series(x: f64, n: usize) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let xn = x.powi(n as i32);
    ((n as f64 + 1.0) * xn * (1.0 - x) + xn * x) / (1.0 - x).powi(2)
}

/// `γ̄₀ Σ_{n≥1} n ρ^{n−1} η`, summed until the remainder is below `tol`.
pub fn strong_cap(seq: &KernelSequence, tol: f64) -> Option<f64> {
    let eta = seq.eta();
    if eta.heavy_tail {
        return None;
    }
    let (g0, rho) = (seq.mean_rate(), seq.rho());
    let scale = g0 * eta.value;
    let mut sum = 0.0;
    let mut power = 1.0;
    let mut n = 1;
    while scale * tail_of_derivative_series(rho, n - 1) >= tol && n <= MAX_SERIES_TERMS {
        sum += n as f64 * power;
        power *= rho;
        n += 1;
    }
    Some(scale * sum)
}

/// Grid evaluation of `γ̄₀ Σ_n ∫_s^{s+T} V_n`, with
/// `V_1 = H_1` and `V_n = γ_n ∗ V_{n−1} + (∏_{i<n} ‖γ_i‖) H_n`.
pub fn equilibrium_bound(
    seq: &KernelSequence,
    s: f64,
    horizon: f64,
    step: f64,
    tol: f64,
) -> Result<EquilibriumBound> {
    if !seq.baseline().is_constant() {
        return Err(Error::ConstantBaselineRequired);
    }
    if !(s >= 0.0 && horizon > 0.0 && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need s ≥ 0, T > 0 and a positive step; got s = {s}, T = {horizon}, step = {step}"
        )));
    }
    let g0 = seq.mean_rate();
    let rho = seq.rho();
    let cap = strong_cap(seq, tol);
    let end = s + horizon;
    let points = (end / step).round() as usize + 1;
    if points > MAX_GRID_POINTS {
        return Err(Error::GridBudget {
            points,
            cap: MAX_GRID_POINTS,
        });
    }
    let lo = (s / step).round() as usize;
    let window = |v: &GridFunction| crate::kernel::trapezoid(&v.values[lo..], step);
    let eta = seq.eta();
    // per-generation bound n ρ^{n−1} η on the full integral, or T n ρ^n on the window
    let remainder = |n: usize| {
        let by_window = g0 * horizon * rho * tail_of_derivative_series(rho, n);
        if eta.heavy_tail {
            by_window
        } else {
            by_window.min(g0 * eta.value * tail_of_derivative_series(rho, n))
        }
    };
    let mut value = 0.0;
    let mut v: Option<GridFunction> = None;
    let mut product = 1.0;
    let mut n = 0;
    loop {
        if rho == 0.0 || remainder(n) < tol {
            break;
        }
        n += 1;
        if n > crate::simulate::MAX_GENERATIONS {
            return Err(Error::TruncationCap {
                needed: n,
                cap: crate::simulate::MAX_GENERATIONS,
                achievable_bound: remainder(n - 1),
            });
        }
        let Some(kernel) = seq.kernel_at(n) else { break };
        let tail = kernel.tabulate_tail(step, end);
        let next = match v {
            None => tail,
            Some(prev) => {
                let support = kernel.truncation_length(DEFAULT_TRUNCATION).min(end);
                let mut conv = kernel.tabulate(step, support).convolve(&prev)?.resized(points);
                for (c, t) in conv.values.iter_mut().zip(&tail.values) {
                    *c += product * t;
                }
                conv
            }
        };
        value += g0 * window(&next);
        product *= kernel.l1_norm();
        v = Some(next);
    }
    let truncation_error = if rho == 0.0 || seq.kernel_at(n + 1).is_none() {
        0.0
    } else {
        remainder(n)
    };
    Ok(EquilibriumBound {
        s,
        horizon,
        value,
        truncation_error,
        strong_cap: cap,
    })
}

/// Monte Carlo count of offspring of immigrants arriving in `(−s−warmup, −s]`
/// that land in `(0, T]`.
///
/// Returns `(frequency of at least one such point, mean number of points)`.
pub fn equilibrium_monte_carlo(
    seq: &KernelSequence,
    s: f64,
    horizon: f64,
    warmup: f64,
    seed: u64,
    n_reps: usize,
    tol: f64,
) -> Result<(f64, f64)> {
    if !seq.baseline().is_constant() {
        return Err(Error::ConstantBaselineRequired);
    }
    let span = warmup + s + horizon;
    let (depth, _) = crate::simulate::truncation_depth(seq, seq.mean_rate() * span, tol)?;
    let counts = crate::simulate::replicate_with(seed, n_reps, |stream| {
        let mut rng = stream.rng();
        let immigrants =
            crate::simulate::sample_immigrants(seq.baseline(), -s - warmup, -s, &mut rng);
        let generations =
            crate::simulate::grow_generations(seq, immigrants, horizon, depth, &mut rng);
        generations
            .iter()
            .skip(1)
            .flatten()
            .filter(|t| **t > 0.0 && **t <= horizon)
            .count()
    });
    let n = n_reps as f64;
    let hits = counts.iter().filter(|c| **c > 0).count() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    Ok((hits / n, mean))
}
