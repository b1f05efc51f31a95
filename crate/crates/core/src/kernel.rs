//! Exciting functions, the generation-indexed kernel family, and the grid
//! convolution engine shared by every numerical routine in the crate.
//!
//! A [`Kernel`] is a nonnegative integrable function on `[0, ∞)`. The family
//! `γ₁, γ₂, …` of offspring kernels together with the immigrant intensity `γ₀`
//! forms a [`KernelSequence`]; generation `n` points are born from generation
//! `n − 1` points through `γ_n`.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tail mass below which a kernel is considered exhausted on a grid.
pub const DEFAULT_TRUNCATION: f64 = 1e-10;

/// Default uniform grid step for convolutions.
pub const DEFAULT_GRID_STEP: f64 = 1e-3;

/// Raw tabulated kernel as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSpec {
    pub step: f64,
    pub values: Vec<f64>,
}

/// A kernel sampled on a uniform grid and linearly interpolated between nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedSpec", into = "TabulatedSpec")]
pub struct Tabulated {
    step: f64,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TryFrom<TabulatedSpec> for Tabulated {
    type Error = Error;

    fn try_from(spec: TabulatedSpec) -> Result<Self> {
        Tabulated::new(spec.step, spec.values)
    }
}

impl From<Tabulated> for TabulatedSpec {
    fn from(t: Tabulated) -> Self {
        TabulatedSpec {
            step: t.step,
            values: t.values,
        }
    }
}

impl Tabulated {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tabulated kernel step must be positive, got {step}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidParameter(
                "tabulated kernel needs at least two values".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "tabulated kernel values must be finite and nonnegative, got {v}"
            )));
        }
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * step * (w[0] + w[1]);
            cumulative.push(acc);
        }
        Ok(Tabulated {
            step,
            values,
            cumulative,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn support_end(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    fn eval(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_end() {
            return 0.0;
        }
        let pos = t / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - i as f64;
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn integral_to(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.support_end() {
            return self.total();
        }
        let pos = t / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let s = t - i as f64 * self.step;
        let slope = (self.values[i + 1] - self.values[i]) / self.step;
        self.cumulative[i] + self.values[i] * s + 0.5 * slope * s * s
    }

    fn inverse_integral(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, self.total());
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&y).unwrap())
        {
            Ok(i) => return i as f64 * self.step,
            Err(i) => i.saturating_sub(1).min(self.values.len() - 2),
        };
        let r = y - self.cumulative[i];
        let b = self.values[i];
        let a = 0.5 * (self.values[i + 1] - self.values[i]) / self.step;
        let disc = (b * b + 4.0 * a * r).max(0.0);
        let denom = b + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        (i as f64 * self.step + s.clamp(0.0, self.step)).min(self.support_end())
    }

    fn first_moment(&self) -> FirstMoment {
        let h = self.step;
        let mut total = 0.0;
        let n = self.values.len() - 1;
        let tail_start = n - n / 10;
        let mut tail = 0.0;
        for i in 0..n {
            let t0 = i as f64 * h;
            let v = self.values[i];
            let d = self.values[i + 1] - v;
            let cell = t0 * (v * h + 0.5 * d * h) + 0.5 * v * h * h + d * h * h / 3.0;
            total += cell;
            if i >= tail_start {
                tail += cell;
            }
        }
        FirstMoment {
            value: total,
            heavy_tail: total > 0.0 && tail > 0.01 * total,
        }
    }
}

/// First moment `∫ t γ(t) dt` of a kernel.
///
/// `heavy_tail` is raised for tabulated kernels whose last tenth of support
/// still carries more than 1% of the moment: the sampled tail was most likely
/// cut off from a kernel whose first moment is not integrable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstMoment {
    pub value: f64,
    pub heavy_tail: bool,
}

/// An exciting function `γ` on `[0, ∞)`.
///
/// `weight` is the L1 norm for [`Kernel::Erlang`]; for
/// [`Kernel::Exponential`] the kernel is `weight·e^{−rate·t}`, so the norm is
/// `weight/rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Kernel {
    Exponential { rate: f64, weight: f64 },
    Erlang { shape: u32, rate: f64, weight: f64 },
    Uniform { height: f64, length: f64 },
    Tabulated(Tabulated),
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Upper regularized gamma `Q(k, x) = e^{−x} Σ_{j<k} x^j/j!` for integer `k`.
fn erlang_survival(shape: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let lx = x.ln();
    (0..shape)
        .map(|j| (j as f64 * lx - x - ln_factorial(j)).exp())
        .sum::<f64>()
        .min(1.0)
}

impl Kernel {
    pub fn exponential(rate: f64, weight: f64) -> Result<Self> {
        let k = Kernel::Exponential { rate, weight };
        k.validate()?;
        Ok(k)
    }

    /// Erlang-shaped kernel with L1 norm `weight`.
    pub fn erlang(shape: u32, rate: f64, weight: f64) -> Result<Self> {
        let k = Kernel::Erlang {
            shape,
            rate,
            weight,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn uniform(height: f64, length: f64) -> Result<Self> {
        let k = Kernel::Uniform { height, length };
        k.validate()?;
        Ok(k)
    }

    pub fn tabulated(step: f64, values: Vec<f64>) -> Result<Self> {
        Ok(Kernel::Tabulated(Tabulated::new(step, values)?))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |cond: bool, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{msg} ({self:?})")))
            }
        };
        match *self {
            Kernel::Exponential { rate, weight } => {
                ok(rate > 0.0 && rate.is_finite(), "exponential rate must be positive")?;
                ok(weight >= 0.0 && weight.is_finite(), "kernel weight must be nonnegative")
            }
            Kernel::Erlang {
                shape,
                rate,
                weight,
            } => {
                ok(shape >= 1, "erlang shape must be at least 1")?;
                ok(rate > 0.0 && rate.is_finite(), "erlang rate must be positive")?;
                ok(weight >= 0.0 && weight.is_finite(), "kernel weight must be nonnegative")
            }
            Kernel::Uniform { height, length } => {
                ok(height >= 0.0 && height.is_finite(), "uniform height must be nonnegative")?;
                ok(length > 0.0 && length.is_finite(), "uniform length must be positive")
            }
            Kernel::Tabulated(_) => Ok(()),
        }
    }

    /// Pointwise value; zero for negative arguments.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { rate, weight } => weight * (-rate * t).exp(),
            Kernel::Erlang {
                shape,
                rate,
                weight,
            } => {
                if weight == 0.0 {
                    return 0.0;
                }
                if shape == 1 {
                    return weight * rate * (-rate * t).exp();
                }
                if t == 0.0 {
                    return 0.0;
                }
                let k = shape as f64;
                weight
                    * (k * rate.ln() + (k - 1.0) * t.ln() - rate * t - ln_factorial(shape - 1))
                        .exp()
            }
            Kernel::Uniform { height, length } => {
                if t <= length {
                    height
                } else {
                    0.0
                }
            }
            Kernel::Tabulated(ref tab) => tab.eval(t),
        }
    }

    /// `‖γ‖_{L¹}`: exact for closed forms, trapezoid for tabulated kernels.
    pub fn l1_norm(&self) -> f64 {
        match *self {
            Kernel::Exponential { rate, weight } => weight / rate,
            Kernel::Erlang { weight, .. } => weight,
            Kernel::Uniform { height, length } => height * length,
            Kernel::Tabulated(ref tab) => tab.total(),
        }
    }

    /// `∫₀ᵗ γ(s) ds`.
    pub fn integral_to(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { rate, weight } => weight / rate * -(-rate * t).exp_m1(),
            Kernel::Erlang {
                shape,
                rate,
                weight,
            } => weight * (1.0 - erlang_survival(shape, rate * t)),
            Kernel::Uniform { height, length } => height * t.min(length),
            Kernel::Tabulated(ref tab) => tab.integral_to(t),
        }
    }

    /// `H(t) = ∫_t^∞ γ(s) ds`.
    pub fn tail_integral(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match *self {
            Kernel::Exponential { rate, weight } => weight / rate * (-rate * t).exp(),
            Kernel::Erlang {
                shape,
                rate,
                weight,
            } => weight * erlang_survival(shape, rate * t),
            Kernel::Uniform { height, length } => height * (length - t).max(0.0),
            Kernel::Tabulated(ref tab) => (tab.total() - tab.integral_to(t)).max(0.0),
        }
    }

    /// `∫ t γ(t) dt`.
    pub fn first_moment(&self) -> FirstMoment {
        let value = match *self {
            Kernel::Exponential { rate, weight } => weight / (rate * rate),
            Kernel::Erlang {
                shape,
                rate,
                weight,
            } => weight * shape as f64 / rate,
            Kernel::Uniform { height, length } => 0.5 * height * length * length,
            Kernel::Tabulated(ref tab) => return tab.first_moment(),
        };
        FirstMoment {
            value,
            heavy_tail: false,
        }
    }

    /// A non-increasing function dominating the kernel on `[t, ∞)`.
    ///
    /// `None` for tabulated kernels.
    pub fn envelope(&self, t: f64) -> Option<f64> {
        let t = t.max(0.0);
        match *self {
            Kernel::Exponential { .. } | Kernel::Uniform { .. } => Some(self.eval(t)),
            Kernel::Erlang { shape, rate, .. } => {
                let mode = (shape as f64 - 1.0) / rate;
                Some(self.eval(t.max(mode)))
            }
            Kernel::Tabulated(_) => None,
        }
    }

    pub fn has_envelope(&self) -> bool {
        !matches!(self, Kernel::Tabulated(_))
    }

    /// Smallest `t` with `H(t) ≤ rel·‖γ‖`.
    pub fn truncation_length(&self, rel: f64) -> f64 {
        let norm = self.l1_norm();
        if norm == 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { rate, .. } => (1.0 / rel).ln() / rate,
            Kernel::Uniform { length, .. } => length,
            _ => {
                let target = rel * norm;
                let mut hi = 1.0;
                while self.tail_integral(hi) > target {
                    hi *= 2.0;
                    if let Kernel::Tabulated(ref tab) = *self {
                        if hi >= tab.support_end() {
                            hi = tab.support_end();
                            break;
                        }
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.tail_integral(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Solves `∫₀ᵗ γ = y` for `y ∈ [0, ‖γ‖)`.
    pub fn inverse_integral(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { rate, weight } => -(-y * rate / weight).ln_1p() / rate,
            Kernel::Uniform { height, length } => (y / height).min(length),
            Kernel::Tabulated(ref tab) => tab.inverse_integral(y),
            Kernel::Erlang {
                shape,
                rate,
                weight,
            } => {
                // bisection on the survival function, which is stable in the tail
                let target = 1.0 - y / weight;
                let mut hi = shape as f64 / rate;
                while erlang_survival(shape, rate * hi) > target {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if erlang_survival(shape, rate * mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Samples the kernel on `{0, Δ, …, ⌊length/Δ⌉Δ}`.
    pub fn tabulate(&self, step: f64, length: f64) -> GridFunction {
        let n = (length / step).round() as usize + 1;
        let values = (0..n).map(|i| self.eval(i as f64 * step)).collect();
        GridFunction { step, values }
    }

    /// `H(t)` sampled on the same grid convention as [`Kernel::tabulate`].
    pub fn tabulate_tail(&self, step: f64, length: f64) -> GridFunction {
        let n = (length / step).round() as usize + 1;
        let values = (0..n).map(|i| self.tail_integral(i as f64 * step)).collect();
        GridFunction { step, values }
    }
}

/// Immigrant intensity `γ₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Baseline {
    Constant {
        rate: f64,
    },
    /// `levels[0]` on `[0, breakpoints[0])`, …, the final level on
    /// `[breakpoints.last(), ∞)`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
}

impl Baseline {
    pub fn constant(rate: f64) -> Result<Self> {
        let b = Baseline::Constant { rate };
        b.validate()?;
        Ok(b)
    }

    pub fn piecewise(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let b = Baseline::PiecewiseConstant {
            breakpoints,
            levels,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Baseline::Constant { rate } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "baseline rate must be finite and nonnegative, got {rate}"
                    )));
                }
            }
            Baseline::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                if levels.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "piecewise baseline needs {} levels for {} breakpoints (the last level is the long-run rate)",
                        breakpoints.len() + 1,
                        breakpoints.len()
                    )));
                }
                if levels.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                    return Err(Error::InvalidParameter(
                        "baseline levels must be finite and nonnegative".into(),
                    ));
                }
                let increasing = breakpoints.windows(2).all(|w| w[0] < w[1]);
                if !increasing || breakpoints.first().is_some_and(|b| *b <= 0.0) {
                    return Err(Error::InvalidParameter(
                        "baseline breakpoints must be positive and strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `γ̄₀ = lim (1/t)∫₀ᵗ γ₀`.
    pub fn mean_rate(&self) -> f64 {
        match self {
            Baseline::Constant { rate } => *rate,
            Baseline::PiecewiseConstant { levels, .. } => *levels.last().unwrap(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Baseline::Constant { .. })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Baseline::Constant { rate } => *rate,
            Baseline::PiecewiseConstant {
                breakpoints,
                levels,
            } => levels[breakpoints.partition_point(|b| *b <= t)],
        }
    }

    pub fn max_level(&self) -> f64 {
        match self {
            Baseline::Constant { rate } => *rate,
            Baseline::PiecewiseConstant { levels, .. } => {
                levels.iter().copied().fold(0.0, f64::max)
            }
        }
    }

    pub fn integral_to(&self, t: f64) -> f64 {
        match self {
            Baseline::Constant { rate } => rate * t.max(0.0),
            Baseline::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                let mut acc = 0.0;
                let mut left = 0.0;
                for (i, level) in levels.iter().enumerate() {
                    let right = breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
                    if t <= left {
                        break;
                    }
                    acc += level * (t.min(right) - left);
                    left = right;
                }
                acc
            }
        }
    }
}

/// How `γ_n` is defined beyond the explicit list `γ₁, …, γ_K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// `γ_{n+K} = γ_n`.
    Cyclic,
    /// `γ_n = γ_K` for `n > K`.
    TailConstant,
    /// `γ_n ≡ 0` for `n > K`.
    Null,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSequenceSpec {
    pub baseline: Baseline,
    #[serde(default)]
    pub kernels: Vec<Kernel>,
    pub extension: Extension,
}

/// The family `γ₀, γ₁, γ₂, …` with `ρ = sup_n ‖γ_n‖ < 1` enforced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSequenceSpec", into = "KernelSequenceSpec")]
pub struct KernelSequence {
    baseline: Baseline,
    explicit: Vec<Kernel>,
    extension: Extension,
    norms: Vec<f64>,
}

impl TryFrom<KernelSequenceSpec> for KernelSequence {
    type Error = Error;

    fn try_from(spec: KernelSequenceSpec) -> Result<Self> {
        KernelSequence::new(spec.baseline, spec.kernels, spec.extension)
    }
}

impl From<KernelSequence> for KernelSequenceSpec {
    fn from(seq: KernelSequence) -> Self {
        KernelSequenceSpec {
            baseline: seq.baseline,
            kernels: seq.explicit,
            extension: seq.extension,
        }
    }
}

/// Generation structure as a finite head followed by a periodic tail.
///
/// Generations `1..=head` are visited once; afterwards the kernels of
/// generations `head+1 ..= head+period` repeat forever.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenerationLayout {
    pub head: usize,
    pub period: usize,
}

impl KernelSequence {
    pub fn new(baseline: Baseline, explicit: Vec<Kernel>, extension: Extension) -> Result<Self> {
        baseline.validate()?;
        for k in &explicit {
            k.validate()?;
        }
        if explicit.is_empty() && extension != Extension::Null {
            return Err(Error::InvalidParameter(
                "cyclic and tail-constant extensions need at least one explicit kernel".into(),
            ));
        }
        let norms: Vec<f64> = explicit.iter().map(Kernel::l1_norm).collect();
        if let Some((i, n)) = norms.iter().enumerate().find(|(_, n)| !(**n < 1.0)) {
            return Err(Error::Supercritical {
                generation: i + 1,
                norm: *n,
            });
        }
        Ok(KernelSequence {
            baseline,
            explicit,
            extension,
            norms,
        })
    }

    /// The classical Hawkes process: one kernel shared by all generations.
    pub fn classical(baseline_rate: f64, kernel: Kernel) -> Result<Self> {
        Self::new(
            Baseline::constant(baseline_rate)?,
            vec![kernel],
            Extension::TailConstant,
        )
    }

    /// Homogeneous Poisson immigration only.
    pub fn poisson(baseline_rate: f64) -> Result<Self> {
        Self::new(Baseline::constant(baseline_rate)?, vec![], Extension::Null)
    }

    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    pub fn explicit(&self) -> &[Kernel] {
        &self.explicit
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn mean_rate(&self) -> f64 {
        self.baseline.mean_rate()
    }

    pub(crate) fn index_of(&self, n: usize) -> Option<usize> {
        assert!(n >= 1, "offspring generations start at 1");
        let k = self.explicit.len();
        if n <= k {
            return Some(n - 1);
        }
        match self.extension {
            Extension::Cyclic => Some((n - 1) % k),
            Extension::TailConstant => Some(k - 1),
            Extension::Null => None,
        }
    }

    /// `γ_n` for `n ≥ 1`; `None` when the kernel is identically zero.
    pub fn kernel_at(&self, n: usize) -> Option<&Kernel> {
        self.index_of(n).map(|i| &self.explicit[i])
    }

    /// `‖γ_n‖_{L¹}` for `n ≥ 1`.
    pub fn norm_at(&self, n: usize) -> f64 {
        self.index_of(n).map_or(0.0, |i| self.norms[i])
    }

    /// `ρ = sup_n ‖γ_n‖`.
    pub fn rho(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// `η = sup_n ∫ t γ_n(t) dt`, flagged when any tabulated tail looks heavy.
    pub fn eta(&self) -> FirstMoment {
        self.explicit
            .iter()
            .map(Kernel::first_moment)
            .fold(FirstMoment { value: 0.0, heavy_tail: false }, |acc, m| FirstMoment {
                value: acc.value.max(m.value),
                heavy_tail: acc.heavy_tail || m.heavy_tail,
            })
    }

    pub fn layout(&self) -> GenerationLayout {
        let k = self.explicit.len();
        match self.extension {
            Extension::Cyclic => GenerationLayout { head: 0, period: k },
            Extension::TailConstant => GenerationLayout {
                head: k - 1,
                period: 1,
            },
            Extension::Null => GenerationLayout { head: k, period: 1 },
        }
    }

    /// Longest truncation length over the explicit kernels.
    pub fn max_truncation_length(&self, rel: f64) -> f64 {
        self.explicit
            .iter()
            .map(|k| k.truncation_length(rel))
            .fold(0.0, f64::max)
    }

    /// True when every generation beyond `n` has a zero kernel.
    pub fn is_null_beyond(&self, n: usize) -> bool {
        self.extension == Extension::Null && n >= self.explicit.len()
            || (n + 1..=n + self.explicit.len().max(1)).all(|g| self.norm_at(g) == 0.0)
                && self.extension != Extension::Cyclic
                && n >= self.explicit.len()
    }
}

/// A function sampled on `{0, Δ, 2Δ, …, L}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub step: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(step: f64, values: Vec<f64>) -> Self {
        GridFunction { step, values }
    }

    pub fn zeros(step: f64, len: usize) -> Self {
        GridFunction {
            step,
            values: vec![0.0; len],
        }
    }

    pub fn length(&self) -> f64 {
        self.step * self.values.len().saturating_sub(1) as f64
    }

    /// Trapezoid integral over the full support.
    pub fn l1_norm(&self) -> f64 {
        trapezoid(&self.values, self.step)
    }

    /// Linear interpolation, zero outside `[0, L]`.
    pub fn eval(&self, t: f64) -> f64 {
        if self.values.is_empty() || t < 0.0 || t > self.length() {
            return 0.0;
        }
        if self.values.len() == 1 {
            return self.values[0];
        }
        let pos = t / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let frac = pos - i as f64;
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    /// Trapezoid convolution; the result lives on `[0, L₁ + L₂]`.
    pub fn convolve(&self, other: &GridFunction) -> Result<GridFunction> {
        let tol = 1e-12 * self.step.max(other.step);
        if (self.step - other.step).abs() > tol {
            return Err(Error::StepMismatch {
                left: self.step,
                right: other.step,
            });
        }
        Ok(GridFunction {
            step: self.step,
            values: trapezoid_convolve(&self.values, &other.values, self.step),
        })
    }

    /// Truncates (or zero-pads) to `len` nodes.
    pub fn resized(mut self, len: usize) -> GridFunction {
        self.values.resize(len, 0.0);
        self
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        let n = self.values.len().max(other.values.len());
        (0..n)
            .map(|i| {
                let a = self.values.get(i).copied().unwrap_or(0.0);
                let b = other.values.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Composite trapezoid rule with half-weight endpoints.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 15;

/// Plain discrete convolution `Σ_j f[j] g[k−j]`.
pub(crate) fn discrete_convolve(f: &[f64], g: &[f64]) -> Vec<f64> {
    let n = f.len() + g.len() - 1;
    if f.len().min(g.len()) <= 64 || f.len() * g.len() <= DIRECT_CONVOLUTION_LIMIT {
        let mut out = vec![0.0; n];
        for (i, &a) in f.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in g.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        return out;
    }
    let size = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex<f64>> = f.iter().map(|&x| Complex::new(x, 0.0)).collect();
    a.resize(size, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = g.iter().map(|&x| Complex::new(x, 0.0)).collect();
    b.resize(size, Complex::new(0.0, 0.0));
    fft.process(&mut a);
    fft.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    ifft.process(&mut a);
    let scale = 1.0 / size as f64;
    a.iter().take(n).map(|c| c.re * scale).collect()
}

/// Trapezoid-rule convolution of two grid samples sharing the step `Δ`.
///
/// Node `k` of the result approximates `∫ f(x) g(kΔ − x) dx` over the overlap
/// of both supports, with half weights at the two ends of that overlap.
pub fn trapezoid_convolve(f: &[f64], g: &[f64], step: f64) -> Vec<f64> {
    if f.is_empty() || g.is_empty() {
        return Vec::new();
    }
    let mut out = discrete_convolve(f, g);
    let (nf, ng) = (f.len(), g.len());
    for (k, v) in out.iter_mut().enumerate() {
        let lo = k.saturating_sub(ng - 1);
        let hi = k.min(nf - 1);
        let ends = if lo == hi {
            f[lo] * g[k - lo]
        } else {
            0.5 * (f[lo] * g[k - lo] + f[hi] * g[k - hi])
        };
        *v = step * (*v - ends);
    }
    out
}
