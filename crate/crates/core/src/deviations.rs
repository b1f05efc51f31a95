//! Limiting cumulant `Γ(θ)`, its critical point `θ_c`, and the large and
//! moderate deviation rate functions.
//!
//! `Γ(θ) = γ̄₀(e^{f_∞(θ)} − 1)` where `f_∞` is the limit of
//! `f_M = φ₁∘φ₂∘⋯∘φ_M(θ)` with `φ_i(x) = θ + ‖γ_i‖(e^x − 1)`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::analytics::LimitConstants;
use crate::claims::ClaimLaw;
use crate::kernel::KernelSequence;
use crate::stats::{golden_max, log_mean_exp, Estimate};

/// Default convergence tolerance for the `f_M` iteration.
pub const DEFAULT_CUMULANT_TOL: f64 = 1e-15;

/// Iterates above this value with sustained growth are declared divergent.
pub const DEFAULT_DIVERGENCE_CAP: f64 = 50.0;

/// Largest `θ_c` searched for before reporting a capped value.
pub const THETA_C_CAP: f64 = 500.0;

/// Number of plain cycle iterations before switching to Newton's method.
const PLAIN_CYCLES: usize = 200;

const MEMO_LIMIT: usize = 1 << 16;

/// Critical point `θ_c = sup{θ : Γ(θ) < ∞}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaC {
    /// Largest `θ` found finite; equal to the search cap when `capped`.
    pub value: f64,
    /// Smallest `θ` found divergent.
    pub divergent: f64,
    /// `Γ` stayed finite up to the search cap.
    pub capped: bool,
}

/// `Γ(θ)` with its cached critical point.
pub struct CumulantModel {
    seq: KernelSequence,
    tol: f64,
    divergence_cap: f64,
    head: Vec<f64>,
    cycle: Vec<f64>,
    theta_c: OnceLock<ThetaC>,
    memo: Mutex<HashMap<u64, f64>>,
}

impl std::fmt::Debug for CumulantModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CumulantModel")
            .field("seq", &self.seq)
            .field("tol", &self.tol)
            .field("divergence_cap", &self.divergence_cap)
            .finish_non_exhaustive()
    }
}

impl CumulantModel {
    pub fn new(seq: KernelSequence) -> Self {
        Self::with_tolerances(seq, DEFAULT_CUMULANT_TOL, DEFAULT_DIVERGENCE_CAP)
    }

    pub fn with_tolerances(seq: KernelSequence, tol: f64, divergence_cap: f64) -> Self {
        let layout = seq.layout();
        let head = (1..=layout.head).map(|n| seq.norm_at(n)).collect();
        let cycle = (1..=layout.period)
            .map(|r| seq.norm_at(layout.head + r))
            .collect();
        CumulantModel {
            seq,
            tol,
            divergence_cap,
            head,
            cycle,
            theta_c: OnceLock::new(),
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn sequence(&self) -> &KernelSequence {
        &self.seq
    }

    pub fn mean_rate(&self) -> f64 {
        self.seq.mean_rate()
    }

    /// `f_M(θ)` exactly as defined, for a finite depth `M`.
    pub fn f_m(&self, theta: f64, depth: usize) -> f64 {
        let mut x = theta;
        for n in (1..=depth).rev() {
            x = theta + self.seq.norm_at(n) * x.exp_m1();
        }
        x
    }

    /// One pass through the periodic tail, deepest generation first, with
    /// the derivative of the composed map.
    fn cycle_map(&self, theta: f64, x: f64) -> (f64, f64) {
        let mut y = x;
        let mut slope = 1.0;
        for norm in self.cycle.iter().rev() {
            slope *= norm * y.exp();
            y = theta + norm * y.exp_m1();
        }
        (y, slope)
    }

    /// Fixed point reached by iterating the cycle map from `θ`; `+∞` when
    /// the iteration diverges.
    ///
    /// Plain iteration is followed by Newton steps on `F(y) = Ψ(y) − y`,
    /// which polish the result and take over when the contraction is slow
    /// near `θ_c`.
    fn tail_fixed_point(&self, theta: f64) -> f64 {
        let mut x = theta;
        let mut increments = [0.0f64; 3];
        for i in 0..PLAIN_CYCLES {
            let (y, _) = self.cycle_map(theta, x);
            if !y.is_finite() {
                return f64::INFINITY;
            }
            let step = y - x;
            increments.rotate_left(1);
            increments[2] = step;
            x = y;
            if step.abs() <= self.tol * x.abs().max(1.0) {
                break;
            }
            if x > self.divergence_cap
                && i >= 3
                && increments[0] > 0.0
                && increments[1] > increments[0]
                && increments[2] > increments[1]
            {
                return f64::INFINITY;
            }
        }
        self.newton_fixed_point(theta, x)
    }

    /// Newton's method for the smallest root of the convex `F(y) = Ψ(y) − y`.
    ///
    /// Started left of the root (`F ≥ 0`) the iterates increase
    /// monotonically; a nonnegative slope while `F > 0` means no root exists.
    fn newton_fixed_point(&self, theta: f64, mut x: f64) -> f64 {
        for _ in 0..10_000 {
            let (y, slope) = self.cycle_map(theta, x);
            if !y.is_finite() {
                return f64::INFINITY;
            }
            let f = y - x;
            let df = slope - 1.0;
            if f == 0.0 || (f < 0.0 && df >= 0.0) {
                return x;
            }
            if df >= 0.0 {
                return f64::INFINITY;
            }
            let step = -f / df;
            x += step;
            if step.abs() <= self.tol * x.abs().max(1.0) {
                return x;
            }
        }
        x
    }

    /// `f_∞(θ)`, or `+∞` past the critical point.
    pub fn f_limit(&self, theta: f64) -> f64 {
        let mut x = self.tail_fixed_point(theta);
        for norm in self.head.iter().rev() {
            x = theta + norm * x.exp_m1();
        }
        x
    }

    /// `e^{f_∞(θ)}`, the solution of the classical fixed-point equation
    /// `f = e^{θ + ‖h‖(f − 1)}` when all kernels share one norm.
    pub fn f_exp(&self, theta: f64) -> f64 {
        self.f_limit(theta).exp()
    }

    /// `Γ(θ) = γ̄₀(e^{f_∞(θ)} − 1)`.
    pub fn gamma(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        let key = theta.to_bits();
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return *v;
        }
        let f = self.f_limit(theta);
        let v = if f.is_finite() {
            self.mean_rate() * f.exp_m1()
        } else {
            f64::INFINITY
        };
        let mut memo = self.memo.lock().unwrap();
        if memo.len() >= MEMO_LIMIT {
            memo.clear();
        }
        memo.insert(key, v);
        v
    }

    pub fn theta_c(&self) -> ThetaC {
        *self.theta_c.get_or_init(|| {
            let finite = |t: f64| self.f_limit(t).is_finite();
            let rho = self.seq.rho();
            let mut lo = if rho > 0.0 { rho - 1.0 - rho.ln() } else { 1.0 };
            let mut hi = lo.max(0.5) * 2.0;
            if !finite(lo) {
                // the guaranteed-finite lower bound only fails through rounding
                lo *= 1.0 - 1e-12;
            }
            while finite(hi) {
                lo = hi;
                hi *= 2.0;
                if hi > THETA_C_CAP {
                    if finite(THETA_C_CAP) {
                        return ThetaC {
                            value: THETA_C_CAP,
                            divergent: f64::INFINITY,
                            capped: true,
                        };
                    }
                    hi = THETA_C_CAP;
                }
            }
            while hi - lo > 1e-13 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if finite(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            ThetaC {
                value: lo,
                divergent: hi,
                capped: false,
            }
        })
    }

    /// Finite-difference `Γ′(θ)`: central with step `10⁻⁶·max(1,|θ|)`,
    /// second-order backward when the forward point leaves the domain.
    pub fn gamma_prime(&self, theta: f64) -> f64 {
        derivative(|t| self.gamma(t), theta)
    }

    /// `I(x) = sup_θ {θx − Γ(θ)}`.
    pub fn rate_i(&self, x: f64) -> f64 {
        self.legendre(x).rate
    }

    pub fn legendre(&self, x: f64) -> Legendre {
        let tc = self.theta_c();
        legendre(
            |t| self.gamma(t),
            x,
            self.gamma_prime(0.0),
            self.mean_rate(),
            tc.value,
        )
    }

    /// `Γ_C(θ) = Γ(log E[e^{θC}])`.
    pub fn gamma_c(&self, law: &ClaimLaw, theta: f64) -> f64 {
        let k = law.log_mgf(theta);
        if k.is_finite() {
            self.gamma(k)
        } else {
            f64::INFINITY
        }
    }

    /// `sup{θ : Γ_C(θ) < ∞}`: the root of `log E[e^{θC}] = θ_c`.
    pub fn theta_c_compound(&self, law: &ClaimLaw) -> f64 {
        if !law.is_light_tailed() {
            return 0.0;
        }
        let tc = self.theta_c();
        let target = tc.value;
        let abscissa = law.mgf_abscissa();
        let mut lo = 0.0;
        let mut hi = if abscissa.is_finite() { abscissa } else { 1.0 };
        if !abscissa.is_finite() {
            while law.log_mgf(hi) < target {
                lo = hi;
                hi *= 2.0;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if law.log_mgf(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn gamma_c_prime(&self, law: &ClaimLaw, theta: f64) -> f64 {
        derivative(|t| self.gamma_c(law, t), theta)
    }

    /// `I_C(x) = sup_θ {θx − Γ_C(θ)}`.
    pub fn rate_ic(&self, law: &ClaimLaw, x: f64) -> f64 {
        self.legendre_c(law, x).rate
    }

    pub fn legendre_c(&self, law: &ClaimLaw, x: f64) -> Legendre {
        legendre(
            |t| self.gamma_c(law, t),
            x,
            self.gamma_c_prime(law, 0.0),
            self.mean_rate(),
            self.theta_c_compound(law),
        )
    }
}

fn derivative<F: Fn(f64) -> f64>(f: F, theta: f64) -> f64 {
    let h = 1e-6 * theta.abs().max(1.0);
    let fwd = f(theta + h);
    if fwd.is_finite() {
        (fwd - f(theta - h)) / (2.0 * h)
    } else {
        (3.0 * f(theta) - 4.0 * f(theta - h) + f(theta - 2.0 * h)) / (2.0 * h)
    }
}

/// Result of a numerical Legendre transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Legendre {
    pub rate: f64,
    /// Maximizing `θ`; `None` when the rate is infinite or attained only
    /// in the limit `θ → −∞`.
    pub theta: Option<f64>,
}

/// `sup_{θ ≤ θ_max} {θx − Λ(θ)}` for a convex `Λ` with `Λ(0) = 0`,
/// `Λ′(0) = mean` and `Λ(−∞) = −floor`.
fn legendre<F: Fn(f64) -> f64>(
    lambda: F,
    x: f64,
    mean: f64,
    floor: f64,
    theta_max: f64,
) -> Legendre {
    if x < 0.0 || x.is_nan() {
        return Legendre {
            rate: f64::INFINITY,
            theta: None,
        };
    }
    if x == 0.0 {
        return Legendre {
            rate: floor,
            theta: None,
        };
    }
    if x == mean {
        return Legendre {
            rate: 0.0,
            theta: Some(0.0),
        };
    }
    let objective = |t: f64| t * x - lambda(t);
    let (a, b) = if x > mean {
        let mut b = theta_max.min(1.0);
        while b < theta_max && derivative(&lambda, b) < x {
            b = (2.0 * b).min(theta_max);
        }
        (0.0, b)
    } else {
        let mut a = -1.0;
        while derivative(&lambda, a) > x && a > -1e6 {
            a *= 2.0;
        }
        (a, 0.0)
    };
    let (theta, rate) = golden_max(objective, a, b, 1e-10);
    Legendre {
        rate: rate.max(0.0),
        theta: Some(theta),
    }
}

/// Minimal solution of `x = θ + ρ(e^x − 1)`.
///
/// Solutions exist only for `θ ≤ ρ − 1 − log ρ`; the minimal one lies in
/// `[θ − ρ, log(1/ρ)]` and has the sign of `θ`.
pub fn min_root(theta: f64, rho: f64) -> crate::error::Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(crate::error::Error::InvalidParameter(format!(
            "ρ must be finite and nonnegative, got {rho}"
        )));
    }
    if rho == 0.0 {
        return Ok(theta);
    }
    let tangency = rho - 1.0 - rho.ln();
    if theta > tangency {
        return Err(crate::error::Error::NoMinimalRoot { theta, tangency });
    }
    let g = |x: f64| theta + rho * x.exp_m1() - x;
    let (mut lo, mut hi) = (theta - rho, -rho.ln());
    if theta == tangency {
        return Ok(hi);
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(lo).abs() < g(hi).abs() { lo } else { hi })
}

/// Moderate deviation rate `J(x) = x²/(2σ²)`.
pub fn rate_j(constants: &LimitConstants, x: f64) -> f64 {
    x * x / (2.0 * constants.sigma2)
}

/// `(1/t) log mean e^{θ v_i}` over replicated values `v_i` (counts or
/// aggregate claims), with a jackknife standard error.
pub fn empirical_cumulant(values: &[f64], theta: f64, t: f64) -> Estimate {
    if theta == 0.0 {
        return Estimate::new(0.0, 0.0);
    }
    let a: Vec<f64> = values.iter().map(|v| theta * v).collect();
    let e = log_mean_exp(&a);
    Estimate::new(e.value / t, e.error / t)
}
