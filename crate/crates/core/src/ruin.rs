//! Ruin probabilities for the surplus `R_t = u + pt − Σ_{i≤N_t} C_i` with
//! Hawkes claim arrivals.

use serde::{Deserialize, Serialize};

use crate::analytics::{limit_constants, DEFAULT_SERIES_TOL};
use crate::claims::ClaimLaw;
use crate::deviations::CumulantModel;
use crate::error::{Error, Result};
use crate::kernel::KernelSequence;
use crate::simulate::{replicate_with, simulate_branching_with};

/// Horizon of a ruin probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "z", rename_all = "kebab-case")]
pub enum Horizon {
    /// `ψ(u) = P(τ_u < ∞)`.
    Infinite,
    /// `ψ(u, uz) = P(τ_u ≤ uz)`. In the heavy-tail asymptote `z` is the
    /// horizon parameter also written `T`.
    Finite(f64),
}

/// Margins of `m·E[C₁] < p < Γ_C(θ_c)/θ_c`; both positive when the
/// light-tail analysis applies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `p − m·E[C₁]`.
    pub net_profit: f64,
    /// `Γ_C(θ_c)/θ_c − p`; `None` for heavy-tailed claims.
    pub light_tail: Option<f64>,
}

pub struct RiskModel {
    pub initial_reserve: f64,
    pub premium: f64,
    pub law: ClaimLaw,
    cumulant: CumulantModel,
    m: f64,
}

impl std::fmt::Debug for RiskModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RiskModel")
            .field("initial_reserve", &self.initial_reserve)
            .field("premium", &self.premium)
            .field("law", &self.law)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl RiskModel {
    /// Validates inputs; the net profit condition is reported through
    /// [`RiskModel::margins`] rather than enforced, so that violating
    /// scenarios can still be simulated.
    pub fn new(initial_reserve: f64, premium: f64, law: ClaimLaw, arrival: KernelSequence) -> Result<Self> {
        law.validate()?;
        if !(initial_reserve >= 0.0 && initial_reserve.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial reserve must be finite and nonnegative, got {initial_reserve}"
            )));
        }
        if !(premium > 0.0 && premium.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "premium rate must be positive, got {premium}"
            )));
        }
        let m = limit_constants(&arrival, DEFAULT_SERIES_TOL)?.m;
        Ok(RiskModel {
            initial_reserve,
            premium,
            law,
            cumulant: CumulantModel::new(arrival),
            m,
        })
    }

    pub fn arrival(&self) -> &KernelSequence {
        self.cumulant.sequence()
    }

    pub fn cumulant(&self) -> &CumulantModel {
        &self.cumulant
    }

    /// `m·E[C₁]`.
    pub fn mean_outflow(&self) -> f64 {
        self.m * self.law.mean()
    }

    pub fn margins(&self) -> Margins {
        let light_tail = self.law.is_light_tailed().then(|| {
            let tc = self.cumulant.theta_c_compound(&self.law);
            self.cumulant.gamma_c(&self.law, tc) / tc - self.premium
        });
        Margins {
            net_profit: self.premium - self.mean_outflow(),
            light_tail,
        }
    }

    fn check_net_profit(&self) -> Result<()> {
        if self.premium > self.mean_outflow() {
            Ok(())
        } else {
            Err(Error::NetProfit {
                premium: self.premium,
                mean_outflow: self.mean_outflow(),
            })
        }
    }

    /// `θ†`, the positive root of `Γ_C(θ) = pθ`.
    pub fn lundberg_exponent(&self) -> Result<f64> {
        if !self.law.is_light_tailed() {
            return Err(Error::LightTailRequired(self.law.name().into()));
        }
        self.check_net_profit()?;
        let tc = self.cumulant.theta_c_compound(&self.law);
        let g = |t: f64| self.cumulant.gamma_c(&self.law, t) - self.premium * t;
        let upper = self.cumulant.gamma_c(&self.law, tc) / tc;
        if !(self.premium < upper) {
            return Err(Error::PremiumTooLarge {
                premium: self.premium,
                upper,
            });
        }
        let (mut lo, mut hi) = (0.0, tc);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = if g(hi).abs() < g(lo).abs() || lo == 0.0 { hi } else { lo };
        if g(root).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "Lundberg equation residual {} at θ = {root}",
                g(root)
            )));
        }
        Ok(root)
    }

    /// `1/(Γ′_C(θ†) − p)`, where the finite-horizon rate meets `θ†`.
    pub fn knee(&self) -> Result<f64> {
        let theta = self.lundberg_exponent()?;
        Ok(1.0 / (self.cumulant.gamma_c_prime(&self.law, theta) - self.premium))
    }

    /// `w(z)`: `z I_C(1/z + p)` below the knee, `θ†` beyond it. Non-increasing
    /// in `z`.
    pub fn finite_horizon_rate(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::InvalidParameter(format!("z must be positive, got {z}")));
        }
        let theta = self.lundberg_exponent()?;
        let knee = 1.0 / (self.cumulant.gamma_c_prime(&self.law, theta) - self.premium);
        if z >= knee {
            Ok(theta)
        } else {
            Ok(z * self.cumulant.rate_ic(&self.law, 1.0 / z + self.premium))
        }
    }

    /// Subexponential asymptote `u ↦ c·B̄₀(u)`.
    pub fn heavy_tail_asymptote(&self, horizon: Horizon) -> Result<HeavyTailAsymptote> {
        if self.law.is_light_tailed() {
            return Err(Error::HeavyTailRequired(self.law.name().into()));
        }
        self.check_net_profit()?;
        let load = self.mean_outflow();
        let base = load / (self.premium - load);
        let factor = match horizon {
            Horizon::Infinite => 1.0,
            Horizon::Finite(t) => {
                let drift = 1.0 - load / self.premium;
                match self.law {
                    // B̄ ∈ R(−α−1) with α one less than the Pareto index
                    ClaimLaw::Pareto { alpha, .. } => {
                        let a = alpha - 1.0;
                        1.0 - (1.0 + drift * t / a).powf(-a)
                    }
                    _ => -(-drift * t).exp_m1(),
                }
            }
        };
        Ok(HeavyTailAsymptote {
            constant: base * factor,
            law: self.law.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeavyTailAsymptote {
    pub constant: f64,
    pub law: ClaimLaw,
}

impl HeavyTailAsymptote {
    pub fn eval(&self, u: f64) -> f64 {
        self.constant * self.law.integrated_tail(u).expect("heavy-tailed law")
    }
}

/// Binomial Monte Carlo estimate of a ruin probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuinEstimate {
    pub u: f64,
    pub horizon: Horizon,
    /// Simulated time span: `uz` for finite horizons, the truncation time
    /// for the infinite one.
    pub simulated_until: f64,
    pub psi: f64,
    pub se: f64,
    /// Mean of `e^{−θ†·R}` over surviving paths at the truncation time, an
    /// estimate of the unsimulated ruin mass; light tails and infinite
    /// horizon only.
    pub tail_bound: Option<f64>,
}

/// Truncation time of the infinite horizon: `max(50/(p − mE[C₁]), 20u/p)`,
/// raised to `u²/(p − mE[C₁])` for heavy-tailed claims, whose unsimulated
/// ruin mass decays only polynomially in the span.
pub fn truncation_time(model: &RiskModel, u: f64) -> f64 {
    let slack = model.premium - model.mean_outflow();
    let drift_time = if slack > 0.0 { 50.0 / slack } else { 0.0 };
    let mut t = drift_time.max(20.0 * u / model.premium);
    if !model.law.is_light_tailed() && slack > 0.0 {
        t = t.max(u * u / slack);
    }
    t.max(1.0)
}

/// Ruin probabilities for several initial reserves from one set of paths.
pub fn simulate_ruin_curve(
    model: &RiskModel,
    reserves: &[f64],
    horizon: Horizon,
    n_reps: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<RuinEstimate>> {
    if n_reps == 0 {
        return Err(Error::InvalidParameter("at least one replication is required".into()));
    }
    let spans: Vec<f64> = reserves
        .iter()
        .map(|&u| match horizon {
            Horizon::Infinite => truncation_time(model, u),
            Horizon::Finite(z) => u * z,
        })
        .collect();
    let t_max = spans.iter().copied().fold(0.0, f64::max);
    let theta = match horizon {
        Horizon::Infinite if model.law.is_light_tailed() => model.lundberg_exponent().ok(),
        _ => None,
    };
    let seq = model.arrival();
    let p = model.premium;
    let per_path = replicate_with(seed, n_reps, |stream| -> Result<Vec<(bool, f64)>> {
        let mut rng = stream.rng();
        if t_max <= 0.0 {
            return Ok(reserves.iter().map(|u| (*u <= 0.0, 0.0)).collect());
        }
        let log = simulate_branching_with(seq, t_max, &mut rng, tol)?;
        // running maximum of S − pt at claim instants
        let mut times = Vec::with_capacity(log.events.len());
        let mut totals = Vec::with_capacity(log.events.len());
        let mut peaks = Vec::with_capacity(log.events.len());
        let mut total = 0.0;
        let mut peak = f64::NEG_INFINITY;
        for e in &log.events {
            total += model.law.sample(&mut rng);
            peak = f64::max(peak, total - p * e.time);
            times.push(e.time);
            totals.push(total);
            peaks.push(peak);
        }
        let mut out = Vec::with_capacity(reserves.len());
        for (&u, &span) in reserves.iter().zip(&spans) {
            let k = times.partition_point(|s| *s <= span);
            let (ruined, claimed) = if k == 0 {
                (false, 0.0)
            } else {
                (peaks[k - 1] >= u, totals[k - 1])
            };
            out.push((ruined, u + p * span - claimed));
        }
        Ok(out)
    });
    let per_path: Vec<Vec<(bool, f64)>> = per_path.into_iter().collect::<Result<_>>()?;
    let n = n_reps as f64;
    Ok(reserves
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let hits = per_path.iter().filter(|row| row[i].0).count() as f64;
            let psi = hits / n;
            let tail_bound = theta.map(|th| {
                per_path
                    .iter()
                    .filter(|row| !row[i].0)
                    .map(|row| (-th * row[i].1.max(0.0)).exp())
                    .sum::<f64>()
                    / n
            });
            RuinEstimate {
                u,
                horizon,
                simulated_until: spans[i],
                psi,
                se: (psi * (1.0 - psi) / n).sqrt(),
                tail_bound,
            }
        })
        .collect())
}

/// Single-reserve ruin estimate.
pub fn simulate_ruin(
    model: &RiskModel,
    horizon: Horizon,
    n_reps: usize,
    seed: u64,
    tol: f64,
) -> Result<RuinEstimate> {
    Ok(simulate_ruin_curve(model, &[model.initial_reserve], horizon, n_reps, seed, tol)?
        .pop()
        .unwrap())
}
