//! Claim-size laws: log moment generating functions, tails, and
//! inverse-CDF sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, Normal};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::stats::adaptive_simpson;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ClaimLaw {
    Deterministic { value: f64 },
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
    /// Classical Pareto on `[scale, ∞)` with survival `(scale/x)^alpha`.
    Pareto { alpha: f64, scale: f64 },
    /// Survival `exp(−(x/scale)^shape)` with `shape < 1`.
    Weibull { shape: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl ClaimLaw {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
            }
        };
        match *self {
            ClaimLaw::Deterministic { value } => positive(value, "claim size"),
            ClaimLaw::Exponential { mean } => positive(mean, "exponential mean"),
            ClaimLaw::Gamma { shape, scale } => {
                positive(shape, "gamma shape")?;
                positive(scale, "gamma scale")
            }
            ClaimLaw::Pareto { alpha, scale } => {
                positive(scale, "pareto scale")?;
                if alpha > 1.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "pareto index must exceed 1 for a finite mean, got {alpha}"
                    )))
                }
            }
            ClaimLaw::Weibull { shape, scale } => {
                positive(scale, "weibull scale")?;
                if shape > 0.0 && shape < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "weibull shape must lie in (0, 1), got {shape}"
                    )))
                }
            }
            ClaimLaw::LogNormal { mu, sigma } => {
                positive(sigma, "lognormal sigma")?;
                if mu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("lognormal mu must be finite".into()))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClaimLaw::Deterministic { .. } => "deterministic",
            ClaimLaw::Exponential { .. } => "exponential",
            ClaimLaw::Gamma { .. } => "gamma",
            ClaimLaw::Pareto { .. } => "pareto",
            ClaimLaw::Weibull { .. } => "weibull",
            ClaimLaw::LogNormal { .. } => "lognormal",
        }
    }

    pub fn is_light_tailed(&self) -> bool {
        matches!(
            self,
            ClaimLaw::Deterministic { .. } | ClaimLaw::Exponential { .. } | ClaimLaw::Gamma { .. }
        )
    }

    /// Supremum of the interval on which the moment generating function is
    /// finite.
    pub fn mgf_abscissa(&self) -> f64 {
        match *self {
            ClaimLaw::Deterministic { .. } => f64::INFINITY,
            ClaimLaw::Exponential { mean } => 1.0 / mean,
            ClaimLaw::Gamma { scale, .. } => 1.0 / scale,
            _ => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ClaimLaw::Deterministic { value } => value,
            ClaimLaw::Exponential { mean } => mean,
            ClaimLaw::Gamma { shape, scale } => shape * scale,
            ClaimLaw::Pareto { alpha, scale } => alpha * scale / (alpha - 1.0),
            ClaimLaw::Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
            ClaimLaw::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ClaimLaw::Deterministic { .. } => 0.0,
            ClaimLaw::Exponential { mean } => mean * mean,
            ClaimLaw::Gamma { shape, scale } => shape * scale * scale,
            ClaimLaw::Pareto { alpha, scale } => {
                if alpha <= 2.0 {
                    f64::INFINITY
                } else {
                    scale * scale * alpha / ((alpha - 1.0).powi(2) * (alpha - 2.0))
                }
            }
            ClaimLaw::Weibull { shape, scale } => {
                let m = gamma(1.0 + 1.0 / shape);
                scale * scale * (gamma(1.0 + 2.0 / shape) - m * m)
            }
            ClaimLaw::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * mu + s2).exp()
            }
        }
    }

    /// Inverse CDF on `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            ClaimLaw::Deterministic { value } => value,
            ClaimLaw::Exponential { mean } => -mean * (-u).ln_1p(),
            ClaimLaw::Gamma { shape, scale } => Gamma::new(shape, 1.0 / scale)
                .expect("validated gamma law")
                .inverse_cdf(u),
            ClaimLaw::Pareto { alpha, scale } => scale * (1.0 - u).powf(-1.0 / alpha),
            ClaimLaw::Weibull { shape, scale } => scale * (-(-u).ln_1p()).powf(1.0 / shape),
            ClaimLaw::LogNormal { mu, sigma } => (mu
                + sigma * Normal::standard().inverse_cdf(u))
            .exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `B̄(x) = P(C > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            ClaimLaw::Deterministic { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
            ClaimLaw::Exponential { mean } => (-x / mean).exp(),
            ClaimLaw::Gamma { shape, scale } => {
                if x == 0.0 {
                    1.0
                } else {
                    gamma_ur(shape, x / scale)
                }
            }
            ClaimLaw::Pareto { alpha, scale } => {
                if x < scale {
                    1.0
                } else {
                    (scale / x).powf(alpha)
                }
            }
            ClaimLaw::Weibull { shape, scale } => (-(x / scale).powf(shape)).exp(),
            ClaimLaw::LogNormal { mu, sigma } => {
                if x == 0.0 {
                    1.0
                } else {
                    1.0 - Normal::new(mu, sigma).unwrap().cdf(x.ln())
                }
            }
        }
    }

    /// `B̄₀(x) = (1/E[C]) ∫_x^∞ B̄(y) dy`, the integrated-tail survival.
    pub fn integrated_tail(&self, x: f64) -> Result<f64> {
        let x = x.max(0.0);
        let mean = self.mean();
        match *self {
            ClaimLaw::Pareto { alpha, scale } => Ok(if x < scale {
                1.0 - x / mean
            } else {
                (scale / x).powf(alpha - 1.0) / alpha
            }),
            ClaimLaw::Weibull { shape, scale } => {
                let a = 1.0 / shape;
                let z = (x / scale).powf(shape);
                let upper = if z == 0.0 { 1.0 } else { gamma_ur(a, z) };
                Ok(scale * a * gamma(a) * upper / mean)
            }
            ClaimLaw::Exponential { mean } => Ok((-x / mean).exp()),
            _ => Err(Error::HeavyTailRequired(self.name().into())),
        }
    }

    /// `log E[e^{θC}]`, `+∞` outside the finite region.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        match *self {
            ClaimLaw::Deterministic { value } => theta * value,
            ClaimLaw::Exponential { mean } => {
                if theta * mean < 1.0 {
                    -(-theta * mean).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            ClaimLaw::Gamma { shape, scale } => {
                if theta * scale < 1.0 {
                    -shape * (-theta * scale).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            _ if theta > 0.0 => f64::INFINITY,
            _ => adaptive_simpson(&|u| (theta * self.quantile(u)).exp(), 0.0, 1.0, 1e-13)
                .max(f64::MIN_POSITIVE)
                .ln(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_mgf_closed_forms() {
        let e = ClaimLaw::Exponential { mean: 0.5 };
        assert_relative_eq!(e.log_mgf(0.1), (1.0f64 / 0.95).ln(), max_relative = 1e-14);
        assert_eq!(e.log_mgf(2.0), f64::INFINITY);
        assert_eq!(ClaimLaw::Deterministic { value: 1.0 }.log_mgf(0.3), 0.3);
        let p = ClaimLaw::Pareto { alpha: 1.5, scale: 1.0 };
        assert_eq!(p.log_mgf(1e-6), f64::INFINITY);
        assert_eq!(p.log_mgf(0.0), 0.0);
    }

    #[test]
    fn negative_theta_quadrature() {
        // exponential through the same quadrature path as the heavy laws
        let e = ClaimLaw::Exponential { mean: 2.0 };
        let quad = adaptive_simpson(&|u| (-0.7 * e.quantile(u)).exp(), 0.0, 1.0, 1e-13).ln();
        assert!((quad - e.log_mgf(-0.7)).abs() < 1e-9);
        let w = ClaimLaw::Weibull { shape: 0.5, scale: 1.0 };
        assert!(w.log_mgf(-0.5) < 0.0 && w.log_mgf(-0.5) > -0.5 * w.mean());
    }

    #[test]
    fn moments() {
        assert_relative_eq!(ClaimLaw::Pareto { alpha: 1.5, scale: 1.0 / 3.0 }.mean(), 1.0);
        assert_relative_eq!(ClaimLaw::Weibull { shape: 0.5, scale: 1.0 }.mean(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(ClaimLaw::Gamma { shape: 2.0, scale: 0.5 }.mean(), 1.0);
    }

    #[test]
    fn weibull_integrated_tail_matches_quadrature() {
        let w = ClaimLaw::Weibull { shape: 0.5, scale: 1.0 };
        for x in [0.0, 1.0, 5.0, 20.0] {
            // substitute y = x + v/(1−v) to map the tail to [0, 1)
            let f = |v: f64| {
                if v >= 1.0 {
                    0.0
                } else {
                    w.survival(x + v / (1.0 - v)) / (1.0 - v).powi(2)
                }
            };
            let quad = adaptive_simpson(&f, 0.0, 1.0, 1e-12) / w.mean();
            assert_relative_eq!(w.integrated_tail(x).unwrap(), quad, max_relative = 1e-7);
        }
    }

    #[test]
    fn quantiles_invert_survival() {
        let laws = [
            ClaimLaw::Exponential { mean: 0.5 },
            ClaimLaw::Gamma { shape: 2.5, scale: 0.4 },
            ClaimLaw::Pareto { alpha: 1.5, scale: 1.0 },
            ClaimLaw::Weibull { shape: 0.5, scale: 2.0 },
            ClaimLaw::LogNormal { mu: 0.1, sigma: 0.8 },
        ];
        for law in &laws {
            for u in [0.05, 0.5, 0.95] {
                assert_relative_eq!(law.survival(law.quantile(u)), 1.0 - u, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn invalid_laws() {
        assert!(ClaimLaw::Weibull { shape: 1.5, scale: 1.0 }.validate().is_err());
        assert!(ClaimLaw::Pareto { alpha: 0.9, scale: 1.0 }.validate().is_err());
        assert!(ClaimLaw::Exponential { mean: -1.0 }.validate().is_err());
    }
}
