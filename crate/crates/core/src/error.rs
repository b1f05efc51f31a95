use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants split into two families: validation failures (bad inputs or
/// violated model conditions) and numerical failures (a computation could not
/// reach its requested accuracy within its budget). The CLI maps the former to
/// exit code 2 and the latter to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "subcriticality condition violated: ρ = sup ‖γ_n‖ must be < 1, but generation {generation} has ‖γ‖ = {norm}"
    )]
    Supercritical { generation: usize, norm: f64 },

    #[error("grid step mismatch: {left} vs {right}")]
    StepMismatch { left: f64, right: f64 },

    #[error(
        "generation truncation needs M = {needed} > cap {cap}; best achievable residual bound is {achievable_bound:e}"
    )]
    TruncationCap {
        needed: usize,
        cap: usize,
        achievable_bound: f64,
    },

    #[error("kernel for generation {generation} has no non-increasing envelope (tabulated kernels cannot be thinned)")]
    NoEnvelope { generation: usize },

    #[error("only a constant baseline γ̄₀ is supported here")]
    ConstantBaselineRequired,

    #[error("no solution of x = θ + ρ(e^x − 1) for θ = {theta} beyond the tangency point {tangency}")]
    NoMinimalRoot { theta: f64, tangency: f64 },

    #[error("spectral radius of Φ is {0} ≥ 1")]
    SpectralRadius(f64),

    #[error("net profit condition violated: p = {premium} must exceed m·E[C₁] = {mean_outflow}")]
    NetProfit { premium: f64, mean_outflow: f64 },

    #[error("light-tail condition violated: p = {premium} must be below Γ_C(θ_c)/θ_c = {upper}")]
    PremiumTooLarge { premium: f64, upper: f64 },

    #[error("claim law {0} is heavy-tailed; a light-tailed law is required")]
    LightTailRequired(String),

    #[error("claim law {0} is light-tailed; a heavy-tailed law is required")]
    HeavyTailRequired(String),

    #[error("grid of {points} points exceeds the memory cap of {cap}")]
    GridBudget { points: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by inputs rather than by numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::TruncationCap { .. } | Error::GridBudget { .. } | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
