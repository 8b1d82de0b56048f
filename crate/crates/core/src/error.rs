use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KppError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no Perron pair at requested resolution: {0}")]
    NoPerronPair(String),

    #[error("zero not linearly unstable: mu(0) = {mu_zero}")]
    NotLinearlyUnstable { mu_zero: f64 },

    #[error("no interior minimum of c(lambda) on [{lo}, {hi}]; minimum found at the scan edge lambda = {at}")]
    NoInteriorMinimum { lo: f64, hi: f64, at: f64 },

    #[error("subcritical speed has no real decay rates: c = {c} < c* = {c_star}")]
    SubcriticalSpeed { c: f64, c_star: f64 },

    #[error("no pulsating wave below minimal speed: c = {c} < c* = {c_star}")]
    NoSubcriticalFront { c: f64, c_star: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("blow-up: non-finite value at t = {t}")]
    BlowUp { t: f64 },

    #[error("scheme not monotone at this dt: {0}")]
    NotMonotone(String),

    #[error("level not attained: {0}")]
    LevelNotAttained(String),

    #[error("horizon {horizon} reached before shape convergence (last residual {residual:.3e})")]
    FrontNotConverged { horizon: f64, residual: f64 },

    #[error("tail underflow; shrink window: {0}")]
    TailUnderflow(String),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, KppError>;

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(KppError::InvalidInput(format!(
            "{name} is not finite ({v})"
        )))
    }
}
