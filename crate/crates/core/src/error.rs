use thiserror::Error;

/// Failures surfaced by the library. Each variant carries enough context to
/// reproduce the offending call.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("derivative order {requested} exceeds the available smoothness {available}")]
    UnsupportedOrder { requested: usize, available: usize },

    #[error("regime not covered: {0}")]
    RegimeUnsupported(String),

    #[error("integration step underflow at t = {t} (|xi| = {xi})")]
    StepUnderflow { t: f64, xi: f64 },

    #[error("integration exceeded {max_steps} steps at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("point (t = {t}, |xi| = {xi}) is outside the required zone: {detail}")]
    ZoneViolation { t: f64, xi: f64, detail: String },

    #[error("zone constant too small: {0}")]
    ZoneConstant(String),

    #[error("dichotomy condition violated: {0}")]
    Dichotomy(String),

    #[error("contraction precondition fails: tail {tail:.3e} times (C- + C+) = {product:.3e} is not below 1/2; choose a larger t0")]
    NeedsLargerT0 { tail: f64, product: f64 },

    #[error("no convergence before the horizon {horizon} (last increment {increment:.3e})")]
    Horizon { horizon: f64, increment: f64 },

    #[error("numerically singular matrix: {0}")]
    Singular(String),

    #[error("invalid fit window: {0}")]
    InvalidWindow(String),

    #[error("resolution: {0}")]
    Resolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
