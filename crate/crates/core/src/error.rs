//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("matrix or scalar contains non-finite entries")]
    NonFinite,

    #[error("comparison target is identically zero")]
    ZeroOperator,

    #[error("site index {0} out of range 1..=3")]
    SiteOutOfRange(u8),

    #[error("basis projection {0} must be one of 1, 0, -1")]
    BadProjection(i8),

    #[error("discrete time l={l} out of range 0..={n}")]
    TimeStepOutOfRange { l: usize, n: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("coupling J{0}{1} is zero; two-spin term cannot be synthesized")]
    ZeroCoupling(u8, u8),

    #[error("state norm drifted to {norm} (|norm - 1| > {tol}); integration bug")]
    NormDrift { norm: f64, tol: f64 },

    #[error("free-evolution model error: {0}")]
    FreeEvolution(String),

    #[error("pulse program parse error at line {line}: {msg}")]
    ProgramParse { line: usize, msg: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
