use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a direction: norm {norm} differs from 1")]
    NotADirection { norm: f64 },

    #[error("unsupported dimension {0}; expected 1, 2 or 3")]
    Dimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("support leaves unit ball: center norm {center_norm} + radius {radius} > 1")]
    SupportLeavesBall { center_norm: f64, radius: f64 },

    #[error("grid violates CFL: dt {dt} > h/sqrt(n) = {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("grid half-width {extent} too small; need at least {required}")]
    GridTooSmall { extent: f64, required: f64 },

    #[error("gauge fixing not compactly supported: line integral residual {residual}")]
    GaugeNotCompact { residual: f64 },

    #[error("expansion order {0} exceeds the supported maximum 2")]
    ExpansionOrder(usize),

    #[error("instability at step {step}: non-finite value")]
    Instability { step: usize },

    #[error("boundary outside grid: point at radius {radius} needs extent > {required}")]
    BoundaryOutsideGrid { radius: f64, required: f64 },

    #[error("window outside recorded times: [{lo}, {hi}] not inside [{t0}, {t1}]")]
    WindowOutsideRecord { lo: f64, hi: f64, t0: f64, t1: f64 },

    #[error("sampling mismatch: {0}")]
    SamplingMismatch(String),

    #[error("unresolvable frequency {freq}: below minimum {min}")]
    UnresolvableFrequency { freq: f64, min: f64 },

    #[error("not compactly supported: test function reaches the boundary of Q")]
    NotCompactlySupported,

    #[error("degenerate test function: weighted norm of the wave operator vanishes")]
    DegenerateTestFunction,

    #[error("non-unit normal: norm {0}")]
    NonUnitNormal(f64),

    #[error("wrong potential form: expected {expected}")]
    WrongForm { expected: &'static str },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
