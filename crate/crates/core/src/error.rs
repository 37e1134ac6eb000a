use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid potentials a1={a1}, a2={a2}: need 0 <= a1 <= a2 < inf")]
    InvalidPotentials { a1: f64, a2: f64 },

    #[error("invalid energy band: {0}")]
    InvalidBand(String),

    #[error("s_{branch} is undefined at the branch point lambda = {lambda}")]
    BranchPoint { branch: usize, lambda: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e} after {panels} panels")]
    QuadratureNonconvergence { a: f64, b: f64, error: f64, panels: usize },

    #[error("forward transform did not converge; worst lambda = {lambda}, error {error:e}")]
    TransformNonconvergence { lambda: f64, error: f64 },

    #[error("round trip failed: relative residual {residual:e} exceeds {tolerance:e}")]
    RoundTripFailure { residual: f64, tolerance: f64 },

    #[error("point (t={t}, x={x}) is outside the light cone t > x > 0")]
    OutsideLightCone { t: f64, x: f64 },

    #[error("truncation not converged: tail fraction {tail:e} at X = {x_cut}")]
    TruncationNotConverged { x_cut: f64, tail: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("CFL violated: dt={dt} > dx={dx}")]
    Cfl { dt: f64, dx: f64 },

    #[error("domain too short: length {length} < required {required}")]
    DomainTooShort { length: f64, required: f64 },

    #[error("instability detected at step {step}: energy ratio {ratio:e}")]
    Instability { step: usize, ratio: f64 },

    #[error("unknown {kind} `{name}`; registered: {known}")]
    UnknownStrategy { kind: &'static str, name: String, known: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
