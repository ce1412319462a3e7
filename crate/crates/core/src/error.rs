use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("register mismatch: {left:?} vs {right:?}")]
    RegisterMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("site {site} out of range for a register of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("site {0} listed twice")]
    DuplicateSite(usize),
    #[error("level {level} invalid on site {site}")]
    InvalidLevel { site: usize, level: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time {t} outside [0, {tau}]")]
    TimeOutOfRange { t: f64, tau: f64 },
    #[error("integration produced non-finite amplitudes at step {step}")]
    NonFinite { step: usize },
    #[error("entangling phases undefined: |c_100| vanishes")]
    DegenerateOutcome,
    #[error("evolution is not diagonal on the computational basis (off-diagonal {0:.3e})")]
    NonDiagonal(f64),
    #[error("mixture decomposition refused: residual phase {phase:.3e} on state {state}")]
    DecompositionRefused { state: &'static str, phase: f64 },
    #[error("circuit error: {0}")]
    Circuit(String),
    #[error("reset on entangled qubit {qubit} (purity {purity:.3e})")]
    EntangledReset { qubit: usize, purity: f64 },
    #[error("connectivity violation: {0}")]
    Connectivity(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("insufficient points for a fit: {0}")]
    InsufficientPoints(usize),
}
