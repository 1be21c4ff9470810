use thiserror::Error;

use crate::cavity::ModeIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode {mode} does not match a {expected} cavity")]
    DimensionMismatch { mode: ModeIndex, expected: &'static str },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid mode index: {0}")]
    InvalidMode(String),

    #[error("invalid drive: {0}")]
    InvalidDrive(String),

    #[error("ambiguous resonance for mode {mode}: candidates {candidates:?}")]
    AmbiguousResonance { mode: ModeIndex, candidates: Vec<ModeIndex> },

    #[error("slow time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("two-mode rates need distinct frequencies (got {0} for both modes)")]
    DegenerateModes(f64),

    #[error("kappa^2 = {kappa2} is outside the supported range (max {max})")]
    KappaOutOfRange { kappa2: f64, max: f64 },

    #[error("series did not converge after {iterations} terms")]
    NonConvergence { iterations: usize },

    #[error("harmonic number must be odd, got {0}")]
    EvenHarmonic(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("symplectic defect {defect:.3e} exceeds bound {bound:.3e} at tau = {tau}")]
    SymplecticDefect { defect: f64, bound: f64, tau: f64 },

    #[error("unknown mode label {0}")]
    UnknownMode(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("entanglement re-entered after vanishing at tau = {died_at}, revived at tau = {revived_at}")]
    Reentry { died_at: f64, revived_at: f64 },

    #[error("sample {index} (tau = {tau}): {source}")]
    Sample {
        index: usize,
        tau: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
