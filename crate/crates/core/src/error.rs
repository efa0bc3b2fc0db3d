use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside the admissible domain")]
    Domain { what: &'static str, value: f64 },

    #[error("{what}: singular point at {value}")]
    Singular { what: &'static str, value: f64 },

    #[error("{what}: no convergence after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepFailure { t: f64, h: f64 },

    #[error("mismatch does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("no classical orbit at E = {energy} in this region (threshold {threshold})")]
    NoOrbit { energy: f64, threshold: f64 },

    #[error("energy {energy} is below the threshold {threshold}")]
    BelowThreshold { energy: f64, threshold: f64 },

    #[error("cannot normalize a ladder image at zero energy")]
    ZeroEnergy,

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("superposition mixes boundary-condition sectors {0} and {1}")]
    MixedSectors(String, String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
