use thiserror::Error;

use crate::spectral::Frame;

pub type Result<T> = std::result::Result<T, ParaxialError>;

#[derive(Debug, Error)]
pub enum ParaxialError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid initial data: {0}")]
    InvalidData(String),

    #[error("grid of {required} nodes exceeds the budget of {allowed} nodes")]
    GridBudget { required: u64, allowed: u64 },

    #[error("field is in the {found:?} frame, expected {expected:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("nonzero amplitude at |k| = {k_abs} outside the hyperbolic cutoff (z-evolution is ill-posed there)")]
    EllipticAmplitude { k_abs: f64 },

    #[error("elliptic growth factor {growth:e} at |k| = {k_abs} exceeds the cap {cap:e}")]
    AmplitudeCap { k_abs: f64, growth: f64, cap: f64 },

    #[error("wave vector with |k|^2 = {k_sq} lies in the hyperbolic region (lambda^2 = {lambda_sq} <= 0)")]
    HyperbolicMode { k_sq: f64, lambda_sq: f64 },

    #[error("grid under-resolves the spectrum: spacing {spacing} > required {suggested}")]
    UnderResolved { spacing: f64, suggested: f64 },

    #[error("grid half-extent {k_max} does not reach the cutoff radius {cutoff}")]
    CutoffNotCovered { k_max: f64, cutoff: f64 },

    #[error("tail quadrature did not converge after {levels} outer levels")]
    TailNotConverged { levels: usize },

    #[error("energy trace too short: {len} samples, need at least {min}")]
    TraceTooShort { len: usize, min: usize },

    #[error("z_sample_count = {got} is below the minimum of {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("fit needs at least {min} points, got {got}")]
    TooFewPoints { got: usize, min: usize },

    #[error("sweep aborted at epsilon = {epsilon} after {} completed runs: {source}", completed.len())]
    SweepAborted {
        epsilon: f64,
        completed: Vec<crate::analysis::ErrorReport>,
        #[source]
        source: Box<ParaxialError>,
    },
}
