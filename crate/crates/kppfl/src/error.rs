//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by field synthesis, the particle engine, and the
/// Eulerian reference solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A spectral density violated one of its requirements (negative
    /// energy, non-summable tail, ...).
    #[error("invalid spectrum: {0}")]
    Spectrum(String),

    /// A refinement would exceed the configured mode-count ceiling.
    #[error("mode count {requested} exceeds capacity {max}")]
    Capacity { requested: usize, max: usize },

    /// A particle position became non-finite during mutation.
    #[error("non-finite position for particle {particle} at generation {generation}, mutation {mutation}")]
    BlowUp {
        particle: usize,
        generation: usize,
        mutation: usize,
    },

    /// Fitness weights could not be normalized.
    #[error("degenerate fitness weights: {0}")]
    Degeneracy(String),

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The eigensolver did not converge within its iteration cap.
    #[error("eigensolver did not converge: residual {residual:e} after {iterations} iterations")]
    Convergence { residual: f64, iterations: usize },

    /// A grid field lost all mass (all-zero after clamping).
    #[error("degenerate grid field: {0}")]
    GridDegeneracy(String),

    /// Failure while writing an output artifact.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
