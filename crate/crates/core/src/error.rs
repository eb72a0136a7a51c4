//! Error type shared by all solvers in this crate.

use thiserror::Error;

/// Errors produced by the numerical kernels and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("{what} must be nonempty")]
    Empty { what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "Schur iteration did not converge within {sweeps} sweeps \
         (off-diagonal residual {residual:.3e})"
    )]
    SchurNoConvergence { sweeps: usize, residual: f64 },

    #[error("symmetric eigenvalue iteration did not converge")]
    SymmetricEigenFailure,

    #[error("matrix is not stable: eigenvalue {re:.6e}{im:+.6e}i has nonnegative real part")]
    NotStable { re: f64, im: f64 },

    #[error("matrix is not symmetric: |m - m^T| = {asymmetry:.3e} exceeds {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error(
        "Hamiltonian eigenvalue {re:.3e}{im:+.3e}i lies within {threshold:.3e} of the \
         imaginary axis; the pair is probably not stabilizable"
    )]
    ImaginaryAxisEigenvalue { re: f64, im: f64, threshold: f64 },

    #[error("matrix sign iteration did not converge in {0} steps")]
    SignIterationNoConvergence(usize),

    #[error("Newton refinement stagnated at residual {0:.3e}")]
    NewtonStagnation(f64),

    #[error("singular matrix encountered in {0}")]
    Singular(&'static str),

    #[error("step size underflow at t = {t:.6e} (step {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("objective became non-finite at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
