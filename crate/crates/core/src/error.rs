use thiserror::Error;

/// Errors raised by the simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("basis mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: String, found: String },

    #[error("state invariant violated: {0}")]
    InvariantViolation(String),

    #[error("integrator step size underflow at t = {t:.6e} (h = {h:.3e}); the problem is likely stiff")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("steady state is not unique: {near_null} near-zero singular values")]
    DegenerateSteadyState { near_null: usize },

    #[error("problem too large for a dense solve: {0}")]
    TooLarge(String),

    #[error("mean spin vanishes (|<S>| = {norm:.3e}); mean direction undefined")]
    UndefinedMeanDirection { norm: f64 },

    #[error("biorthogonal basis lost accuracy: residual {residual:.3e}")]
    Conditioning { residual: f64 },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("ensemble aborted: {failed} of {total} configurations failed")]
    EnsembleFailed { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
