use thiserror::Error;

/// Errors raised by the simulator's operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqeError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("angle {radians} rad is not a point of the {grid_size}-point grid")]
    OffGrid { radians: f64, grid_size: u32 },

    #[error("grid angle belongs to a {found}-point grid, expected {expected}")]
    GridMismatch { expected: u32, found: u32 },

    #[error("eigenvalue must be +1 or -1, got {0}")]
    InvalidEigenvalue(i64),

    #[error("state carries no equilibrium tag (not a pure state)")]
    NotPure,

    #[error("state is not in equilibrium at grid index {alpha_index}")]
    NotInEquilibrium { alpha_index: u32 },

    #[error("coupling field violates the constraint (residual {residual:e})")]
    ConstraintViolated { residual: f64 },

    #[error("side {0} was already measured in this trial")]
    SideAlreadyMeasured(u8),

    #[error("invalid evolution plan: {0}")]
    InvalidPlan(String),
}

pub type Result<T> = std::result::Result<T, SqeError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SqeError {
    SqeError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
