use thiserror::Error;

/// Failure modes shared by all modules.
#[derive(Debug, Error)]
pub enum VortexError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Rotation is at or below the nucleation threshold.
    #[error("no nucleation: omega0 = {omega0} does not exceed the critical value {omega1}")]
    NoNucleation { omega0: f64, omega1: f64 },

    #[error("empty lattice: no circle carries at least {min_points} points")]
    EmptyLattice { min_points: usize },

    #[error("overlapping vortex balls: points {i} and {j} are {distance} apart (radius {radius})")]
    Overlap {
        i: usize,
        j: usize,
        distance: f64,
        radius: f64,
    },

    #[error("under-resolved: {what}")]
    UnderResolved { what: String },

    /// Iterative method stopped before reaching its tolerance.
    #[error("{method} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, VortexError>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> VortexError {
    VortexError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
