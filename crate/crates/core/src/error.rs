use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input: a parameter or a combination of parameters out of range.
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("orientation (0, 0) is not a direction")]
    ZeroOrientation,

    #[error("orientation ({r}, {q}) is not supported here: {reason}")]
    UnsupportedOrientation { r: i64, q: i64, reason: String },

    #[error("chain did not converge after {attempts} truncations (last L = {cells}): {reason}")]
    ChainNotConverged {
        attempts: usize,
        cells: usize,
        reason: String,
    },

    #[error("integrator failed at t = {at}: {reason}")]
    Integrator { at: f64, reason: String },

    #[error("boundary flux {flux:.3e} at t = {time}: increase L")]
    BoundaryFlux { time: f64, flux: f64 },

    #[error("eigenvector degeneracy at theta = {theta} (gap {gap:.3e})")]
    Degenerate { theta: f64, gap: f64 },

    #[error("grid must be uniform: {0}")]
    NonUniformGrid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput {
        field,
        reason: reason.into(),
    }
}
