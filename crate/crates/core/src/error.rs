use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain, metric or configuration value violates one of its invariants.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("mesh generation failed: minimum angle {min_angle_deg:.2}° below bound {bound_deg:.2}°")]
    MeshQuality { min_angle_deg: f64, bound_deg: f64 },

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("numerical failure in element {element}: {what}")]
    NumericalFailure { element: usize, what: String },

    #[error("Newton iteration did not converge at eps = {eps:e} after {iterations} iterations (last residual {last:e})")]
    NonConvergence { eps: f64, iterations: usize, last: f64, history: Vec<f64> },

    #[error("line search stagnated at eps = {eps:e} (residual {last:e})")]
    LineSearchStagnation { eps: f64, last: f64, history: Vec<f64> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("point ({x}, {y}) is outside the mesh")]
    OutsideMesh { x: f64, y: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Residual history carried by solver failures, if any.
    pub fn residual_history(&self) -> Option<&[f64]> {
        match self {
            Error::NonConvergence { history, .. } | Error::LineSearchStagnation { history, .. } => {
                Some(history)
            }
            _ => None,
        }
    }
}
