use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("field evaluated at the source position")]
    SourceSingularity,

    #[error("Newton iteration for axial order {order} on axis {} did not converge (last iterate {last})", axis.map_or("?".to_string(), |a| a.to_string()))]
    NonConvergence {
        axis: Option<usize>,
        order: usize,
        last: Complex64,
    },

    #[error("axial orders {first} and {second} converged to the same root {root}")]
    RootCollision {
        first: usize,
        second: usize,
        root: Complex64,
    },

    #[error("mode {index:?} is resonant with the excitation (|k_n^2 - k^2| = {gap:e})")]
    NearSingularMode { index: Vec<usize>, gap: f64 },

    #[error("singular linear system at pivot {0}")]
    SingularSystem(usize),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("frequency grid is not uniform: {0}")]
    NonUniformGrid(String),

    #[error("reference signal is identically zero")]
    ZeroReference,

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches the axis index to root-finding failures.
    pub fn on_axis(self, axis: usize) -> Self {
        match self {
            Error::NonConvergence { order, last, .. } => Error::NonConvergence {
                axis: Some(axis),
                order,
                last,
            },
            e => e,
        }
    }
}
