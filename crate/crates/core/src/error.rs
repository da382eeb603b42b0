use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("scheme is not G-stable: {0}")]
    GStabilityViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A blended state `sigma(E) v` (or a density) is not strictly positive.
    #[error("positivity violated for species {species} at node {node} (value {value:e})")]
    Positivity {
        species: usize,
        node: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular Jacobian (zero pivot in column {column})")]
    SingularJacobian { column: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("damping exhausted after {halvings} step halvings in Newton iteration {iteration} (residual {residual:e})")]
    PositivityTrap {
        iteration: usize,
        halvings: usize,
        residual: f64,
    },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run with tau = {tau:e} failed: {source}")]
    StudyRun {
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the nonlinear solve (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::Positivity { .. }
            | Error::SingularJacobian { .. }
            | Error::NonConvergence { .. }
            | Error::PositivityTrap { .. } => true,
            Error::Step { source, .. } | Error::StudyRun { source, .. } => {
                source.is_solver_failure()
            }
            _ => false,
        }
    }
}
