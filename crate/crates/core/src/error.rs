use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma function has a pole at {0}")]
    Pole(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point lies outside the domain: {0}")]
    OutsideDomain(String),

    #[error("grid has {0} inside cells, at least 2 are required")]
    EmptyGrid(usize),

    #[error("assembly produced an invalid weight at ({row}, {col}): {value}")]
    Assembly { row: usize, col: usize, value: f64 },

    #[error("matrix is not positive definite (n = {0})")]
    NotPositiveDefinite(usize),

    #[error("eigensolver did not converge: {0}")]
    Convergence(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("grid too coarse: component has {cells} inside cells, at least {min} required")]
    GridTooCoarse { cells: usize, min: usize },

    #[error("path {path} survived {steps} steps without leaving the domain")]
    PathBudget { path: usize, steps: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Assembly { .. }
                | Error::NotPositiveDefinite(_)
                | Error::Convergence(_)
                | Error::Degenerate(_)
                | Error::PathBudget { .. }
        )
    }
}
