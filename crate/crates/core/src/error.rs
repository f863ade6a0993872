use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular geometry: TPA {tpa} coincides with a user")]
    SingularGeometry { tpa: usize },

    #[error("infeasible geometry: dominant eigenvalue {0:e} is not positive")]
    InfeasibleGeometry(f64),

    #[error("eigen-solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("grid search needs {evaluations} objective evaluations, above the cap of {cap}")]
    BudgetExceeded { evaluations: u128, cap: u64 },

    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("plot: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Config-level failures as opposed to numerical ones; the CLI maps these
    /// to distinct exit codes.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::Parse(_))
    }
}
