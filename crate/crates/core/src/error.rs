use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("EOS domain error: {0}")]
    EosDomain(String),

    #[error("root-find failed to converge: {0}")]
    RootFind(String),

    #[error("linear solver failed: {0}")]
    LinearSolve(String),

    #[error("Newton iteration failed: {0}")]
    Newton(String),

    #[error("positivity loss in cell {cell}: {what}")]
    Positivity { cell: usize, what: String },

    #[error("unknown case '{0}'")]
    UnknownCase(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed case file: {0}")]
    CaseFile(String),
}

pub type Result<T> = std::result::Result<T, SolverError>;
