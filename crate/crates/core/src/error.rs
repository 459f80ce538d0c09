use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// The variants map onto the CLI exit-code taxonomy: configuration and
/// geometry problems are user errors (exit 2), solver and dependency
/// failures are numerical errors (exit 3).
#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver error: {message} (final residual {residual:e})")]
    Solver { message: String, residual: f64 },

    #[error("dependency error: {0}")]
    Dependency(String),

    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub fn solver(message: impl Into<String>, residual: f64) -> Self {
        LabError::Solver {
            message: message.into(),
            residual,
        }
    }

    /// Short machine-readable kind tag used in JSON diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Config(_) => "config",
            LabError::Geometry(_) => "geometry",
            LabError::Precondition(_) => "precondition",
            LabError::Solver { .. } => "solver",
            LabError::Dependency(_) => "dependency",
            LabError::Diagnostic(_) => "diagnostic",
            LabError::Io(_) => "io",
            LabError::Json(_) => "json",
            LabError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
