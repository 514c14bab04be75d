use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("link distance must be positive and finite, got {0} km")]
    NonPositiveDistance(f64),
    #[error("invalid channel parameter: {0}")]
    InvalidParam(&'static str),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported scenario format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("dimension mismatch in {what}: expected {expected}, got {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed conic program: {0}")]
    Malformed(String),
    #[error("normal equations are not positive definite (linearly dependent constraints?)")]
    Factorization,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnumerationError {
    #[error("exhaustive search needs {required:.3e} nodes, above the limit of {limit:.3e}")]
    BudgetExceeded { required: f64, limit: f64 },
}

/// Failure of the relax-and-refine pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("parsing TOML: {0}")]
    Toml(#[from] toml::de::Error),
}
