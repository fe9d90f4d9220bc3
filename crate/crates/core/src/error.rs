use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented range.
    #[error("invalid configuration: `{field}` must satisfy {constraint} (got {value})")]
    Config {
        field: String,
        constraint: String,
        value: String,
    },

    /// The requested value lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller supplied arguments that do not fit together.
    #[error("usage error: {0}")]
    Usage(String),

    /// No allocation or calibration can reach the requested target.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error in {source_name} at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &str, constraint: &str, value: impl std::fmt::Display) -> Self {
        Error::Config {
            field: field.to_string(),
            constraint: constraint.to_string(),
            value: value.to_string(),
        }
    }
}
