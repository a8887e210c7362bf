use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or operation argument violates its constraint.
    #[error("invalid `{key}`: {constraint}")]
    Invalid { key: String, constraint: String },

    /// The model has no finite answer for these parameters.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("no crossing in [{lo_mw} mW, {hi_mw} mW]: {detail}")]
    NoCrossing {
        lo_mw: f64,
        hi_mw: f64,
        detail: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid { .. })
    }

    /// Process exit status: 2 for bad input, 3 when the numerics fail.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. } | Error::Io { .. } | Error::Csv(_) => 2,
            Error::Degenerate(_) | Error::NoCrossing { .. } | Error::Numerical(_) => 3,
        }
    }
}
