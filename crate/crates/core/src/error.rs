use std::fmt;

/// Position of an item inside a netlist file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Position {
    pub file: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} is {got}, cap is {cap}")]
    Capacity { what: &'static str, got: usize, cap: usize },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("{position}: {message}")]
    Config { position: Position, message: String },

    #[error("config error: {0}")]
    ConfigGeneral(String),

    #[error("analytic mode unsupported: {0}")]
    AnalyticUnsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
