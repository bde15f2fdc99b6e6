use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("balance tolerance {delta} is infeasible for n={n}, k={k}; minimal feasible delta is {min_delta}")]
    InfeasibleBalance {
        delta: f64,
        n: usize,
        k: usize,
        min_delta: f64,
    },
    #[error("memory bank {0} is empty")]
    EmptyBank(usize),
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }

    /// Process exit code for the command-line front end:
    /// 2 configuration, 3 data, 4 pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::Io(_) => 3,
            _ => 4,
        }
    }
}
