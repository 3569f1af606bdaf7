use std::fmt;

use scenario_cert::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Schema { path: String, message: String },
    Io(String, std::io::Error),
    Core(Error),
    /// The report was produced but its verdict is Fail.
    ValidationFailed,
}

impl CliError {
    /// 0 ok, 1 usage/schema, 2 infeasible or assumption violated,
    /// 3 degenerate, 4 validation failed.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Schema { .. } | CliError::Io(..) => 1,
            CliError::ValidationFailed => 4,
            CliError::Core(e) => match e {
                Error::Domain(_) | Error::Dimension(_) | Error::CertificateRefused(_) => 1,
                Error::SolverFailure(_)
                | Error::AssumptionViolation { .. }
                | Error::FeasibilitySetF
                | Error::InfeasibleQuery(_)
                | Error::SampleSizeOverflow { .. } => 2,
                Error::DegenerateProblem(_) | Error::DegenerateRemoval { .. } | Error::PartialRemoval { .. } => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Schema { path, message } if path.is_empty() || path == "." => {
                write!(f, "schema error: {message}")
            }
            CliError::Schema { path, message } => write!(f, "schema error at `{path}`: {message}"),
            CliError::Io(path, e) => write!(f, "cannot read {path}: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::ValidationFailed => write!(f, "validation verdict: fail"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
