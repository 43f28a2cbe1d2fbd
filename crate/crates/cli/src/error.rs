use std::fmt;
use std::path::Path;

use fueterlab::FueterError;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(FueterError),
    /// A verification ran but exceeded its tolerance.
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Core(e) => match e {
                FueterError::UncertifiedTruncation { .. } | FueterError::AmbiguousKernel { .. } => 2,
                FueterError::DegenerateCrossing { .. } => 3,
                FueterError::DegenerateSolution { .. } => 4,
                _ => 1,
            },
            CliError::Failed(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Failed(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<FueterError> for CliError {
    fn from(e: FueterError) -> Self {
        CliError::Core(e)
    }
}
