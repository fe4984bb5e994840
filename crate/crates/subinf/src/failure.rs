use std::fmt;
use std::path::Path;

/// A failed command, classified by process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Bad configuration, arguments or input files. Exit code 2.
    Config(String),
    /// A solve finished without meeting its tolerances. Exit code 3.
    NonConvergence(String),
    /// A verification check or acceptance criterion failed. Exit code 4.
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::NonConvergence(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        Failure::Config(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::NonConvergence(m) => write!(f, "not converged: {m}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<subinf_core::Error> for Failure {
    fn from(e: subinf_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}
