use std::fmt;
use std::path::Path;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Lib(labelaug::Error),
    Config(String),
    /// Input files that do not match the expected layout.
    Schema(String),
    /// A verification suite ran to completion with failing cases.
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use labelaug::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Verify(_) => 4,
            CliError::Lib(e) => match e {
                E::Config(_) | E::Mode(_) | E::Shape(_) => 1,
                E::Parse { .. } | E::Io { .. } => 2,
                E::Numeric(_) | E::Infeasible(_) => 3,
            },
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Lib(labelaug::Error::Io { path: path.to_path_buf(), source: e })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Schema(m) => write!(f, "schema error: {m}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<labelaug::Error> for CliError {
    fn from(e: labelaug::Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
