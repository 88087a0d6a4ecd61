use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or corpus contents (exit 3).
    #[error("{0}")]
    Config(String),
    /// Missing or unreadable/unwritable files (exit 2).
    #[error("{0}")]
    Io(String),
    /// `--strict` run with skipped entries (exit 2).
    #[error("{0} entries were skipped")]
    Skipped(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io(_) | CliError::Skipped(_) => 2,
        }
    }
}

impl From<blurforge::Error> for CliError {
    fn from(e: blurforge::Error) -> Self {
        use blurforge::Error as E;
        match e {
            E::Io(_) | E::MissingFile(_) | E::Codec(_) | E::Format(_) | E::MaskDimension { .. } | E::MaskNotGrayscale(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
