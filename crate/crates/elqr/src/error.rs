use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, source: std::io::Error },
    /// The file is not valid TOML, or a value has the wrong type.
    Parse { path: PathBuf, message: String },
    /// A field is present but unusable (ragged, wrong size, non-finite).
    Field { field: String, message: String },
    Usage(String),
    Core(elqr_core::Error),
}

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Field { field: field.into(), message: message.into() }
    }

    /// Process exit code: 1 for bad input, 3 for analysis failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Field { .. } | CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                elqr_core::Error::InvalidMatrix(_)
                | elqr_core::Error::InvalidDimensions(_)
                | elqr_core::Error::NotSymmetric(_)
                | elqr_core::Error::InvalidTolerance(_)
                | elqr_core::Error::InvalidArgument(_) => 1,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Parse { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Field { field, message } => write!(f, "field `{field}`: {message}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<elqr_core::Error> for CliError {
    fn from(e: elqr_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
