use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(#[from] lapal_core::Error),
    /// A run stopped by the divergence detector.
    #[error("{0}")]
    Aborted(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Format { path: path.into(), msg: msg.into() }
    }

    /// 2 usage, 3 quality gate or divergence, 4 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use lapal_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 4,
            CliError::Aborted(_) => 3,
            CliError::Core(e) => match e {
                E::Config(_) | E::UnknownEnv(_) => 2,
                E::QualityGate(_) | E::CodecRejected(_) | E::Diverged(_) | E::NonFinite(_) | E::NonFiniteGradient { .. } => 3,
                _ => 1,
            },
        }
    }
}
