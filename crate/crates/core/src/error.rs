use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes or dimensions that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),
    /// An operation was called in the wrong order (e.g. backward before forward).
    #[error("state error: {0}")]
    State(String),
    /// A gradient contained NaN or infinity; the optimizer step was skipped.
    #[error("non-finite gradient in parameter {index} (value {value})")]
    NonFiniteGradient { index: usize, value: f64 },
    /// A loss or evaluation produced a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// The environment received a non-finite state or action.
    #[error("environment fault: {0}")]
    EnvFault(String),
    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),
    /// Demonstrations failed the expert quality gate.
    #[error("demonstration quality gate failed: {0}")]
    QualityGate(String),
    /// A trained codec was worse than the trivial mean-action predictor.
    #[error("codec rejected: {0}")]
    CodecRejected(String),
    /// Training diverged or collapsed below the random baseline.
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("cannot sample from an empty buffer")]
    EmptyBuffer,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
