use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("input width {got} does not match layer width {expected}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("label {label} is out of range for {num_labels} labels")]
    LabelOutOfRange { label: usize, num_labels: usize },

    #[error("sequence must not be empty")]
    EmptySequence,

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt model data: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;
