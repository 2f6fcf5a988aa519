use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("register of {0} qubits is not supported (1..=3)")]
    UnsupportedWidth(usize),

    #[error("basis index {index} out of range for {num_qubits} qubits")]
    IndexOutOfRange { index: usize, num_qubits: usize },

    #[error("qubit {qubit} out of range for {num_qubits} qubits (qubits are numbered from 1)")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("gate {0} is not a single-qubit gate")]
    NotSingleQubit(String),

    #[error("control and target are both qubit {0}")]
    ControlIsTarget(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("amplitudes are not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("amplitude is not finite")]
    NonFinite,

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("permutation is not a bijection on 0..{0}")]
    MalformedPermutation(usize),

    #[error("need {required} test pairs but only {available} are available")]
    InsufficientTestPairs { required: usize, available: usize },

    #[error("no closed form for attack model {0}")]
    UnsupportedModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
