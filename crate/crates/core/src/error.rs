use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed hamiltonian file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported format version {0}")]
    FormatVersion(u32),

    #[error("illegal Pauli character '{ch}' in \"{pauli}\"")]
    IllegalPauli { pauli: String, ch: char },

    #[error("pauli string \"{pauli}\" has length {len}, expected {expected}")]
    PauliLength {
        pauli: String,
        len: usize,
        expected: usize,
    },

    #[error("duplicate pauli string \"{0}\"")]
    DuplicatePauli(String),

    #[error("hamiltonian has no terms")]
    EmptyTerms,

    #[error("non-finite coefficient on term \"{0}\"")]
    NonFiniteCoeff(String),

    #[error("{n_qubits} qubits exceeds the dense simulation cap of {cap}")]
    TooManyQubits { n_qubits: usize, cap: usize },

    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("gate targets must be distinct")]
    RepeatedTarget,

    #[error("invalid bitstring \"{0}\"")]
    InvalidBitstring(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in flow layer {layer}")]
    NonFinite { layer: usize },

    #[error("marginal inversion did not converge (target {target:e})")]
    RootFinding { target: f64 },

    #[error("context term order does not match the model's family order")]
    ContextMismatch,

    #[error("non-finite energy {energy} for context {context}")]
    NonFiniteEnergy { energy: f64, context: usize },

    #[error("regularized metric is singular")]
    SingularMetric,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
