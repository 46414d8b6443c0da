use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{num_qubits} qubits exceeds the memory budget of {max_qubits} qubits")]
    Capacity { num_qubits: usize, max_qubits: usize },

    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("classical bit index {index} out of range for {num_clbits} classical bits")]
    ClbitOutOfRange { index: usize, num_clbits: usize },

    #[error("qubit {0} is used more than once in a single instruction")]
    DuplicateQubit(usize),

    #[error("classical bit {0} is written by more than one measurement")]
    ClbitReused(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("gate `{name}` expects {expected} parameter(s), got {found}")]
    GateParameters {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("matrix for `{0}` is not unitary")]
    NotUnitary(String),

    #[error("matrix is not Hermitian")]
    NotHermitian,

    #[error("measurement encountered where only unitary instructions are allowed")]
    MeasurementInUnitaryRun,

    #[error("gate applied after a measurement; only terminal measurements are supported")]
    MidCircuitMeasurement,

    #[error("measurement outcome has vanishing probability ({0:e})")]
    ZeroProbability(f64),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
