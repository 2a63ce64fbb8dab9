use thiserror::Error;

/// Errors produced by the simulator, the spectral core and the tomography driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("control qubit {0} is also a target of the controlled gate")]
    ControlOverlapsTarget(usize),

    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),

    #[error("phase angle must be finite, got {0}")]
    NonFiniteAngle(f64),

    #[error("amplitudes are not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("expected {expected} amplitudes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("qubit count mismatch: circuit has {circuit}, state has {state}")]
    QubitCountMismatch { circuit: usize, state: usize },

    #[error("postselection on qubit {qubit} = {outcome} has zero probability")]
    ImpossiblePostselection { qubit: usize, outcome: u8 },

    #[error("x = {0} lies outside [-1, 1]")]
    OutsideDomain(f64),

    #[error("node count must be at least 1")]
    EmptyGrid,

    #[error("degree {degree} out of range for {p} nodes")]
    DegreeOutOfRange { degree: usize, p: usize },

    #[error("truncation order {order} must exceed smoothness order {smoothness} (and smoothness >= 1)")]
    InvalidTruncation { order: usize, smoothness: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coefficient {0:?} is missing from the estimate list")]
    MissingCoefficient(Vec<usize>),

    #[error("no valid shots remained after postselection")]
    NoValidShots,

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("unknown builtin function {0:?}")]
    UnknownBuiltin(String),

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("factor {factor} does not divide grid size {nx}x{ny}")]
    NonDivisibleFactor { factor: usize, nx: usize, ny: usize },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("non-finite value in input at position {0}")]
    NonFiniteValue(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
