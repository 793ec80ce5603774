use thiserror::Error;

/// Errors raised across the simulation, cutting and protocol layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("duplicate qubit index {0} in target list")]
    DuplicateTarget(usize),
    #[error("gate arity {0} unsupported (1 or 2 qubits only)")]
    Arity(usize),
    #[error("matrix for gate `{name}` is not unitary (deviation {deviation:.3e})")]
    NotUnitary { name: String, deviation: f64 },
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("empty qubit set")]
    EmptyKeep,
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{name}` expects {expected} parameter(s), found {found}")]
    GateParams {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("gate `{0}` requires an explicit matrix")]
    MissingMatrix(String),
    #[error("gate on party {party} targets qubit {index} outside its {size}-qubit register")]
    CrossesPartition {
        party: char,
        index: usize,
        size: usize,
    },
    #[error("malformed circuit document: {0}")]
    Document(String),
    #[error("malformed observable `{spec}`: {reason}")]
    Observable { spec: String, reason: String },
    #[error("observable `{0}` is not a single Pauli product")]
    NonProductObservable(String),
    #[error("cut plan does not match circuit: {0}")]
    PlanMismatch(String),
    #[error("missing branch {0}")]
    MissingBranch(String),
    #[error("total trace {0} deviates from 1 beyond tolerance")]
    TraceNotUnit(f64),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("invalid Schmidt form: {0}")]
    InvalidSchmidt(String),
    #[error("zero total weight, cannot normalize")]
    ZeroWeight,
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error("gate is not teleportable: branch mismatch norm {mismatch:.3e}")]
    NotTeleportable { mismatch: f64 },
    #[error("shot count must be at least {min}, got {got}")]
    Shots { min: u64, got: u64 },
    #[error("probability vector invalid: {0}")]
    Probability(String),
    #[error("assignment matrix ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("readout flip probability {0} outside [0, 0.5)")]
    FlipProbability(f64),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("session aborted: {0}")]
    Aborted(String),
    #[error("transport: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
