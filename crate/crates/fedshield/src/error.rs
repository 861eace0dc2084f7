use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Reject/accept outcomes of verification routines
/// are ordinary return values, not errors; these variants cover contract
/// violations and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("key generation failed: {0}")]
    KeyGen(String),

    #[error("message out of range for the plaintext space")]
    MessageOutOfRange,

    #[error("ciphertext levels or moduli do not match")]
    LevelMismatch,

    #[error("element {index} out of range (bound {bound})")]
    ElementOutOfRange { index: usize, bound: u64 },

    #[error("vector exceeds packing capacity: {0}")]
    CapacityExceeded(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("threshold {t} exceeds share count {n}")]
    BadThreshold { t: usize, n: usize },

    #[error("need at least {t} partial decryptions, got {got}")]
    NotEnoughShares { t: usize, got: usize },

    #[error("duplicate share index {0}")]
    DuplicateShare(usize),

    #[error("model and input dimensions do not match")]
    DimensionMismatch,

    #[error("invalid neuron id {0}")]
    InvalidNeuron(usize),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("backdoor predicate failed: prover refuses to attest this model")]
    PredicateFailed,

    #[error("model values exceed the circuit's range bounds")]
    CircuitRange,

    #[error("circuit and shares are inconsistent: {0}")]
    CircuitMismatch(String),

    #[error("threshold unreachable: {live} live share holders, need {t}")]
    ThresholdUnreachable { live: usize, t: usize },

    #[error("no consistent user subset within elimination bound {0}")]
    EliminationExhausted(usize),

    #[error("aggregate/commitment consistency check failed")]
    ConsistencyFailed,

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("bad configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
