use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed rule: {0}")]
    MalformedRule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two distinct points share an image.
    #[error("map is not injective: phi({first}) = phi({second}) = {image}")]
    NotInjectiveWitness { first: u64, second: u64, image: u64 },

    #[error("preimage of {target} is undetermined: scanned 1..={horizon} without a symbolic inverse")]
    PreimageHorizonExceeded { target: u64, horizon: u64 },

    #[error("orbit of {start} under phi^{stride} revisits {value}")]
    PeriodicOrbitDetected { start: u64, stride: u64, value: u64 },

    #[error("index {index} belongs to the orbits of both {first} and {second}")]
    PartitionViolation { index: u64, first: u64, second: u64 },

    #[error("no escape threshold for k = {k} within n <= {n_max}")]
    EscapeNotFound { k: u64, n_max: u64 },

    #[error("coefficients along the orbit of {k} do not decay below {eps} within {horizon} steps")]
    NonDecayingTail { k: u64, eps: f64, horizon: usize },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("{value} lies beyond the prime-power cache (bound {bound})")]
    PrimeCacheExceeded { value: u64, bound: u64 },

    #[error("integer overflow while evaluating {0}")]
    ValueOverflow(String),
}

impl Error {
    /// Errors that end a walk early without invalidating what was seen so far.
    pub fn is_soft(&self) -> bool {
        matches!(
            self,
            Error::ValueOverflow(_) | Error::PrimeCacheExceeded { .. } | Error::PreimageHorizonExceeded { .. }
        )
    }
}
