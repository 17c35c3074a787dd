use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Kraus operators violate completeness (max deviation {deviation:.3e})")]
    IncompleteKraus { deviation: f64 },

    #[error("operator count {count} exceeds the tensor-power guard of {limit}")]
    OperatorOverflow { count: usize, limit: usize },

    #[error("register of {qubits} qubits exceeds the dense-simulation ceiling of {ceiling}")]
    RegisterTooLarge { qubits: usize, ceiling: usize },

    #[error("omega_1 is undefined for a noiseless channel (omega_2 = {omega2})")]
    NoiselessOmega { omega2: f64 },

    #[error("empty outcome selection")]
    EmptySelection,

    #[error("outcome not supported by the closed-form engine: {0}")]
    UnsupportedOutcome(String),

    #[error("evaluation budget exhausted before convergence")]
    BudgetExhausted,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
