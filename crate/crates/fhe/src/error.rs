use thiserror::Error;

#[derive(Debug, Error)]
pub enum FheError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter set rejected: {0}")]
    ParameterRejected(String),
    #[error("plaintext {value} out of range for plaintext modulus {modulus}")]
    PlaintextRange { value: u64, modulus: u64 },
    #[error("ciphertexts belong to different parameter sets")]
    ParamsMismatch,
    #[error("multiplicative depth limit {max} exceeded")]
    DepthExceeded { max: u8 },
    #[error("noise budget exhausted: {budget_bits:.1} bits left")]
    NoiseBudgetExhausted { budget_bits: f64 },
    #[error("decryption unreliable: {0}")]
    DecryptionUnreliable(String),
    #[error("malformed ciphertext: {0}")]
    Malformed(String),
    #[error("config parse error at line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FheError> = std::result::Result<T, E>;
