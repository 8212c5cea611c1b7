use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid configuration (M={m_streams}, w={word_bits}, l={shift_bits}, k={guard_bits}): {reason}")]
    InvalidConfig {
        m_streams: usize,
        word_bits: u32,
        shift_bits: u32,
        guard_bits: u32,
        reason: &'static str,
    },

    #[error("no feasible (l, k) for M={m_streams} streams in a {word_bits}-bit word")]
    Infeasible { m_streams: usize, word_bits: u32 },

    #[error("configuration is for {config_bits}-bit words but the block holds {word_bits}-bit words")]
    WordWidth { config_bits: u32, word_bits: u32 },

    #[error("value {value} at stream {stream}, position {position} is outside the admissible range ±{bound}")]
    OutOfRange {
        stream: usize,
        position: usize,
        value: i128,
        bound: i128,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stream index {index} out of bounds for {streams} streams")]
    StreamIndex { index: usize, streams: usize },

    #[error("position {index} out of bounds for streams of length {len}")]
    PositionIndex { index: usize, len: usize },

    #[error("unrecoverable: {absent} streams absent, at most one loss can be tolerated")]
    Unrecoverable { absent: usize },

    #[error("kernel not certified: worst-case output {output_bound} exceeds admissible ±{limit}")]
    Uncertified { output_bound: u128, limit: u128 },

    #[error("operand value {0} does not fit the word width")]
    OperandWidth(i128),

    #[error("operand is not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("invalid fault scenario: {0}")]
    Scenario(String),
}
