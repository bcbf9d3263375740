use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("word width {width} outside supported range {min}..={max}")]
    InvalidWidth { width: u32, min: u32, max: u32 },
    #[error("value {value} does not fit in a signed {width}-bit word")]
    OutOfRange { value: i128, width: u32 },
    #[error("coefficient set must hold at least one tap")]
    EmptyCoefficients,
    #[error(
        "format mismatch at position {index}: expected {expected}-bit word, found {found}-bit"
    )]
    FormatMismatch {
        index: usize,
        expected: u32,
        found: u32,
    },
    #[error("accumulator overflow: result does not fit in {width} bits")]
    AccumulatorOverflow { width: u32 },
    #[error(
        "accumulator would need {needed} bits, more than the {limit} bits the exact datapath carries"
    )]
    AccumulatorTooWide { needed: u32, limit: u32 },
    #[error("cannot parse {text:?} as a number: {reason}")]
    Parse { text: String, reason: &'static str },
    #[error("group size {group_size} outside supported range 1..={cap}")]
    GroupSize { group_size: usize, cap: usize },
    #[error("address {address} out of range for a {bits}-input table")]
    AddressOutOfRange { address: u32, bits: usize },
    #[error("bit position {position} out of range for {width}-bit samples")]
    BitPosition { position: u32, width: u32 },
    #[error("bit vectors differ in width ({left} vs {right})")]
    WidthMismatch { left: u32, right: u32 },
    #[error("operation needs at least {needed} operands, got {got}")]
    TooFewOperands { needed: usize, got: usize },
    #[error("inconsistent design: {0}")]
    Inconsistent(String),
    #[error("architectures disagree at output {index}: {baseline} vs {candidate}")]
    OutputMismatch {
        index: usize,
        baseline: i128,
        candidate: i128,
    },
}
