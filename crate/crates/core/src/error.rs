use thiserror::Error;

/// Errors raised by the number-format layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("unquantizable input: element {index} is not finite")]
    UnquantizableInput { index: usize },
    #[error("NaN-scaled block")]
    NanScaledBlock,
    #[error("block misalignment: {cols} columns is not a multiple of block size {block_size}")]
    BlockMisalignment { cols: usize, block_size: usize },
    #[error("empty block")]
    EmptyBlock,
    #[error("matrix holds {actual} values, expected {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        actual: usize,
    },
}

/// Errors raised by instruction encoding and the core simulator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("field {field} = {value} does not fit in {bits} bits")]
    FieldOutOfRange {
        field: &'static str,
        value: u32,
        bits: u32,
    },
    #[error("not an MXDOTP instruction: {0:#010x}")]
    NotMxdotp(u32),
    #[error("register-port violation: {reads} register-file reads, only 3 ports")]
    RegisterPortViolation { reads: usize },
    #[error("stream exhausted")]
    StreamExhausted,
    #[error("stream {0} is not configured")]
    StreamNotConfigured(usize),
    #[error("invalid stream configuration: {0}")]
    InvalidStream(String),
    #[error("write to stream-mapped register f{0}")]
    StreamRegisterWrite(u8),
    #[error("FP8 format CSR not configured")]
    FormatNotConfigured,
    #[error("memory access out of bounds at {addr:#x} ({len} bytes)")]
    OutOfBounds { addr: u64, len: usize },
    #[error("instruction not allowed inside an FREP body: {0}")]
    InvalidFrepBody(String),
    #[error("FREP body of {body} instructions runs past the end of the program")]
    TruncatedFrep { body: usize },
    #[error("invalid kernel dimensions: {0}")]
    Dimensions(String),
    #[error("format mismatch: {0}")]
    FormatMismatch(String),
    #[error("mismatched reports: {0}")]
    MismatchedReports(String),
    #[error("cycle model: {0}")]
    CycleModel(String),
}
