use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {what}: {detail}")]
    Shape { what: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mask entry {value} at index {index} is not 0 or 1")]
    NonBinaryMask { index: usize, value: f64 },

    #[error("NaN input at index {0}")]
    NanInput(usize),

    #[error("function is not differentiable at this point: {0}")]
    NonDifferentiable(&'static str),

    #[error("scale {sigma} is below the minimum {min}")]
    ScaleTooSmall { sigma: f64, min: f64 },

    #[error("symbol {symbol} is outside the coder alphabet")]
    SymbolOutOfRange { symbol: i32 },

    #[error("byte stream exhausted at byte {position} while decoding symbol {symbol}")]
    StreamExhausted { position: usize, symbol: usize },

    #[error("corrupt entropy-coded stream: {0}")]
    CorruptStream(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("unsupported format version {found} (expected {expected})")]
    BadVersion { expected: u8, found: u8 },

    #[error("length overrun reading {what}: need {needed} bytes at offset {offset}, have {available}")]
    LengthOverrun {
        what: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error("tensor `{name}`: {detail}")]
    TensorMismatch { name: String, detail: String },

    #[error("model hash mismatch: bitstream expects {expected:016x}, weights hash to {found:016x}")]
    HashMismatch { expected: u64, found: u64 },

    #[error("image {height}x{width} too small: {detail}")]
    ImageTooSmall {
        height: usize,
        width: usize,
        detail: String,
    },

    #[error("non-finite loss term `{0}`")]
    NonFiniteLoss(&'static str),

    #[error("ppm: {0}")]
    Ppm(String),

    #[error("training step {step}: {source}")]
    TrainStep { step: usize, source: Box<Error> },
}

pub(crate) fn shape_err(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        what,
        detail: detail.into(),
    }
}
