use crate::matrix::Pivot;

/// Everything that can go wrong inside the core crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("matrix dimensions {rows}x{cols} exceed 8x8")]
    TooLarge { rows: usize, cols: usize },
    #[error("bits outside the {rows}x{cols} window are set")]
    Padding { rows: usize, cols: usize },
    #[error("pivot {0} lies outside the matrix")]
    OutOfBounds(Pivot),
    #[error("pivot {0} is on a zero entry")]
    ZeroPivot(Pivot),
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("the matrix has no nonzero entries")]
    ZeroMatrix,
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("n = {n} exceeds the supported range without an override")]
    ResourceGuard { n: usize },
    #[error("n = {n} is not supported")]
    Unsupported { n: usize },
    #[error("canonical key {bits:#018x} (n = {n}) missing from the atlas")]
    MissingKey { n: usize, bits: u64 },
    #[error("cost exceeds the 16-bit record field")]
    CostOverflow,
    #[error("pattern parse error: {0}")]
    Parse(&'static str),
    #[error("dimension mismatch: expected {expected} inputs, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    Invalid(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
