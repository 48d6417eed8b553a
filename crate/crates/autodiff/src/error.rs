use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("backward requires a scalar output, got a {rows}x{cols} node")]
    NonScalarOutput { rows: usize, cols: usize },
    #[error("variable does not belong to this tape")]
    ForeignVar,
    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite function value {value} while perturbing coordinate {coordinate}")]
    NonFinite { coordinate: usize, value: f64 },
}
