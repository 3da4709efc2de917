use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("{op}: point ({row}, {col}) outside {height}x{width} grid")]
    OutOfBounds {
        op: &'static str,
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("{op}: value {value} outside [{min}, {max}]")]
    ValueRange {
        op: &'static str,
        value: f32,
        min: f32,
        max: f32,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("winner-take-all: every cell is inhibited")]
    FullyInhibited,
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl core::fmt::Display, actual: impl core::fmt::Display) -> Self {
        use alloc::string::ToString;
        Error::Shape {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
