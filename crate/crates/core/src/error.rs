use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not line up.
    Shape {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A parameter is outside its admissible range.
    Parameter(String),
    /// An operation that needs at least one sample got none.
    EmptyDataset,
    /// The operation does not apply to this input (e.g. rotating 3-D data).
    Unsupported(String),
    /// A caller broke an API contract, such as an unlabeled row reaching a supervised loss.
    Contract(String),
    /// A loss component produced NaN or infinity.
    NonFinite { component: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, expected, got } => write!(
                f,
                "shape mismatch in {op}: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::EmptyDataset => f.write_str("dataset is empty"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite { component } => write!(f, "non-finite value in {component}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn param_err(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
