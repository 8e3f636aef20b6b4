use core::fmt;

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A parameter is outside its documented range.
    Config(String),
    /// Input data disagrees with its declared structure (lengths, parities).
    Data(String),
    /// A computation produced a non-finite or degenerate value at `node`.
    Numeric { node: usize, what: String },
    /// A time step left the admissible set; the caller should retry with a smaller step.
    StepRejected(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Numeric { node, what } => write!(f, "numeric error at node {node}: {what}"),
            Error::StepRejected(m) => write!(f, "step rejected: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}
