//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

/// Failure raised by a core operation when its input contract is violated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Two objects that must agree on a dimension do not.
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },
    /// A scalar argument is outside its admissible range.
    Domain {
        context: &'static str,
        detail: String,
    },
    /// An input tensor contains a NaN or infinite entry.
    NonFinite { context: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                context,
                expected,
                actual,
            } => write!(
                f,
                "shape mismatch in {context}: expected {expected}, got {actual}"
            ),
            Error::Domain { context, detail } => {
                write!(f, "domain error in {context}: {detail}")
            }
            Error::NonFinite { context } => {
                write!(f, "non-finite value in {context}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
