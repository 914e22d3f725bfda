use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("link index {index} out of range for a chain with {links} links")]
    LinkIndexOutOfRange { index: usize, links: usize },

    #[error("offset {offset} m outside link {index} of length {length} m")]
    OffsetOutOfRange {
        index: usize,
        offset: f64,
        length: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// The task Jacobian is rank deficient and no damping was requested.
    #[error("singular task: smallest singular value {sigma_min:e} below tolerance")]
    SingularTask { sigma_min: f64 },

    #[error("numerical blow-up at t = {time} s (joint speed {speed:e} rad/s)")]
    NumericalBlowup { time: f64, speed: f64 },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
