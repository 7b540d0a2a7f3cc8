use thiserror::Error;

use crate::model::Role;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument or configuration field is outside its domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The requested computation does not apply to this society or method.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown scenario `{0}` (expected one of fig1, fig2, fig3, fig4, fig5)")]
    UnknownScenario(String),

    #[error("role `{0}` is absent from every row")]
    MissingRole(Role),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
