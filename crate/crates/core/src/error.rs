use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters, out-of-range indices, missing capabilities.
    #[error("configuration error: {0}")]
    Config(String),
    /// A state or evaluation produced NaN or infinity.
    #[error("non-finite value {context}")]
    Numerics { context: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn check_finite(values: &[f64], context: impl FnOnce() -> String) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerics { context: context() })
    }
}
