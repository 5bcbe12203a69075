use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Dimension(format!($($arg)*))
    };
}
pub(crate) use dim_err;
