use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("bisection failed to converge: {0}")]
    Convergence(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("integration produced non-finite values at t = {t}")]
    Integration { t: f64 },
    #[error("projection rank varies over the grid ({min} to {max})")]
    Rank { min: usize, max: usize },
    #[error("no admissible time on the grid: {0}")]
    EmptyRegion(String),
    #[error("no singular-value gap of at least {threshold} (best gap {best})")]
    NoGap { threshold: f64, best: f64 },
    #[error("projection norm {norm:.3e} at t = {t} exceeds the conditioning limit")]
    Conditioning { t: f64, norm: f64 },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
}
