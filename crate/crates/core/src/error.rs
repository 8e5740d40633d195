use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("derivative order {requested} exceeds supported order {max}")]
    UnsupportedOrder { requested: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate covector: xi0 = 0")]
    DegenerateCovector,
    #[error("ray blowup at z = {z}: |xi| = {xi}")]
    RayBlowup { z: f64, xi: f64 },
    #[error("grid mismatch: {0} vs {1} points")]
    GridMismatch(usize, usize),
    #[error("numeric instability at z = {z}: norm ratio {ratio:e}")]
    Instability { z: f64, ratio: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
