use thiserror::Error;

/// Errors raised by the simulator and the verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("fields live on different grids or frames")]
    GridMismatch,

    #[error("mapped evaluation point {point:.6} lies outside the usable box [-{half_width}, {limit:.6}]")]
    OutsideBox {
        point: f64,
        half_width: f64,
        limit: f64,
    },

    #[error("CFL violation at time {time}: dt = {dt} exceeds bound {bound}")]
    Cfl { time: f64, dt: f64, bound: f64 },

    #[error("non-finite value detected at time {time} ({what})")]
    NonFinite { time: f64, what: String },

    #[error("Picard iteration does not contract; successive distances {distances:?}")]
    PicardDiverged { distances: Vec<f64> },

    #[error("fit needs at least {needed} samples in window, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("fit requires positive values, found {value} at time {time}")]
    NonPositive { time: f64, value: f64 },

    #[error("unknown experiment `{name}`; valid names: {}", valid.join(", "))]
    UnknownExperiment { name: String, valid: Vec<String> },

    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
