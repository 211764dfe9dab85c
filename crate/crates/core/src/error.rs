use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("unknown point {0}")]
    UnknownPoint(usize),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("exponent value {value} at point {point} is outside the domain {domain}")]
    ExponentDomain {
        point: usize,
        value: f64,
        domain: &'static str,
    },

    #[error("1/p - 1/q is not constant: max deviation {deviation:e}")]
    EtaNotConstant { deviation: f64 },

    #[error("eta = {0} lies outside [0, 1)")]
    EtaOutOfRange(f64),

    #[error("weight value {value} at point {point} is not a finite positive number")]
    NonPositiveWeight { point: usize, value: f64 },

    #[error("overflow computing {what} at point {point}")]
    Overflow { what: &'static str, point: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generation {k} outside [{min}, {max}]")]
    GenerationOutOfRange { k: i32, min: i32, max: i32 },

    #[error("grid construction failed: {0}")]
    GridConstruction(String),

    #[error("stack base a = {a} must exceed C_CZ = {c_cz}")]
    StackBase { a: f64, c_cz: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("no cases")]
    NoCases,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
