//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension n = {n} is not supported (need n >= 3)")]
    InvalidDimension { n: u32 },

    #[error("quadrature is only built for 3 <= n <= 8, got n = {n}")]
    UnsupportedQuadratureDim { n: u32 },

    #[error("necksize eps = {eps} outside (0, {eps0}]")]
    InvalidNecksize { eps: f64, eps0: f64 },

    #[error("energy H = {h} outside the attainable range [{h_min}, 0)")]
    EnergyOutOfRange { h: f64, h_min: f64 },

    #[error("non-finite field value at a quadrature node: {context}")]
    NonFiniteValue { context: String },

    #[error("period search failed: no return to w = 0 within t = {t_max}")]
    PeriodSearchFailed { t_max: f64 },

    #[error("integration failed: {0}")]
    IntegrationFailed(String),

    #[error("mode degree {degree} is elliptic (|trace| = {trace} < 2); no real indicial root")]
    EllipticMode { degree: u32, trace: f64 },

    #[error("evaluation at t = {t} is not above the singular time {t_sing}")]
    SingularTime { t: f64, t_sing: f64 },

    #[error("field evaluation requires x != 0")]
    OriginExcluded,

    #[error("configuration has no translation parameters")]
    MissingTranslations,

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid samples: {0}")]
    InvalidSamples(String),

    #[error(
        "no Fowler match: radial invariant {invariant} gives energy outside [{h_min}, 0); \
         the data has no Fowler-type singularity"
    )]
    NoFowlerMatch { invariant: f64, h_min: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
