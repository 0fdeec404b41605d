use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Numeric values are carried as `f64` regardless of the working precision so
/// that the error type stays independent of the scalar parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {row} sums to {sum}, expected 1")]
    NotStochastic { row: String, sum: f64 },

    #[error("row {row} has a negative or non-finite entry at column {col}")]
    BadEntry { row: String, col: String },

    #[error("boundary vertex {vertex} is not absorbing")]
    NotAbsorbing { vertex: String },

    #[error("no boundary vertex is reachable from interior vertex {vertex}")]
    DeadInterior { vertex: String },

    #[error("boundary vertex {vertex} is not reachable from the interior")]
    InactiveBoundary { vertex: String },

    #[error("the {part} vertex set is empty")]
    EmptyPart { part: &'static str },

    #[error("vertex {vertex} has zero total conductance")]
    ZeroDegree { vertex: String },

    #[error("network is not connected")]
    Disconnected,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix dimensions do not match: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular: pivot {pivot:e} below threshold {threshold:e}")]
    Singular { pivot: f64, threshold: f64 },

    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("lambda = {re}{im:+}i lies in the spectrum of the interior transition matrix")]
    LambdaInSpectrum { re: f64, im: f64 },

    #[error("closed-form and recursive Riquier towers disagree by {deviation:e}")]
    TowerMismatch { deviation: f64 },

    #[error("spectral radius {rho} of the interior matrix is not below 1")]
    SpectralRadius { rho: f64 },

    #[error("lambda = {re}{im:+}i is not an eigenvalue (nearest at distance {distance:e})")]
    NotAnEigenvalue { re: f64, im: f64, distance: f64 },

    #[error("rank decision is ambiguous: {0}")]
    IllConditioned(String),

    #[error("numeric check failed: {0}")]
    ReportedViolation(String),

    #[error("input chain is not derived from a network")]
    NotANetwork,

    #[error("F(o,{vertex}|lambda) vanishes (|F| = {magnitude:e}); lambda is not in res*")]
    NotInResStar { vertex: String, magnitude: f64 },

    #[error("additivity fails at vertex {vertex} by {deviation:e}")]
    AdditivityViolation { vertex: String, deviation: f64 },

    #[error("vertex {vertex} carries non-positive mass")]
    NonPositiveMass { vertex: String },

    #[error("not a section: {0}")]
    NotASection(String),

    #[error("lambda must be non-zero")]
    ZeroLambda,
}

impl Error {
    /// Stable variant name, used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotStochastic { .. } => "NotStochastic",
            Error::BadEntry { .. } => "BadEntry",
            Error::NotAbsorbing { .. } => "NotAbsorbing",
            Error::DeadInterior { .. } => "DeadInterior",
            Error::InactiveBoundary { .. } => "InactiveBoundary",
            Error::EmptyPart { .. } => "EmptyPart",
            Error::ZeroDegree { .. } => "ZeroDegree",
            Error::Disconnected => "Disconnected",
            Error::InvalidInput(_) => "InvalidInput",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Singular { .. } => "Singular",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::LambdaInSpectrum { .. } => "LambdaInSpectrum",
            Error::TowerMismatch { .. } => "TowerMismatch",
            Error::SpectralRadius { .. } => "SpectralRadius",
            Error::NotAnEigenvalue { .. } => "NotAnEigenvalue",
            Error::IllConditioned(_) => "IllConditioned",
            Error::ReportedViolation(_) => "ReportedViolation",
            Error::NotANetwork => "NotANetwork",
            Error::NotInResStar { .. } => "NotInResStar",
            Error::AdditivityViolation { .. } => "AdditivityViolation",
            Error::NonPositiveMass { .. } => "NonPositiveMass",
            Error::NotASection(_) => "NotASection",
            Error::ZeroLambda => "ZeroLambda",
        }
    }

    /// Errors caused by malformed input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NotStochastic { .. }
                | Error::BadEntry { .. }
                | Error::NotAbsorbing { .. }
                | Error::DeadInterior { .. }
                | Error::InactiveBoundary { .. }
                | Error::EmptyPart { .. }
                | Error::ZeroDegree { .. }
                | Error::Disconnected
                | Error::InvalidInput(_)
                | Error::DimensionMismatch(_)
                | Error::NotANetwork
                | Error::AdditivityViolation { .. }
                | Error::NonPositiveMass { .. }
                | Error::NotASection(_)
        )
    }
}
