//! Error types, one enum per layer, plus a crate-level umbrella.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed rational `{0}`")]
    Rational(String),
    #[error("malformed document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("scalar is not invertible: {0}")]
    NotInvertible(String),
    #[error("tau power {power} exceeds the truncation bound {bound}")]
    TauOverflow { power: u32, bound: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("exponent {exponent} falls outside the window [{min}, {max}]")]
    WindowOverflow { exponent: String, min: String, max: String },
    #[error("log power {power} exceeds the declared bound {bound}")]
    LogBoundExceeded { power: u32, bound: u32 },
    #[error("series are expanded in different regions")]
    RegionMismatch,
    #[error("series use different variables or branches")]
    VariableMismatch,
    #[error("cleared correlation is not a Laurent polynomial: {0}")]
    NotPolynomial(String),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("invalid algebra spec: {0}")]
    InvalidSpec(String),
    #[error("unknown built-in algebra `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModuleError {
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("relation mixes slots: {0}")]
    InconsistentGrading(String),
    #[error("seed map is not equivariant: {0}")]
    NotEquivariant(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Module(#[from] ModuleError),
}

impl Error {
    /// Stable machine-readable kind, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Scalar(ScalarError::NotInvertible(_)) => "not_invertible",
            Error::Scalar(ScalarError::TauOverflow { .. }) => "tau_overflow",
            Error::Series(SeriesError::NotPolynomial(_)) => "not_polynomial",
            Error::Series(SeriesError::WindowOverflow { .. }) => "window_overflow",
            Error::Series(_) => "series",
            Error::Algebra(_) => "invalid_spec",
            Error::Module(ModuleError::NotEquivariant(_)) => "not_equivariant",
            Error::Module(ModuleError::InconsistentGrading(_)) => "inconsistent_grading",
            Error::Module(ModuleError::Precondition(_)) => "precondition",
            Error::Module(_) => "module",
        }
    }
}
