use thiserror::Error;

/// Errors raised anywhere in the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CasimirError {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("obstacles {first} and {second} overlap or touch (gap {gap:.3e})")]
    Overlap { first: usize, second: usize, gap: f64 },

    #[error("degenerate curve: speed {speed:.3e} at parameter t = {t:.6}")]
    DegenerateCurve { t: f64, speed: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Cholesky factorization failed on the diagonal block of obstacle {obstacle} at kappa = {kappa:e}")]
    CholeskyFailure { obstacle: usize, kappa: f64 },

    #[error("non-positive Fredholm determinant {det:e} at kappa = {kappa:e}")]
    NonPositiveDeterminant { det: f64, kappa: f64 },

    #[error("evaluation point ({x:.6}, {y:.6}) lies within {dist:.3e} of the boundary (threshold {threshold:.3e})")]
    Proximity { x: f64, y: f64, dist: f64, threshold: f64 },

    #[error("numerical budget exceeded: {0}")]
    Budget(String),

    #[error("Richardson extrapolation did not converge: {0}")]
    ExtrapolationDivergence(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("at kappa = {kappa:e}: {source}")]
    AtKappa {
        kappa: f64,
        #[source]
        source: Box<CasimirError>,
    },
}

impl CasimirError {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        CasimirError::Domain {
            func,
            detail: detail.into(),
        }
    }

    /// Attach the frequency at which a nested error occurred.
    pub fn at_kappa(self, kappa: f64) -> Self {
        match self {
            e @ CasimirError::AtKappa { .. } => e,
            e => CasimirError::AtKappa {
                kappa,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any frequency annotation removed.
    pub fn root(&self) -> &CasimirError {
        match self {
            CasimirError::AtKappa { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, CasimirError>;
