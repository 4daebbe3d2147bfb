use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("tangent vector is anchored at a different base point")]
    BaseMismatch,

    #[error("non-finite value in matrix")]
    NonFinite,

    #[error("Frechet mean did not converge after {iterations} iterations (residual {residual:.3e})")]
    MeanNotConverged {
        iterations: usize,
        residual: f64,
        last: Box<crate::spd::SpdMatrix>,
    },

    #[error("at least {required} samples required, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("value {value} outside of allowed range {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("wrist position at distance {distance:.4} m is outside the reachable annulus [{min:.4}, {max:.4}]")]
    Unreachable { distance: f64, min: f64, max: f64 },

    #[error("invalid arm triangle: {0}")]
    InvalidTriangle(String),

    #[error("invalid grasp: {0}")]
    InvalidGrasp(String),

    #[error("rotation is not orthonormal (error {error:.3e})")]
    NotOrthonormal { error: f64 },

    #[error("singular velocity ellipsoid (smallest eigenvalue {min_eigenvalue:.3e})")]
    SingularEllipsoid { min_eigenvalue: f64 },

    #[error("invalid trial: {0}")]
    InvalidTrial(String),

    #[error("gmm: {0}")]
    Gmm(String),

    #[error("tracking diverged at t = {t:.4} s: spd distance {distance:.4e} exceeds {limit:.4e}")]
    Diverged { t: f64, distance: f64, limit: f64 },

    #[error("infeasible fixture: {0}")]
    Infeasible(String),

    #[error("timestep {index}: {source}")]
    AtTimestep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by numerics rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        if let Error::AtTimestep { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::MeanNotConverged { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::SingularEllipsoid { .. }
                | Error::Diverged { .. }
                | Error::Gmm(_)
                | Error::NonFinite
        )
    }
}
