use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("synergy matrix columns are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("demonstration {0} has fewer than two samples")]
    EmptyDemo(usize),
    #[error("timestamps are not strictly increasing (sequence {0})")]
    NonMonotonicTime(usize),
    #[error("gaussian component {0} degenerated")]
    DegenerateComponent(usize),
    #[error("linear system is singular or ill-conditioned (condition estimate {0:e})")]
    SingularSystem(f64),
    #[error("covariance at point {0} is not invertible")]
    SingularCovariance(usize),
    #[error("matrix is rank deficient (condition estimate {0:e})")]
    RankDeficient(f64),
    #[error("point cloud has no three non-collinear points")]
    DegenerateCloud,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
