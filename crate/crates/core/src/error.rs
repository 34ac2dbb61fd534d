use thiserror::Error;

use crate::spectrum::PositivityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coupling matrix is not positive definite (unstable background): {0}")]
    NotPositiveDefinite(PositivityReport),

    #[error("characteristic polynomial in gamma form is undefined at h = 0")]
    ZeroCrossCoupling,

    #[error("components {indices:?} do not share a common (rho0*g, rho0) pair")]
    NotDegenerate { indices: Vec<usize> },

    #[error(
        "branch {branch} has a repeated sound speed (multiplicity {multiplicity}); \
         its dynamics is a coupled KdV system, which is not supported"
    )]
    DegenerateBranch { branch: i32, multiplicity: usize },

    #[error("branch {branch} out of range for {n} components")]
    BranchOutOfRange { branch: i32, n: usize },

    #[error(
        "branch has vanishing nonlinearity (B = {nonlinearity:e}); no soliton exists, \
         use the linear KdV evolution instead"
    )]
    LinearBranch { nonlinearity: f64 },

    #[error("lost track of eigenpair branch at h = {h}: {reason}")]
    BranchTrackingLost { h: f64, reason: String },

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("integration failed at step {step}: {reason}")]
    IntegrationFailure { step: usize, reason: String },

    #[error("density {value:e} at sample {index} of species {species} is not positive")]
    NonPositiveDensity {
        species: usize,
        index: usize,
        value: f64,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::InvalidParameter { .. }
            | Error::StabilityViolation { .. }
            | Error::BranchOutOfRange { .. }
            | Error::DegenerateBranch { .. }
            | Error::LinearBranch { .. }
            | Error::NotDegenerate { .. }
            | Error::Unsupported(_)
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::NotPositiveDefinite(_)
            | Error::ZeroCrossCoupling
            | Error::BranchTrackingLost { .. }
            | Error::IntegrationFailure { .. }
            | Error::NonPositiveDensity { .. } => 3,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
