//! Error types shared across the workbench.

use thiserror::Error;

use crate::spatial::FrameId;

#[derive(Debug, Error)]
pub enum VdcError {
    #[error("frame mismatch: expected {expected:?}, got {found:?}")]
    FrameMismatch { expected: FrameId, found: FrameId },

    #[error("rotation matrix is not orthonormal (residual {residual:.3e})")]
    NonOrthonormalRotation { residual: f64 },

    #[error("matrix is not symmetric (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("adaptation step lost positive definiteness even after step guarding; dt is too large")]
    AdaptationStepFailed,

    #[error("singular joint-space inertia; inertial parameters are inconsistent")]
    SingularInertia,

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("numeric blow-up at t = {t:.4} s: {context}")]
    BlowUp { t: f64, context: String },

    #[error("phase-1 regulator did not reach the start configuration (max |e| = {max_err:.3e} rad)")]
    RegulationFailed { max_err: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VdcError>;
