use thiserror::Error;

/// Errors raised by the calibration routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("roll/pitch/yaw parameterization is singular (|cos pitch| = {cos_pitch:e})")]
    GimbalLock { cos_pitch: f64 },

    #[error("matrix is not a scaled rotation (sigma_min / sigma_max = {ratio:e})")]
    DegenerateMatrix { ratio: f64 },

    #[error("matrix has non-positive determinant {det:e}")]
    NegativeDeterminant { det: f64 },

    #[error("linear system is rank deficient: rank {rank} < {required}")]
    Degenerate { rank: usize, required: usize },

    #[error("sequences are not aligned: {0}")]
    LengthMismatch(String),

    #[error("need at least {required} motions, got {got}")]
    TooFewMotions { required: usize, got: usize },

    #[error("invalid motion sequence: {0}")]
    InvalidSequence(String),

    #[error("wrong frame: expected {expected}, got {got}")]
    WrongFrame { expected: &'static str, got: &'static str },

    #[error("Levenberg-Marquardt did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("scaled and metric joint positions are not collinear ({angle_deg:.4} deg apart)")]
    NotCollinear { angle_deg: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl CalibError {
    /// Stable machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            CalibError::GimbalLock { .. } => "gimbal_lock",
            CalibError::DegenerateMatrix { .. } => "degenerate_matrix",
            CalibError::NegativeDeterminant { .. } => "negative_determinant",
            CalibError::Degenerate { .. } => "degenerate",
            CalibError::LengthMismatch(_) => "length_mismatch",
            CalibError::TooFewMotions { .. } => "too_few_motions",
            CalibError::InvalidSequence(_) => "invalid_sequence",
            CalibError::WrongFrame { .. } => "wrong_frame",
            CalibError::NoConvergence { .. } => "no_convergence",
            CalibError::NonPositiveScale(_) => "non_positive_scale",
            CalibError::NotCollinear { .. } => "not_collinear",
            CalibError::InvalidInput(_) => "invalid_input",
        }
    }
}

pub type Result<T, E = CalibError> = std::result::Result<T, E>;
