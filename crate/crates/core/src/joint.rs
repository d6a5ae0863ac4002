//! Joint position estimation.
//!
//! Two linear estimators are provided:
//! - overlapping views: both cameras are posed in a shared world frame and
//!   the joint is the point whose coordinates stay constant in both camera
//!   frames, `R_AW^T O_A - R_BW^T O_B = R_AW^T T_AW - R_BW^T T_BW`;
//! - fixed joint: a single ego sequence rotating about a joint that stays put
//!   in the reference frame, `(R^i - I) O = -T^i`.
//!
//! Both are solved by SVD least squares. Rank deficiency means the motion
//! does not pin the joint down, which [`check_degeneracy_fixed`] and
//! [`check_degeneracy_overlapping`] classify.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{CalibError, Result};
use crate::linalg::{solve_least_squares, Spectrum};
use crate::se3::{Frame, Point3};
use crate::sequence::{check_aligned, MotionSequence};

#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    /// Joint in camera A's body frame (or the single camera's, for the
    /// fixed-joint estimator).
    pub o_a: Point3,
    /// Joint in camera B's body frame, when estimated.
    pub o_b: Option<Point3>,
    pub residual_rms: f64,
    pub min_singular_value: f64,
    pub condition_number: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Unique,
    /// Exactly one null direction: every point on a line is a solution.
    RotationalAxis,
    Underdetermined,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Unique => "unique",
            Verdict::RotationalAxis => "rotational_axis",
            Verdict::Underdetermined => "underdetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    pub rank_estimate: usize,
    pub full_rank: usize,
    pub null_space_basis: Vec<DVector<f64>>,
    pub verdict: Verdict,
}

impl DegeneracyReport {
    fn from_spectrum(spectrum: &Spectrum) -> Self {
        let full_rank = spectrum.singular_values.len();
        let rank_estimate = spectrum.rank();
        let null_space_basis = spectrum.null_space();
        let verdict = match full_rank - rank_estimate {
            0 => Verdict::Unique,
            1 => Verdict::RotationalAxis,
            _ => Verdict::Underdetermined,
        };
        DegeneracyReport {
            rank_estimate,
            full_rank,
            null_space_basis,
            verdict,
        }
    }
}

fn require_motions(seq: &MotionSequence, required: usize) -> Result<()> {
    if seq.len() < required {
        return Err(CalibError::TooFewMotions {
            required,
            got: seq.len(),
        });
    }
    Ok(())
}

fn overlapping_system(a: &MotionSequence, b: &MotionSequence) -> Result<(DMatrix<f64>, DVector<f64>)> {
    a.require_frame(Frame::World)?;
    b.require_frame(Frame::World)?;
    check_aligned(a, b)?;
    let n = a.len();
    let mut m = DMatrix::zeros(3 * n, 6);
    let mut rhs = DVector::zeros(3 * n);
    for (i, ((_, pa), (_, pb))) in a.poses().iter().zip(b.poses()).enumerate() {
        let rat = pa.rotation.transpose();
        let rbt = pb.rotation.transpose();
        m.fixed_view_mut::<3, 3>(3 * i, 0).copy_from(rat.matrix());
        m.fixed_view_mut::<3, 3>(3 * i, 3).copy_from(&(-rbt.matrix()));
        let r = rat.rotate(&pa.translation) - rbt.rotate(&pb.translation);
        rhs.fixed_rows_mut::<3>(3 * i).copy_from(&r);
    }
    Ok((m, rhs))
}

fn fixed_system(seq: &MotionSequence) -> Result<(DMatrix<f64>, DVector<f64>)> {
    seq.require_frame(Frame::EgoInit)?;
    let n = seq.len();
    let mut m = DMatrix::zeros(3 * n, 3);
    let mut rhs = DVector::zeros(3 * n);
    for (i, (_, p)) in seq.poses().iter().enumerate() {
        m.fixed_view_mut::<3, 3>(3 * i, 0)
            .copy_from(&(p.rotation.matrix() - Matrix3::identity()));
        rhs.fixed_rows_mut::<3>(3 * i).copy_from(&(-p.translation));
    }
    Ok((m, rhs))
}

fn rms(m: &DMatrix<f64>, x: &DVector<f64>, rhs: &DVector<f64>) -> f64 {
    let r = m * x - rhs;
    (r.norm_squared() / r.len().max(1) as f64).sqrt()
}

fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, Spectrum)> {
    let (x, spectrum) = solve_least_squares(m, rhs);
    let rank = spectrum.rank();
    let required = m.ncols();
    if rank < required {
        return Err(CalibError::Degenerate { rank, required });
    }
    Ok((x, spectrum))
}

/// Joint position in both camera frames from world-referenced poses.
pub fn estimate_joint_overlapping(a: &MotionSequence, b: &MotionSequence) -> Result<JointEstimate> {
    require_motions(a, 2)?;
    let (m, rhs) = overlapping_system(a, b)?;
    let (x, spectrum) = solve(&m, &rhs)?;
    Ok(JointEstimate {
        o_a: Point3::new(x[0], x[1], x[2]),
        o_b: Some(Point3::new(x[3], x[4], x[5])),
        residual_rms: rms(&m, &x, &rhs),
        min_singular_value: spectrum.min(),
        condition_number: spectrum.condition_number(),
    })
}

/// Joint position in the camera frame from an ego sequence rotating about a
/// stationary joint.
pub fn estimate_joint_fixed(seq: &MotionSequence) -> Result<JointEstimate> {
    require_motions(seq, 2)?;
    let (m, rhs) = fixed_system(seq)?;
    let (x, spectrum) = solve(&m, &rhs)?;
    Ok(JointEstimate {
        o_a: Point3::new(x[0], x[1], x[2]),
        o_b: None,
        residual_rms: rms(&m, &x, &rhs),
        min_singular_value: spectrum.min(),
        condition_number: spectrum.condition_number(),
    })
}

/// Sum of squared residuals of the fixed-joint system at `o`.
pub fn fixed_joint_cost(seq: &MotionSequence, o: &Point3) -> f64 {
    seq.poses()
        .iter()
        .map(|(_, p)| (p.rotation.rotate(o) - o + p.translation).norm_squared())
        .sum()
}

/// Rank diagnostic for the fixed-joint system.
pub fn check_degeneracy_fixed(seq: &MotionSequence) -> Result<DegeneracyReport> {
    let (m, _) = fixed_system(seq)?;
    Ok(DegeneracyReport::from_spectrum(&Spectrum::of(&m)))
}

/// Rank diagnostic for the stacked overlapping-view system.
pub fn check_degeneracy_overlapping(a: &MotionSequence, b: &MotionSequence) -> Result<DegeneracyReport> {
    let (m, _) = overlapping_system(a, b)?;
    Ok(DegeneracyReport::from_spectrum(&Spectrum::of(&m)))
}
