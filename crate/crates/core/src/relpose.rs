//! Relative pose between the two cameras of a non-overlapping rig.
//!
//! With `H_BA` mapping camera A's reference frame into camera B's, and the
//! joint `O_A` fixed in A's body, every ego pose pair satisfies
//!
//! ```text
//! R_B^i R_BA O_A + R_B^i T_BA - R_BA R_A^i O_A - R_BA T_A^i + T_B^i - T_BA = 0
//! ```
//!
//! which is linear in the entries of `R_BA` and `T_BA`. The unconstrained
//! linear solution is projected onto SO(3) and then refined with
//! Levenberg-Marquardt over a roll/pitch/yaw delta applied to the projected
//! rotation, `T_BA` and `O_A`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{CalibError, Result};
use crate::linalg::solve_least_squares;
use crate::lm::{minimize, LeastSquaresProblem, LmReport, LmSettings};
use crate::se3::{
    compose, euler_partials, euler_to_rotation, invert, invert_relative_pose, orthonormalize_and_scale,
    rotation_to_euler, transform_point, EulerAngles, Frame, Point3, Pose, Rotation,
};
use crate::sequence::{check_aligned, MotionSequence};

/// Relative change of the refined joint, beyond which a run is flagged.
pub const JOINT_DRIFT_LIMIT: f64 = 0.2;

/// One aligned pair of ego motions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MotionPair {
    pub ra: Matrix3<f64>,
    pub ta: Vector3<f64>,
    pub rb: Matrix3<f64>,
    pub tb: Vector3<f64>,
}

pub(crate) fn motion_pairs(a: &MotionSequence, b: &MotionSequence) -> Result<Vec<MotionPair>> {
    a.require_frame(Frame::EgoInit)?;
    b.require_frame(Frame::EgoInit)?;
    check_aligned(a, b)?;
    if a.len() < 2 {
        return Err(CalibError::TooFewMotions {
            required: 2,
            got: a.len(),
        });
    }
    Ok(a.poses()
        .iter()
        .zip(b.poses())
        .map(|((_, pa), (_, pb))| MotionPair {
            ra: *pa.rotation.matrix(),
            ta: pa.translation,
            rb: *pb.rotation.matrix(),
            tb: pb.translation,
        })
        .collect())
}

/// Constraint residual for one motion pair, with `x` standing for the
/// (possibly scaled) relative rotation.
#[inline]
pub(crate) fn constraint_residual(p: &MotionPair, x: &Matrix3<f64>, t: &Vector3<f64>, o: &Vector3<f64>) -> Vector3<f64> {
    p.rb * (x * o) + p.rb * t - x * (p.ra * o) - x * p.ta + p.tb - t
}

/// Unconstrained linear solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRelpose {
    /// Estimate of `R_BA` (times the relative scale, for scaled inputs). Not
    /// orthonormal.
    pub block: Matrix3<f64>,
    pub t_ba: Point3,
    pub residual_rms: f64,
}

/// Solves the 3n x 12 linear system in the entries of `R_BA` (row-major)
/// and `T_BA`.
pub fn linear_relpose_init(a: &MotionSequence, b: &MotionSequence, o_a: &Point3) -> Result<LinearRelpose> {
    if !o_a.iter().all(|v| v.is_finite()) {
        return Err(CalibError::InvalidInput("joint position is not finite".into()));
    }
    let pairs = motion_pairs(a, b)?;
    let n = pairs.len();
    let mut m = DMatrix::zeros(3 * n, 12);
    let mut rhs = DVector::zeros(3 * n);
    for (i, p) in pairs.iter().enumerate() {
        // X v = (I kron v^T) vec_row(X)
        let w = p.ra * o_a + p.ta;
        for r in 0..3 {
            for c in 0..3 {
                for k in 0..3 {
                    // R_B X O_A: row r gets rb[r][k] * X[k][c] * O[c]
                    m[(3 * i + r, 3 * k + c)] += p.rb[(r, k)] * o_a[c];
                }
                // - X w: row r gets -X[r][c] * w[c]
                m[(3 * i + r, 3 * r + c)] -= w[c];
                m[(3 * i + r, 9 + c)] = p.rb[(r, c)] - if r == c { 1.0 } else { 0.0 };
            }
            rhs[3 * i + r] = -p.tb[r];
        }
    }
    let (x, spectrum) = solve_least_squares(&m, &rhs);
    let rank = spectrum.rank();
    if rank < 12 {
        return Err(CalibError::Degenerate { rank, required: 12 });
    }
    let residual = &m * &x - &rhs;
    Ok(LinearRelpose {
        block: Matrix3::from_row_slice(&x.as_slice()[..9]),
        t_ba: Point3::new(x[9], x[10], x[11]),
        residual_rms: (residual.norm_squared() / (3 * n) as f64).sqrt(),
    })
}

/// Nonlinear refinement problem. Parameters are
/// `[droll, dpitch, dyaw, T_BA (3), O_A (3)]` with `R_BA = M(delta) R0`.
#[derive(Debug, Clone)]
pub struct RelposeProblem {
    pairs: Vec<MotionPair>,
    base: Rotation,
}

impl RelposeProblem {
    pub fn new(a: &MotionSequence, b: &MotionSequence, base: Rotation) -> Result<Self> {
        Ok(RelposeProblem {
            pairs: motion_pairs(a, b)?,
            base,
        })
    }

    pub fn num_residuals(&self) -> usize {
        3 * self.pairs.len()
    }

    /// Packs `(R_BA, T_BA, O_A)` given that `R_BA` is the base rotation
    /// composed with the delta `delta`.
    pub fn pack(delta: &EulerAngles, t: &Point3, o: &Point3) -> DVector<f64> {
        DVector::from_vec(vec![delta.roll, delta.pitch, delta.yaw, t.x, t.y, t.z, o.x, o.y, o.z])
    }

    pub fn rotation(&self, x: &DVector<f64>) -> Rotation {
        euler_to_rotation(&EulerAngles::new(x[0], x[1], x[2])) * self.base
    }
}

impl LeastSquaresProblem for RelposeProblem {
    fn num_params(&self) -> usize {
        9
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let rot = *self.rotation(x).matrix();
        let t = Vector3::new(x[3], x[4], x[5]);
        let o = Vector3::new(x[6], x[7], x[8]);
        let mut r = DVector::zeros(self.num_residuals());
        for (i, p) in self.pairs.iter().enumerate() {
            r.fixed_rows_mut::<3>(3 * i).copy_from(&constraint_residual(p, &rot, &t, &o));
        }
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let e = EulerAngles::new(x[0], x[1], x[2]);
        let rot = euler_to_rotation(&e).matrix() * self.base.matrix();
        let drot = euler_partials(&e).map(|d| d * self.base.matrix());
        let o = Vector3::new(x[6], x[7], x[8]);
        let mut jac = DMatrix::zeros(self.num_residuals(), 9);
        for (i, p) in self.pairs.iter().enumerate() {
            let w = p.ra * o + p.ta;
            for (k, dx) in drot.iter().enumerate() {
                let col = p.rb * (dx * o) - dx * w;
                jac.fixed_view_mut::<3, 1>(3 * i, k).copy_from(&col);
            }
            jac.fixed_view_mut::<3, 3>(3 * i, 3).copy_from(&(p.rb - Matrix3::identity()));
            jac.fixed_view_mut::<3, 3>(3 * i, 6).copy_from(&(p.rb * rot - rot * p.ra));
        }
        jac
    }
}

/// Summary of an LM run, kept on every estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmDiagnostics {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub cost_increases: usize,
    pub converged: bool,
}

impl From<&LmReport> for LmDiagnostics {
    fn from(r: &LmReport) -> Self {
        LmDiagnostics {
            initial_cost: r.initial_cost,
            final_cost: r.final_cost,
            cost_increases: r.cost_increases(),
            converged: r.converged(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativePoseEstimate {
    pub r_ba: Rotation,
    pub t_ba: Point3,
    /// Roll/pitch/yaw of `r_ba`.
    pub euler: EulerAngles,
    /// `(R_BA^T, -R_BA^T T_BA)`.
    pub relative_pose_inv: (Rotation, Point3),
    /// Joint in camera A's body frame after refinement.
    pub o_a: Point3,
    pub residual_rms: f64,
    /// RMS of the refinement objective at the projected linear solution.
    pub initial_residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the refined joint moved by more than [`JOINT_DRIFT_LIMIT`] of
    /// its seed norm.
    pub joint_drift_flag: bool,
    pub lm: LmDiagnostics,
}

impl RelativePoseEstimate {
    /// An estimate holding a known calibration, e.g. ground truth.
    pub fn from_known(r_ba: Rotation, t_ba: Point3, o_a: Point3) -> Result<Self> {
        Ok(RelativePoseEstimate {
            r_ba,
            t_ba,
            euler: rotation_to_euler(&r_ba)?,
            relative_pose_inv: invert_relative_pose(&r_ba, &t_ba),
            o_a,
            residual_rms: 0.0,
            initial_residual_rms: 0.0,
            iterations: 0,
            converged: true,
            joint_drift_flag: false,
            lm: LmDiagnostics {
                initial_cost: 0.0,
                final_cost: 0.0,
                cost_increases: 0,
                converged: true,
            },
        })
    }

    /// `H_BA` as a pose.
    pub fn h_ba(&self) -> Pose {
        Pose::new(self.r_ba, self.t_ba, Frame::EgoInit)
    }
}

/// Refines an initial `(R_BA, T_BA)` together with the joint `O_A`.
///
/// A run that hits `max_iterations` is returned with `converged = false` and
/// holds the best parameters seen.
pub fn refine_relpose_lm(
    init: (Rotation, Point3),
    a: &MotionSequence,
    b: &MotionSequence,
    o_a: &Point3,
    settings: &LmSettings,
) -> Result<RelativePoseEstimate> {
    let problem = RelposeProblem::new(a, b, init.0)?;
    let x0 = RelposeProblem::pack(&EulerAngles::default(), &init.1, o_a);
    let report = minimize(&problem, x0, settings)?;
    let x = &report.params;
    let r_ba = problem.rotation(x);
    let t_ba = Point3::new(x[3], x[4], x[5]);
    let o_ref = Point3::new(x[6], x[7], x[8]);
    let m = problem.num_residuals() as f64;
    let seed_norm = o_a.norm();
    let joint_drift_flag = (o_ref - o_a).norm() > JOINT_DRIFT_LIMIT * seed_norm;
    Ok(RelativePoseEstimate {
        r_ba,
        t_ba,
        euler: rotation_to_euler(&r_ba)?,
        relative_pose_inv: invert_relative_pose(&r_ba, &t_ba),
        o_a: o_ref,
        residual_rms: (report.final_cost / m).sqrt(),
        initial_residual_rms: (report.initial_cost / m).sqrt(),
        iterations: report.iterations,
        converged: report.converged(),
        joint_drift_flag,
        lm: LmDiagnostics::from(&report),
    })
}

/// Linear initialization, projection onto SO(3) and refinement.
pub fn calibrate_relative_pose(
    a: &MotionSequence,
    b: &MotionSequence,
    o_a: &Point3,
    settings: &LmSettings,
) -> Result<RelativePoseEstimate> {
    let lin = linear_relpose_init(a, b, o_a)?;
    let split = orthonormalize_and_scale(&lin.block)?;
    refine_relpose_lm((split.rotation, lin.t_ba), a, b, o_a, settings)
}

/// Both cameras and the joint at one step, in camera A's reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: u32,
    /// Camera A at this step, mapping its coordinates into A's reference.
    pub pose_a: Pose,
    /// Camera B at this step, mapping its coordinates into A's reference.
    pub pose_b: Pose,
    pub joint_from_a: Point3,
    pub joint_from_b: Point3,
}

impl TrajectoryPoint {
    pub fn joint_gap(&self) -> f64 {
        (self.joint_from_a - self.joint_from_b).norm()
    }
}

/// Expresses both camera trajectories in camera A's reference frame,
/// starting with the reference step.
pub fn recover_trajectory(
    calib: &RelativePoseEstimate,
    a: &MotionSequence,
    b: &MotionSequence,
) -> Result<Vec<TrajectoryPoint>> {
    a.require_frame(Frame::EgoInit)?;
    b.require_frame(Frame::EgoInit)?;
    check_aligned(a, b)?;
    let h_ab = invert(&calib.h_ba());
    let o_b = transform_point(&calib.h_ba(), &calib.o_a);
    let reference = (a.reference(), Pose::identity(Frame::EgoInit), Pose::identity(Frame::EgoInit));
    let steps = std::iter::once(reference)
        .chain(a.poses().iter().zip(b.poses()).map(|((s, pa), (_, pb))| (*s, *pa, *pb)));
    Ok(steps
        .map(|(step, pa, pb)| {
            let pose_b = compose(&h_ab, &pb);
            TrajectoryPoint {
                step,
                pose_a: pa,
                pose_b,
                joint_from_a: transform_point(&pa, &calib.o_a),
                joint_from_b: transform_point(&pose_b, &o_b),
            }
        })
        .collect())
}
