//! Calibration from ego-motions whose translations carry unknown per-camera
//! scale factors `mu_A`, `mu_B`.
//!
//! Running the linear relative-pose solver on scaled data yields a block
//! `phi_BA * R_BA` with `phi_BA = mu_B / mu_A` and a translation
//! `mu_B * T_BA`. The block is split by SVD into rotation and scale, then
//! `(roll, pitch, yaw, T_BA_hat, phi_BA)` are refined jointly.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{CalibError, Result};
use crate::lm::{minimize, LeastSquaresProblem, LmSettings};
use crate::relpose::{constraint_residual, linear_relpose_init, motion_pairs, LmDiagnostics, MotionPair};
use crate::se3::{
    euler_partials, euler_to_rotation, invert_relative_pose, orthonormalize_and_scale, rotation_to_euler,
    EulerAngles, Point3, Rotation,
};
use crate::sequence::MotionSequence;

/// Largest angle between the scaled and metric joints still considered
/// parallel.
pub const COLLINEARITY_LIMIT_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledCalibration {
    pub r_ba: Rotation,
    pub euler: EulerAngles,
    /// `mu_B / mu_A`.
    pub phi_ba: f64,
    /// `mu_B * T_BA`.
    pub t_ba_hat: Point3,
    /// `mu_A * O_A`.
    pub o_a_hat: Point3,
    pub mu_a: Option<f64>,
    pub mu_b: Option<f64>,
    /// Metric `T_BA`, available once the absolute scales are known.
    pub t_ba: Option<Point3>,
    /// Relative scale from the SVD split alone, before refinement.
    pub phi_ba_linear: f64,
    pub residual_rms: f64,
    pub initial_residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lm: LmDiagnostics,
}

impl ScaledCalibration {
    /// `(R_BA^T, -R_BA^T T_BA)` once the metric translation is known.
    pub fn relative_pose_inv(&self) -> Option<(Rotation, Point3)> {
        self.t_ba.map(|t| invert_relative_pose(&self.r_ba, &t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScaleOptions {
    /// Also refine the scaled joint. Off by default: together with `phi_BA`
    /// it leaves the cost flat along one direction.
    pub refine_joint: bool,
}

/// Refinement problem for scaled data. Parameters are
/// `[droll, dpitch, dyaw, T_hat (3), ln(phi)]`, followed by `O_A_hat (3)`
/// when the joint is refined.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pairs: Vec<MotionPair>,
    base: Rotation,
    joint: Point3,
    refine_joint: bool,
}

impl ScaledProblem {
    pub fn new(a: &MotionSequence, b: &MotionSequence, base: Rotation, joint: Point3, refine_joint: bool) -> Result<Self> {
        Ok(ScaledProblem {
            pairs: motion_pairs(a, b)?,
            base,
            joint,
            refine_joint,
        })
    }

    pub fn num_residuals(&self) -> usize {
        3 * self.pairs.len()
    }

    pub fn pack(&self, delta: &EulerAngles, t_hat: &Point3, phi: f64) -> DVector<f64> {
        let mut v = vec![delta.roll, delta.pitch, delta.yaw, t_hat.x, t_hat.y, t_hat.z, phi.ln()];
        if self.refine_joint {
            v.extend_from_slice(self.joint.as_slice());
        }
        DVector::from_vec(v)
    }

    pub fn rotation(&self, x: &DVector<f64>) -> Rotation {
        euler_to_rotation(&EulerAngles::new(x[0], x[1], x[2])) * self.base
    }

    pub fn joint(&self, x: &DVector<f64>) -> Point3 {
        if self.refine_joint {
            Point3::new(x[7], x[8], x[9])
        } else {
            self.joint
        }
    }
}

impl LeastSquaresProblem for ScaledProblem {
    fn num_params(&self) -> usize {
        if self.refine_joint {
            10
        } else {
            7
        }
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let phi = x[6].exp();
        let scaled = self.rotation(x).matrix() * phi;
        let t = Vector3::new(x[3], x[4], x[5]);
        let o = self.joint(x);
        let mut r = DVector::zeros(self.num_residuals());
        for (i, p) in self.pairs.iter().enumerate() {
            r.fixed_rows_mut::<3>(3 * i).copy_from(&constraint_residual(p, &scaled, &t, &o));
        }
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let phi = x[6].exp();
        let e = EulerAngles::new(x[0], x[1], x[2]);
        let rot = euler_to_rotation(&e).matrix() * self.base.matrix();
        let scaled = rot * phi;
        let drot = euler_partials(&e).map(|d| d * self.base.matrix() * phi);
        let o = self.joint(x);
        let mut jac = DMatrix::zeros(self.num_residuals(), self.num_params());
        for (i, p) in self.pairs.iter().enumerate() {
            let w = p.ra * o + p.ta;
            for (k, dx) in drot.iter().enumerate() {
                let col = p.rb * (dx * o) - dx * w;
                jac.fixed_view_mut::<3, 1>(3 * i, k).copy_from(&col);
            }
            jac.fixed_view_mut::<3, 3>(3 * i, 3).copy_from(&(p.rb - Matrix3::identity()));
            // d/d ln(phi) of the terms carrying phi
            let dphi = p.rb * (scaled * o) - scaled * w;
            jac.fixed_view_mut::<3, 1>(3 * i, 6).copy_from(&dphi);
            if self.refine_joint {
                jac.fixed_view_mut::<3, 3>(3 * i, 7).copy_from(&(p.rb * scaled - scaled * p.ra));
            }
        }
        jac
    }
}

pub fn calibrate_scaled(
    a_hat: &MotionSequence,
    b_hat: &MotionSequence,
    o_a_hat: &Point3,
    settings: &LmSettings,
) -> Result<ScaledCalibration> {
    calibrate_scaled_with(a_hat, b_hat, o_a_hat, settings, ScaleOptions::default())
}

pub fn calibrate_scaled_with(
    a_hat: &MotionSequence,
    b_hat: &MotionSequence,
    o_a_hat: &Point3,
    settings: &LmSettings,
    options: ScaleOptions,
) -> Result<ScaledCalibration> {
    let lin = linear_relpose_init(a_hat, b_hat, o_a_hat)?;
    let split = orthonormalize_and_scale(&lin.block).map_err(|e| match e {
        CalibError::NegativeDeterminant { det } => CalibError::NonPositiveScale(det.signum() * det.abs().cbrt()),
        other => other,
    })?;
    if split.scale <= 0.0 {
        return Err(CalibError::NonPositiveScale(split.scale));
    }
    let problem = ScaledProblem::new(a_hat, b_hat, split.rotation, *o_a_hat, options.refine_joint)?;
    let x0 = problem.pack(&EulerAngles::default(), &lin.t_ba, split.scale);
    let report = minimize(&problem, x0, settings)?;
    let x = &report.params;
    let r_ba = problem.rotation(x);
    let m = problem.num_residuals() as f64;
    Ok(ScaledCalibration {
        r_ba,
        euler: rotation_to_euler(&r_ba)?,
        phi_ba: x[6].exp(),
        t_ba_hat: Point3::new(x[3], x[4], x[5]),
        o_a_hat: problem.joint(x),
        mu_a: None,
        mu_b: None,
        t_ba: None,
        phi_ba_linear: split.scale,
        residual_rms: (report.final_cost / m).sqrt(),
        initial_residual_rms: (report.initial_cost / m).sqrt(),
        iterations: report.iterations,
        converged: report.converged(),
        lm: LmDiagnostics::from(&report),
    })
}

/// Fills the absolute scales given the joint from a metric calibration:
/// `mu_A = |O_A_hat| / |O_A|` and `mu_B = mu_A * phi_BA`.
pub fn recover_absolute_scales(calib: &ScaledCalibration, o_a_metric: &Point3) -> Result<ScaledCalibration> {
    let metric_norm = o_a_metric.norm();
    let scaled_norm = calib.o_a_hat.norm();
    if !(metric_norm > 0.0) || !(scaled_norm > 0.0) {
        return Err(CalibError::InvalidInput("joint positions must be non-zero".into()));
    }
    let cos = (calib.o_a_hat.dot(o_a_metric) / (metric_norm * scaled_norm)).clamp(-1.0, 1.0);
    let angle_deg = cos.acos().to_degrees();
    if angle_deg > COLLINEARITY_LIMIT_DEG {
        return Err(CalibError::NotCollinear { angle_deg });
    }
    let mu_a = scaled_norm / metric_norm;
    let mu_b = mu_a * calib.phi_ba;
    let mut out = calib.clone();
    out.mu_a = Some(mu_a);
    out.mu_b = Some(mu_b);
    out.t_ba = Some(calib.t_ba_hat / mu_b);
    Ok(out)
}
