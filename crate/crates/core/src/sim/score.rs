use serde::{Deserialize, Serialize};

use super::AcsGroundTruth;
use crate::joint::JointEstimate;
use crate::relpose::RelativePoseEstimate;
use crate::scale::ScaledCalibration;
use crate::se3::{rotation_to_euler, wrap_to_pi, EulerAngles, Point3, Rotation};

/// Error metrics of one estimate; absent fields were not estimated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Relative joint error (dimensionless).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err_joint: Option<f64>,
    /// Root-sum-square of wrapped roll/pitch/yaw differences, degrees.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err_rot: Option<f64>,
    /// Relative translation error (dimensionless).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err_trans: Option<f64>,
    /// Relative error of the relative scale factor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_phi: Option<f64>,
}

impl ErrorReport {
    /// Fields of `other` override those of `self` where present.
    pub fn merge(self, other: ErrorReport) -> ErrorReport {
        ErrorReport {
            err_joint: other.err_joint.or(self.err_joint),
            err_rot: other.err_rot.or(self.err_rot),
            err_trans: other.err_trans.or(self.err_trans),
            eps_phi: other.eps_phi.or(self.eps_phi),
        }
    }
}

/// `|O_A - O_A'| / (2|O_A|) + |O_B - O_B'| / (2|O_B|)`. With only one camera
/// the single relative error `|O - O'| / |O|` is returned.
pub fn err_joint(truth_a: &Point3, est_a: &Point3, b: Option<(&Point3, &Point3)>) -> f64 {
    let ea = (truth_a - est_a).norm() / truth_a.norm();
    match b {
        Some((truth_b, est_b)) => ea / 2.0 + (truth_b - est_b).norm() / (2.0 * truth_b.norm()),
        None => ea,
    }
}

/// Euler-angle error in degrees, each difference wrapped to (-180, 180].
pub fn err_rot_euler(truth: &EulerAngles, est: &EulerAngles) -> f64 {
    let d = |a: f64, b: f64| wrap_to_pi(a - b).to_degrees();
    let (dr, dp, dy) = (d(truth.roll, est.roll), d(truth.pitch, est.pitch), d(truth.yaw, est.yaw));
    (dr * dr + dp * dp + dy * dy).sqrt()
}

/// Euler-angle error between two rotations. Falls back to the geodesic angle
/// when either rotation sits exactly at the Euler singularity.
pub fn err_rot(truth: &Rotation, est: &Rotation) -> f64 {
    match (rotation_to_euler(truth), rotation_to_euler(est)) {
        (Ok(t), Ok(e)) => err_rot_euler(&t, &e),
        _ => truth.angle_to(est).to_degrees(),
    }
}

/// `|T - T'| / |T|`.
pub fn err_trans(truth: &Point3, est: &Point3) -> f64 {
    (truth - est).norm() / truth.norm()
}

/// `|phi - phi'| / |phi|`.
pub fn eps_phi(truth: f64, est: f64) -> f64 {
    (truth - est).abs() / truth.abs()
}

/// Scores a joint estimate. For single-camera estimates pass which camera it
/// belongs to; `scaled` compares against `mu * O` instead of `O`.
pub fn score_joint(est: &JointEstimate, gt: &AcsGroundTruth, camera_b: bool, scaled: bool) -> ErrorReport {
    let (sa, sb) = if scaled { (gt.mu_a, gt.mu_b) } else { (1.0, 1.0) };
    let (ta, tb) = (gt.o_a * sa, gt.o_b * sb);
    let e = match (&est.o_b, camera_b) {
        (Some(ob), _) => err_joint(&ta, &est.o_a, Some((&tb, ob))),
        (None, false) => err_joint(&ta, &est.o_a, None),
        (None, true) => err_joint(&tb, &est.o_a, None),
    };
    ErrorReport {
        err_joint: Some(e),
        ..ErrorReport::default()
    }
}

/// Joint error from separately estimated joints of both cameras.
pub fn score_joint_pair(o_a: &Point3, o_b: &Point3, gt: &AcsGroundTruth, scaled: bool) -> ErrorReport {
    let (sa, sb) = if scaled { (gt.mu_a, gt.mu_b) } else { (1.0, 1.0) };
    ErrorReport {
        err_joint: Some(err_joint(&(gt.o_a * sa), o_a, Some((&(gt.o_b * sb), o_b)))),
        ..ErrorReport::default()
    }
}

pub fn score_relpose(est: &RelativePoseEstimate, gt: &AcsGroundTruth) -> ErrorReport {
    ErrorReport {
        err_rot: Some(err_rot(&gt.h_ba.rotation, &est.r_ba)),
        err_trans: Some(err_trans(&gt.h_ba.translation, &est.t_ba)),
        ..ErrorReport::default()
    }
}

/// Rotation, scaled translation (against `mu_B T_BA`), relative scale and
/// scaled joint (against `mu_A O_A`).
pub fn score_scaled(est: &ScaledCalibration, gt: &AcsGroundTruth) -> ErrorReport {
    ErrorReport {
        err_joint: Some(err_joint(&(gt.o_a * gt.mu_a), &est.o_a_hat, None)),
        err_rot: Some(err_rot(&gt.h_ba.rotation, &est.r_ba)),
        err_trans: Some(err_trans(&(gt.h_ba.translation * gt.mu_b), &est.t_ba_hat)),
        eps_phi: Some(eps_phi(gt.phi_ba(), est.phi_ba)),
    }
}
