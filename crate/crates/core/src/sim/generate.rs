use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::se3::{euler_to_rotation, invert, transform_point, EulerAngles, Frame, Point3, Pose, Rotation};
use crate::sequence::MotionSequence;

/// Ground truth of a two-camera, one-joint rig.
#[derive(Debug, Clone, PartialEq)]
pub struct AcsGroundTruth {
    /// Joint in camera A's body frame.
    pub o_a: Point3,
    /// Joint in camera B's body frame.
    pub o_b: Point3,
    /// Maps camera A's reference frame into camera B's.
    pub h_ba: Pose,
    pub mu_a: f64,
    pub mu_b: f64,
}

impl AcsGroundTruth {
    /// `mu_B / mu_A`.
    pub fn phi_ba(&self) -> f64 {
        self.mu_b / self.mu_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcsConfig {
    /// Range of the joint distance from each camera, meters.
    pub joint_norm_range: (f64, f64),
    /// Range of the per-camera translation scale factors; `None` keeps both
    /// at 1.
    pub scale_range: Option<(f64, f64)>,
}

impl Default for AcsConfig {
    fn default() -> Self {
        AcsConfig {
            joint_norm_range: (1.0, 2.0),
            scale_range: None,
        }
    }
}

/// Magnitude of the random motions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionRanges {
    /// Each Euler angle is drawn uniformly from `[-max, max]`.
    pub max_angle_deg: f64,
    /// Each free translation component is drawn uniformly from `[-max, max]`.
    pub max_translation: f64,
}

impl Default for MotionRanges {
    fn default() -> Self {
        MotionRanges {
            max_angle_deg: 30.0,
            max_translation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    /// Both cameras posed in a shared world frame.
    OverlappingWorld,
    /// Ego motions rotating about a joint that stays put.
    FixedJoint,
    /// Unconstrained ego motions of the articulated rig.
    General,
}

fn unit_direction(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Uniformly distributed rotation (normalized Gaussian quaternion).
pub fn uniform_rotation(rng: &mut impl Rng) -> Rotation {
    loop {
        let q = Vector4::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if q.norm() > 1e-9 {
            let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q));
            return Rotation::from_matrix_unchecked(uq.to_rotation_matrix().into_inner());
        }
    }
}

fn bounded_rotation(rng: &mut impl Rng, ranges: &MotionRanges) -> Rotation {
    let m = ranges.max_angle_deg.to_radians();
    euler_to_rotation(&EulerAngles::new(
        rng.random_range(-m..=m),
        rng.random_range(-m..=m),
        rng.random_range(-m..=m),
    ))
}

fn bounded_translation(rng: &mut impl Rng, ranges: &MotionRanges) -> Vector3<f64> {
    let m = ranges.max_translation;
    Vector3::new(rng.random_range(-m..=m), rng.random_range(-m..=m), rng.random_range(-m..=m))
}

/// Draws a random rig: joint directions uniform on the sphere, joint
/// distances uniform in the configured range, relative rotation uniform over
/// SO(3) and `T_BA = O_B - R_BA O_A` so both chains meet at the joint.
pub fn generate_random_acs(seed: u64, config: &AcsConfig) -> AcsGroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = config.joint_norm_range;
    let o_a = unit_direction(&mut rng) * rng.random_range(lo..=hi);
    let o_b = unit_direction(&mut rng) * rng.random_range(lo..=hi);
    let r_ba = uniform_rotation(&mut rng);
    let t_ba = o_b - r_ba.rotate(&o_a);
    let (mu_a, mu_b) = match config.scale_range {
        Some((s_lo, s_hi)) => (rng.random_range(s_lo..=s_hi), rng.random_range(s_lo..=s_hi)),
        None => (1.0, 1.0),
    };
    AcsGroundTruth {
        o_a,
        o_b,
        h_ba: Pose::new(r_ba, t_ba, Frame::EgoInit),
        mu_a,
        mu_b,
    }
}

pub fn generate_motion(gt: &AcsGroundTruth, n: usize, kind: MotionKind, seed: u64) -> (MotionSequence, MotionSequence) {
    generate_motion_with(gt, n, kind, seed, &MotionRanges::default())
}

/// Generates `n` exact pose pairs (steps `1..=n`) of the given kind. The
/// translations are metric; use [`super::apply_scale`] for scaled data.
pub fn generate_motion_with(
    gt: &AcsGroundTruth,
    n: usize,
    kind: MotionKind,
    seed: u64,
    ranges: &MotionRanges,
) -> (MotionSequence, MotionSequence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pa = Vec::with_capacity(n);
    let mut pb = Vec::with_capacity(n);
    let frame = match kind {
        MotionKind::OverlappingWorld => Frame::World,
        _ => Frame::EgoInit,
    };
    let about = |r: Rotation, joint: &Point3| -> Vector3<f64> { -(r.matrix() - Matrix3::identity()) * joint };
    for step in 1..=n as u32 {
        let (a, b) = match kind {
            MotionKind::FixedJoint => {
                let ra = bounded_rotation(&mut rng, ranges);
                let rb = bounded_rotation(&mut rng, ranges);
                (
                    Pose::new(ra, about(ra, &gt.o_a), frame),
                    Pose::new(rb, about(rb, &gt.o_b), frame),
                )
            }
            MotionKind::General => {
                let a = Pose::new(bounded_rotation(&mut rng, ranges), bounded_translation(&mut rng, ranges), frame);
                // joint position in B's reference frame at this step
                let joint_b = transform_point(&gt.h_ba, &transform_point(&a, &gt.o_a));
                let rb = bounded_rotation(&mut rng, ranges);
                (a, Pose::new(rb, joint_b - rb.rotate(&gt.o_b), frame))
            }
            MotionKind::OverlappingWorld => {
                let a = Pose::new(bounded_rotation(&mut rng, ranges), bounded_translation(&mut rng, ranges), frame);
                let joint_world = transform_point(&invert(&a), &gt.o_a);
                let rb = bounded_rotation(&mut rng, ranges);
                (a, Pose::new(rb, gt.o_b - rb.rotate(&joint_world), frame))
            }
        };
        pa.push((step, a));
        pb.push((step, b));
    }
    (
        MotionSequence::new("A", frame, pa).expect("generated steps are ordered"),
        MotionSequence::new("B", frame, pb).expect("generated steps are ordered"),
    )
}
