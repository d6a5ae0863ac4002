use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::se3::{euler_to_rotation, rotation_to_euler, EulerAngles, Pose};
use crate::sequence::MotionSequence;

/// Zero-mean Gaussian noise on pose data.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per Euler angle, degrees.
    pub sigma_rot_deg: f64,
    /// Per translation axis, meters.
    pub sigma_trans_m: f64,
}

impl NoiseSpec {
    pub fn new(sigma_rot_deg: f64, sigma_trans_m: f64) -> Self {
        NoiseSpec {
            sigma_rot_deg,
            sigma_trans_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_rot_deg >= 0.0 && self.sigma_trans_m >= 0.0) {
            return Err(CalibError::InvalidInput(format!("noise must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// Perturbs roll, pitch and yaw of every rotation and every translation
/// component. A zero sigma leaves that part untouched bit for bit.
pub fn add_noise(seq: &MotionSequence, spec: &NoiseSpec, seed: u64) -> Result<MotionSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = Normal::new(0.0, spec.sigma_rot_deg.to_radians()).expect("validated sigma");
    let trans = Normal::new(0.0, spec.sigma_trans_m).expect("validated sigma");
    seq.try_map_poses(|_, pose| {
        let mut p = *pose;
        if spec.sigma_rot_deg > 0.0 {
            let e = rotation_to_euler(&pose.rotation)?;
            p.rotation = euler_to_rotation(&EulerAngles::new(
                e.roll + rot.sample(&mut rng),
                e.pitch + rot.sample(&mut rng),
                e.yaw + rot.sample(&mut rng),
            ));
        }
        if spec.sigma_trans_m > 0.0 {
            for k in 0..3 {
                p.translation[k] += trans.sample(&mut rng);
            }
        }
        Ok(p)
    })
}

/// Multiplies every translation by `mu`.
pub fn apply_scale(seq: &MotionSequence, mu: f64) -> Result<MotionSequence> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(CalibError::NonPositiveScale(mu));
    }
    Ok(seq.map_poses(|_, p| Pose::new(p.rotation, p.translation * mu, p.frame)))
}
