//! Calibration of articulated camera systems: two cameras on rigid segments
//! connected by a rotational joint.
//!
//! From camera pose sequences the crate estimates
//! - the joint position in each camera's frame ([`joint`]),
//! - the relative pose between the cameras' reference frames, including rigs
//!   whose views do not overlap ([`relpose`]),
//! - the relative and absolute translation scale factors when ego-motion is
//!   only known up to scale ([`scale`]).
//!
//! [`sim`] generates synthetic rigs and runs noise sweeps; [`io`] holds the
//! file formats used by the command-line tool.

pub mod error;
pub mod io;
pub mod joint;
pub mod linalg;
pub mod lm;
pub mod relpose;
pub mod scale;
pub mod se3;
pub mod sequence;
pub mod sim;

pub use error::{CalibError, Result};
pub use joint::{
    check_degeneracy_fixed, check_degeneracy_overlapping, estimate_joint_fixed, estimate_joint_overlapping,
    DegeneracyReport, JointEstimate, Verdict,
};
pub use lm::LmSettings;
pub use relpose::{calibrate_relative_pose, linear_relpose_init, recover_trajectory, refine_relpose_lm, RelativePoseEstimate};
pub use scale::{calibrate_scaled, recover_absolute_scales, ScaledCalibration};
pub use se3::{EulerAngles, Frame, Point3, Pose, Rotation};
pub use sequence::MotionSequence;
