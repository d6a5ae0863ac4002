//! Per-camera pose sequences.
//!
//! Frame conventions:
//! - `World`: the pose at step `i` maps world coordinates into camera
//!   coordinates, `P_cam = H^i P_world`.
//! - `EgoInit`: the pose at step `i` maps camera coordinates at step `i` into
//!   the camera frame at the reference step, so a point fixed to the camera
//!   body with coordinates `O` sits at `H^i O` in the reference frame. The
//!   reference step itself is the identity and is not stored.

use crate::error::{CalibError, Result};
use crate::se3::{compose, invert, Frame, Pose};

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    camera_id: String,
    frame: Frame,
    reference: u32,
    poses: Vec<(u32, Pose)>,
}

impl MotionSequence {
    /// Builds a sequence with reference step 0.
    pub fn new(camera_id: impl Into<String>, frame: Frame, poses: Vec<(u32, Pose)>) -> Result<Self> {
        Self::with_reference(camera_id, frame, 0, poses)
    }

    /// Builds a sequence, validating step order and frame tags. For ego
    /// sequences an explicit entry at the reference step must be the identity
    /// and is dropped.
    pub fn with_reference(
        camera_id: impl Into<String>,
        frame: Frame,
        reference: u32,
        poses: Vec<(u32, Pose)>,
    ) -> Result<Self> {
        let camera_id = camera_id.into();
        let mut kept = Vec::with_capacity(poses.len());
        let mut last: Option<u32> = None;
        for (step, pose) in poses {
            if let Some(prev) = last {
                if step <= prev {
                    return Err(CalibError::InvalidSequence(format!(
                        "camera {camera_id}: step {step} does not follow {prev}"
                    )));
                }
            }
            last = Some(step);
            if pose.frame != frame {
                return Err(CalibError::InvalidSequence(format!(
                    "camera {camera_id}: step {step} tagged {} in a {} sequence",
                    pose.frame.as_str(),
                    frame.as_str()
                )));
            }
            if frame == Frame::EgoInit && step == reference {
                let dev = (pose.rotation.matrix() - nalgebra::Matrix3::identity())
                    .amax()
                    .max(pose.translation.amax());
                if dev > 1e-9 {
                    return Err(CalibError::InvalidSequence(format!(
                        "camera {camera_id}: reference step {step} is not the identity"
                    )));
                }
                continue;
            }
            kept.push((step, pose));
        }
        Ok(MotionSequence {
            camera_id,
            frame,
            reference,
            poses: kept,
        })
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Reference step of an ego sequence.
    pub fn reference(&self) -> u32 {
        self.reference
    }

    pub fn poses(&self) -> &[(u32, Pose)] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = u32> + '_ {
        self.poses.iter().map(|(s, _)| *s)
    }

    /// Pose at `step`; the reference step of an ego sequence is the identity.
    pub fn pose_at(&self, step: u32) -> Option<Pose> {
        if self.frame == Frame::EgoInit && step == self.reference {
            return Some(Pose::identity(Frame::EgoInit));
        }
        self.poses
            .binary_search_by_key(&step, |(s, _)| *s)
            .ok()
            .map(|i| self.poses[i].1)
    }

    pub fn require_frame(&self, frame: Frame) -> Result<()> {
        if self.frame != frame {
            return Err(CalibError::WrongFrame {
                expected: frame.as_str(),
                got: self.frame.as_str(),
            });
        }
        Ok(())
    }

    /// Applies `f` to every stored pose.
    pub fn map_poses(&self, mut f: impl FnMut(u32, &Pose) -> Pose) -> Self {
        MotionSequence {
            camera_id: self.camera_id.clone(),
            frame: self.frame,
            reference: self.reference,
            poses: self.poses.iter().map(|(s, p)| (*s, f(*s, p))).collect(),
        }
    }

    /// Like [`Self::map_poses`], stopping at the first error.
    pub fn try_map_poses<E>(&self, mut f: impl FnMut(u32, &Pose) -> std::result::Result<Pose, E>) -> std::result::Result<Self, E> {
        let poses = self
            .poses
            .iter()
            .map(|(s, p)| f(*s, p).map(|q| (*s, q)))
            .collect::<std::result::Result<_, E>>()?;
        Ok(MotionSequence {
            camera_id: self.camera_id.clone(),
            frame: self.frame,
            reference: self.reference,
            poses,
        })
    }

    /// Re-expresses an ego sequence relative to the image at step `k`:
    /// every pose becomes `(H^k)^-1 H^j`, the former reference becomes an
    /// explicit entry and step `k` becomes the new implicit identity.
    pub fn rebase(&self, k: u32) -> Result<Self> {
        self.require_frame(Frame::EgoInit)?;
        let hk = self.pose_at(k).ok_or_else(|| {
            CalibError::InvalidInput(format!("camera {}: no step {k} to rebase on", self.camera_id))
        })?;
        let hk_inv = invert(&hk);
        let mut steps: Vec<u32> = self.steps().collect();
        steps.push(self.reference);
        steps.sort_unstable();
        let poses = steps
            .into_iter()
            .filter(|&s| s != k)
            .map(|s| {
                let hj = self.pose_at(s).expect("step taken from this sequence");
                (s, compose(&hk_inv, &hj))
            })
            .collect();
        MotionSequence::with_reference(self.camera_id.clone(), Frame::EgoInit, k, poses)
    }
}

/// Checks that two sequences share the same steps.
pub fn check_aligned(a: &MotionSequence, b: &MotionSequence) -> Result<()> {
    if a.len() != b.len() {
        return Err(CalibError::LengthMismatch(format!(
            "camera {} has {} poses, camera {} has {}",
            a.camera_id(),
            a.len(),
            b.camera_id(),
            b.len()
        )));
    }
    if a.frame() == Frame::EgoInit && a.reference() != b.reference() {
        return Err(CalibError::LengthMismatch(format!(
            "reference steps differ ({} vs {})",
            a.reference(),
            b.reference()
        )));
    }
    if let Some((sa, sb)) = a.steps().zip(b.steps()).find(|(sa, sb)| sa != sb) {
        return Err(CalibError::LengthMismatch(format!(
            "step {sa} of camera {} pairs with step {sb} of camera {}",
            a.camera_id(),
            b.camera_id()
        )));
    }
    Ok(())
}
