//! Rotation and rigid-pose arithmetic.
//!
//! Rotations are stored as matrices everywhere. Roll/pitch/yaw only appear as
//! optimizer parameters and at IO boundaries, using the Z-Y-X convention
//! `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// A point or free vector in meters.
pub type Point3 = Vector3<f64>;

/// Tolerance used when validating orthonormality and the determinant.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Relative threshold below which [`orthonormalize_and_scale`] considers the
/// smallest singular value to be zero.
pub const SPLIT_SINGULAR_TOLERANCE: f64 = 1e-10;

/// Threshold on `|cos(pitch)|` below which Euler extraction fails.
pub const GIMBAL_TOLERANCE: f64 = 1e-8;

/// A proper orthonormal 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix that is already known to be a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Wraps `m` after checking `m * m^T = I` and `det(m) = 1` within `tol`.
    pub fn try_from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        let err = (m * m.transpose() - Matrix3::identity()).amax();
        let det = m.determinant();
        if !m.iter().all(|v| v.is_finite()) || err > tol || (det - 1.0).abs() > tol {
            return Err(CalibError::InvalidInput(format!(
                "not a rotation: orthogonality error {err:e}, det {det}"
            )));
        }
        Ok(Rotation(m))
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let k = axis.normalize();
        let kx = skew(&k);
        Rotation(Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos()))
    }

    pub fn rx(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn ry(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rz(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn rotate(&self, p: &Point3) -> Point3 {
        self.0 * p
    }

    /// Geodesic distance to `other` in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let rel = self.0.transpose() * other.0;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        row_major(&self.0)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

pub fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

pub fn from_row_major(v: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(v)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        EulerAngles { roll, pitch, yaw }
    }

    pub fn from_degrees(deg: [f64; 3]) -> Self {
        EulerAngles::new(deg[0].to_radians(), deg[1].to_radians(), deg[2].to_radians())
    }

    pub fn to_degrees(&self) -> [f64; 3] {
        [self.roll.to_degrees(), self.pitch.to_degrees(), self.yaw.to_degrees()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn euler_to_rotation(e: &EulerAngles) -> Rotation {
    Rotation::rz(e.yaw) * Rotation::ry(e.pitch) * Rotation::rx(e.roll)
}

/// Partial derivatives of [`euler_to_rotation`] with respect to roll, pitch
/// and yaw, in that order.
pub fn euler_partials(e: &EulerAngles) -> [Matrix3<f64>; 3] {
    let rx = *Rotation::rx(e.roll).matrix();
    let ry = *Rotation::ry(e.pitch).matrix();
    let rz = *Rotation::rz(e.yaw).matrix();
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    let drx = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sr, -cr, 0.0, cr, -sr);
    let dry = Matrix3::new(-sp, 0.0, cp, 0.0, 0.0, 0.0, -cp, 0.0, -sp);
    let drz = Matrix3::new(-sy, -cy, 0.0, cy, -sy, 0.0, 0.0, 0.0, 0.0);
    [rz * ry * drx, rz * dry * rx, drz * ry * rx]
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    // rem_euclid maps -pi to pi already; keep the half-open range (-pi, pi]
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Wraps an angle in radians into `(-pi, pi]`.
pub fn wrap_to_pi(a: f64) -> f64 {
    wrap_angle(a)
}

/// Inverse of [`euler_to_rotation`]. Angles are returned in `(-pi, pi]`.
pub fn rotation_to_euler(r: &Rotation) -> Result<EulerAngles> {
    let m = r.matrix();
    let cos_pitch = m[(0, 0)].hypot(m[(1, 0)]);
    if cos_pitch < GIMBAL_TOLERANCE {
        return Err(CalibError::GimbalLock { cos_pitch });
    }
    let pitch = (-m[(2, 0)]).atan2(cos_pitch);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    Ok(EulerAngles::new(wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw)))
}

/// Which reference a pose is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Frame {
    /// A shared external frame.
    #[serde(rename = "world")]
    World,
    /// The camera's own frame at the reference image.
    #[default]
    #[serde(rename = "ego-init")]
    EgoInit,
}

impl Frame {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frame::World => "world",
            Frame::EgoInit => "ego-init",
        }
    }
}

/// A rigid transform `p -> R p + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Point3,
    pub frame: Frame,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Point3, frame: Frame) -> Self {
        Pose {
            rotation,
            translation,
            frame,
        }
    }

    pub fn identity(frame: Frame) -> Self {
        Pose::new(Rotation::identity(), Point3::zeros(), frame)
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }
}

/// `a * b`: applies `b` first. The result carries `a`'s frame tag.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: &a.rotation * &b.rotation,
        translation: a.rotation.rotate(&b.translation) + a.translation,
        frame: a.frame,
    }
}

pub fn invert(a: &Pose) -> Pose {
    let rt = a.rotation.transpose();
    Pose {
        translation: -rt.rotate(&a.translation),
        rotation: rt,
        frame: a.frame,
    }
}

pub fn transform_point(a: &Pose, p: &Point3) -> Point3 {
    a.rotation.rotate(p) + a.translation
}

/// `(R^T, -R^T T)`: the pose of camera A's initial frame expressed from B's.
pub fn invert_relative_pose(r_ba: &Rotation, t_ba: &Point3) -> (Rotation, Point3) {
    let rt = r_ba.transpose();
    let t = -rt.rotate(t_ba);
    (rt, t)
}

/// Result of splitting a noisy scaled rotation into rotation and scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRotationSplit {
    pub rotation: Rotation,
    pub scale: f64,
    /// Singular values of the input, descending.
    pub singular_values: [f64; 3],
}

/// Splits `m ~ scale * R` into the nearest rotation `U V^T` and the scale
/// `trace(D) / 3` from the SVD `m = U D V^T`.
pub fn orthonormalize_and_scale(m: &Matrix3<f64>) -> Result<ScaledRotationSplit> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(CalibError::InvalidInput("non-finite matrix".into()));
    }
    let det = m.determinant();
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested with u");
    let v_t = svd.v_t.expect("svd requested with v_t");
    let mut sv = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
    sv.sort_by(|a, b| b.total_cmp(a));
    let ratio = if sv[0] > 0.0 { sv[2] / sv[0] } else { 0.0 };
    if ratio < SPLIT_SINGULAR_TOLERANCE {
        return Err(CalibError::DegenerateMatrix { ratio });
    }
    if det <= 0.0 {
        return Err(CalibError::NegativeDeterminant { det });
    }
    Ok(ScaledRotationSplit {
        rotation: Rotation(u * v_t),
        scale: (sv[0] + sv[1] + sv[2]) / 3.0,
        singular_values: sv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Rotation {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Rotation::from_axis_angle(&axis, rng.random_range(-PI..PI))
    }

    fn random_pose(rng: &mut impl Rng) -> Pose {
        Pose::new(
            random_rotation(rng),
            Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ),
            Frame::World,
        )
    }

    fn pose_close(a: &Pose, b: &Pose, tol: f64) -> bool {
        (a.rotation.matrix() - b.rotation.matrix()).amax() <= tol
            && (a.translation - b.translation).amax() <= tol
    }

    #[test]
    fn euler_identity_and_roll() {
        let r = euler_to_rotation(&EulerAngles::default());
        assert_eq!(*r.matrix(), Matrix3::identity());

        let r = euler_to_rotation(&EulerAngles::new(PI / 2.0, 0.0, 0.0));
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert!((r.matrix() - expected).amax() < 1e-15);
    }

    #[test]
    fn euler_extraction_simple_cases() {
        let e = rotation_to_euler(&Rotation::identity()).unwrap();
        assert_eq!(e.as_array(), [0.0, 0.0, 0.0]);
        let e = rotation_to_euler(&Rotation::rz(0.3)).unwrap();
        assert_relative_eq!(e.roll, 0.0, epsilon = 1e-15);
        assert_relative_eq!(e.pitch, 0.0, epsilon = 1e-15);
        assert_relative_eq!(e.yaw, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn gimbal_lock_is_reported() {
        let r = euler_to_rotation(&EulerAngles::new(0.2, PI / 2.0, 0.1));
        assert!(matches!(rotation_to_euler(&r), Err(CalibError::GimbalLock { .. })));
    }

    #[test]
    fn euler_range_is_half_open() {
        let e = rotation_to_euler(&Rotation::rz(PI)).unwrap();
        assert_relative_eq!(e.yaw, PI, epsilon = 1e-15);
        assert_eq!(wrap_to_pi(-PI), PI);
        assert_relative_eq!(wrap_to_pi(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn euler_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let e = EulerAngles::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-1.4..1.4),
                rng.random_range(-3.0..3.0),
            );
            let d = euler_partials(&e);
            let h = 1e-6;
            for (k, dk) in d.iter().enumerate() {
                let mut ep = e.as_array();
                let mut em = e.as_array();
                ep[k] += h;
                em[k] -= h;
                let fp = euler_to_rotation(&EulerAngles::new(ep[0], ep[1], ep[2]));
                let fm = euler_to_rotation(&EulerAngles::new(em[0], em[1], em[2]));
                let fd = (fp.matrix() - fm.matrix()) / (2.0 * h);
                assert!((fd - dk).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn pose_inverse_examples() {
        let id = Pose::identity(Frame::World);
        assert!(pose_close(&invert(&id), &id, 0.0));
        let t = Pose::new(Rotation::identity(), Vector3::new(1.0, -2.0, 3.0), Frame::World);
        assert_eq!(invert(&t).translation, Vector3::new(-1.0, 2.0, -3.0));
    }

    #[test]
    fn relative_pose_inverse_examples() {
        let (r, t) = invert_relative_pose(&Rotation::identity(), &Point3::zeros());
        assert_eq!(r, Rotation::identity());
        assert_eq!(t, Point3::zeros());
        let (_, t) = invert_relative_pose(&Rotation::identity(), &Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t, Vector3::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn split_scaled_identity() {
        let s = orthonormalize_and_scale(&(Matrix3::identity() * 2.0)).unwrap();
        assert!((s.rotation.matrix() - Matrix3::identity()).amax() < 1e-15);
        assert_relative_eq!(s.scale, 2.0, epsilon = 1e-15);
        assert_eq!(s.singular_values, [2.0, 2.0, 2.0]);
    }

    #[test]
    fn split_half_scaled_rz30() {
        let r = Rotation::rz(30f64.to_radians());
        let s = orthonormalize_and_scale(&(r.matrix() * 0.5)).unwrap();
        assert!((s.rotation.matrix() - r.matrix()).amax() < 1e-12);
        assert!((s.scale - 0.5).abs() < 1e-12);
        // reconstruction check
        assert!((s.rotation.matrix() * s.scale - r.matrix() * 0.5).amax() < 1e-12);
    }

    #[test]
    fn split_rejects_reflection_and_singular() {
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            orthonormalize_and_scale(&refl),
            Err(CalibError::NegativeDeterminant { .. })
        ));
        let sing = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0));
        assert!(matches!(
            orthonormalize_and_scale(&sing),
            Err(CalibError::DegenerateMatrix { .. })
        ));
    }

    /// Monte-Carlo check of the split under small additive noise.
    ///
    /// The scale error of `trace(D)/3` is bounded by `||N||_F / sqrt(3)` to
    /// first order, independent of the scale. The rotation error of the polar
    /// factor is `|axial(skew(R^T N))| / phi`, so it grows as `phi` shrinks;
    /// the rotation bound is therefore checked relative to `||N||_F / phi`.
    #[test]
    fn split_under_noise_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise_norm = 1e-3;
        let mut worst_rot_large_phi: f64 = 0.0;
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            let phi = rng.random_range(0.1..10.0);
            let mut n = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            n *= noise_norm / n.norm();
            let s = orthonormalize_and_scale(&(r.matrix() * phi + n)).unwrap();
            assert!((s.scale - phi).abs() < 1e-3, "scale {} vs {}", s.scale, phi);
            let angle = s.rotation.angle_to(&r);
            assert!(angle < noise_norm / phi, "angle {angle} phi {phi}");
            if phi >= 1.0 {
                worst_rot_large_phi = worst_rot_large_phi.max(angle);
            }
        }
        assert!(worst_rot_large_phi < 1e-3);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let id = Pose::identity(Frame::World);
        for _ in 0..100 {
            let a = random_pose(&mut rng);
            assert!(pose_close(&compose(&a, &invert(&a)), &id, 1e-12));
        }
    }

    proptest! {
        #[test]
        fn euler_round_trip(r in -3.1f64..3.1, p in -1.4f64..1.4, y in -3.1f64..3.1) {
            let rot = euler_to_rotation(&EulerAngles::new(r, p, y));
            let m = rot.matrix();
            prop_assert!((m * m.transpose() - Matrix3::identity()).amax() < ROTATION_TOLERANCE);
            prop_assert!((m.determinant() - 1.0).abs() < ROTATION_TOLERANCE);
            let e = rotation_to_euler(&rot).unwrap();
            prop_assert!((e.roll - r).abs() < 1e-10);
            prop_assert!((e.pitch - p).abs() < 1e-10);
            prop_assert!((e.yaw - y).abs() < 1e-10);
            let back = euler_to_rotation(&e);
            prop_assert!((back.matrix() - m).amax() < 1e-9);
        }

        #[test]
        fn split_reconstructs_and_is_scale_equivariant(
            seed in any::<u64>(), phi in 0.1f64..10.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_rotation(&mut rng);
            let input = r.matrix() * phi;
            let s = orthonormalize_and_scale(&input).unwrap();
            prop_assert!((input - s.rotation.matrix() * s.scale).norm() < 1e-9);
            let s2 = orthonormalize_and_scale(&(input * 2.0)).unwrap();
            prop_assert!((s2.scale - 2.0 * s.scale).abs() < 1e-12 * s2.scale.max(1.0));
            prop_assert!((s2.rotation.matrix() - s.rotation.matrix()).amax() < 1e-12);
        }

        #[test]
        fn relative_inverse_is_involution(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_pose(&mut rng);
            let (r1, t1) = invert_relative_pose(&p.rotation, &p.translation);
            let (r2, t2) = invert_relative_pose(&r1, &t1);
            prop_assert!((r2.matrix() - p.rotation.matrix()).amax() < 1e-12);
            prop_assert!((t2 - p.translation).amax() < 1e-12);
        }

        #[test]
        fn compose_is_associative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
            let l = compose(&compose(&a, &b), &c);
            let r = compose(&a, &compose(&b, &c));
            prop_assert!(pose_close(&l, &r, 1e-12));
        }

        #[test]
        fn poses_are_isometries(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_pose(&mut rng);
            let p = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let q = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let d0 = (p - q).norm();
            let d1 = (transform_point(&a, &p) - transform_point(&a, &q)).norm();
            prop_assert!((d0 - d1).abs() < 1e-9);
        }
    }
}
