use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Tolerance on `RᵀR = I` and `det R = 1` when validating a rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Pinhole intrinsics in pixel units.
///
/// Camera convention throughout the crate: +x right, +y down, +z forward.
/// Pixel `(u, v)` refers to the pixel centre at column `u`, row `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Intrinsics with the principal point at the image centre and a square pixel.
    pub fn centered(focal: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(focal, focal, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(format!(
                "fx={} fy={} cx={} cy={} size={}x{}",
                self.fx, self.fy, self.cx, self.cy, self.width, self.height
            )))
        }
    }

    /// The 3×3 calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Builds intrinsics from a row-major 3×3 matrix. Skew must be zero and the
    /// last row must be `[0, 0, 1]`.
    pub fn from_row_major(m: &[f64; 9], width: u32, height: u32) -> Result<Self, GeometryError> {
        if m[1] != 0.0 || m[3] != 0.0 || m[6] != 0.0 || m[7] != 0.0 || m[8] != 1.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "expected [fx 0 cx; 0 fy cy; 0 0 1], got {m:?}"
            )));
        }
        Self::new(m[0], m[4], m[2], m[5], width, height)
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        [self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0]
    }

    /// Rescales the calibration to a different output resolution.
    pub fn scaled_to(&self, width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == self.width && height == self.height {
            return Ok(*self);
        }
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v)
    }
}

/// World-to-camera rigid transform `x_cam = R·x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl ExtrinsicPose {
    /// Validates that `rotation` is a proper rotation within [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::InvalidPose("translation is not finite".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Pose whose camera sits at `center` (world frame) with world-to-camera rotation `rotation`.
    pub fn from_center(rotation: Matrix3<f64>, center: Vector3<f64>) -> Result<Self, GeometryError> {
        let translation = -(rotation * center);
        Self::new(rotation, translation)
    }

    /// Level camera (no pitch or roll) at `center`, its view direction yawed by
    /// `yaw_deg` from world +z toward world +x.
    pub fn level(yaw_deg: f64, center: Vector3<f64>) -> Self {
        let rotation = yaw_rotation(yaw_deg).transpose();
        Self { rotation, translation: -(rotation * center) }
    }

    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Maps a world point into the camera frame.
    pub fn apply(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// World-frame unit vector along the optical axis.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.transpose() * Vector3::z()
    }

    /// Row-major `[R | t]`.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0],
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1],
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2],
        ]
    }

    pub fn from_row_major(m: &[f64; 12]) -> Result<Self, GeometryError> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        Self::new(rotation, translation)
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), GeometryError> {
    if !r.iter().all(|x| x.is_finite()) {
        return Err(GeometryError::InvalidPose("rotation is not finite".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    if ortho > ROTATION_TOLERANCE {
        return Err(GeometryError::InvalidPose(format!("rotation not orthonormal (|RᵀR − I| = {ortho:.3e})")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(GeometryError::InvalidPose(format!("rotation determinant {det} != 1")));
    }
    Ok(())
}

/// Rotation about the world y axis. Positive angles carry +z toward +x.
pub fn yaw_rotation(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Lifts pixel `(u, v)` at `depth` into the camera frame.
pub fn back_project(u: f64, v: f64, depth: f64, k: &Intrinsics) -> Result<Vector3<f64>, GeometryError> {
    if !depth.is_finite() || depth <= 0.0 {
        return Err(GeometryError::InvalidDepth(depth));
    }
    if !k.contains_pixel(u, v) {
        return Err(GeometryError::PixelOutOfBounds { u, v, width: k.width, height: k.height });
    }
    Ok(Vector3::new(depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth))
}

/// Inverse of [`ExtrinsicPose::apply`]: `Rᵀ(p − t)`.
pub fn cam_to_world(point_cam: &Vector3<f64>, pose: &ExtrinsicPose) -> Vector3<f64> {
    pose.rotation.transpose() * (point_cam - pose.translation)
}

/// Camera centre in world coordinates, `−Rᵀt`.
pub fn camera_center(pose: &ExtrinsicPose) -> Vector3<f64> {
    -(pose.rotation.transpose() * pose.translation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_vec_close(a: &Vector3<f64>, b: &Vector3<f64>, tol: f64) {
        assert!((a - b).amax() <= tol, "{a:?} != {b:?} (tol {tol})");
    }

    fn k() -> Intrinsics {
        Intrinsics::new(200.0, 200.0, 128.0, 96.0, 256, 192).unwrap()
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let p = back_project(128.0, 96.0, 2.0, &k()).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn one_focal_length_off_axis() {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 40.0, 200, 100).unwrap();
        let p = back_project(150.0, 40.0, 1.0, &k).unwrap();
        assert_eq!(p, Vector3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn back_project_hand_computed() {
        // 3·(100−128)/200 = −0.42, 3·(50−96)/200 = −0.69
        let p = back_project(100.0, 50.0, 3.0, &k()).unwrap();
        assert_vec_close(&p, &Vector3::new(-0.42, -0.69, 3.0), 1e-12);
    }

    #[test]
    fn back_project_rejects_bad_depth_and_pixels() {
        assert!(matches!(back_project(1.0, 1.0, 0.0, &k()), Err(GeometryError::InvalidDepth(_))));
        assert!(matches!(back_project(1.0, 1.0, -1.0, &k()), Err(GeometryError::InvalidDepth(_))));
        assert!(matches!(back_project(1.0, 1.0, f64::NAN, &k()), Err(GeometryError::InvalidDepth(_))));
        assert!(matches!(
            back_project(256.0, 1.0, 1.0, &k()),
            Err(GeometryError::PixelOutOfBounds { .. })
        ));
    }

    #[test]
    fn cam_to_world_examples() {
        let p = Vector3::new(0.3, -1.0, 2.5);
        assert_eq!(cam_to_world(&p, &ExtrinsicPose::identity()), p);
        let pose = ExtrinsicPose::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(cam_to_world(&Vector3::zeros(), &pose), Vector3::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn camera_center_examples() {
        assert_eq!(camera_center(&ExtrinsicPose::identity()), Vector3::zeros());
        let pose = ExtrinsicPose::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(camera_center(&pose), Vector3::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 1.0, -0.5, 4, 4).is_err());
        let m = k().to_row_major();
        assert_eq!(Intrinsics::from_row_major(&m, 256, 192).unwrap(), k());
        let mut skewed = m;
        skewed[1] = 0.5;
        assert!(Intrinsics::from_row_major(&skewed, 256, 192).is_err());
    }

    #[test]
    fn pose_validation_rejects_non_rotations() {
        let scaled = Matrix3::identity() * 1.01;
        assert!(ExtrinsicPose::new(scaled, Vector3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(ExtrinsicPose::new(reflection, Vector3::zeros()).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let pose = ExtrinsicPose::level(33.0, Vector3::new(0.5, -0.2, 1.0));
        let back = ExtrinsicPose::from_row_major(&pose.to_row_major()).unwrap();
        assert_eq!(back, pose);
    }
}
