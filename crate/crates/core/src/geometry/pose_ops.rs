//! Egocentric pose manipulation: in-place yaw and translation along the view
//! direction. Angles are degrees, distances are scene units.

use super::camera::{camera_center, yaw_rotation, ExtrinsicPose};
use super::GeometryError;

/// Default yaw step for `rotate_left` / `rotate_right`, in degrees.
pub const DEFAULT_ROTATION_DEG: f64 = 45.0;
/// Default step for `move_forward` / `move_backward`, in scene units.
pub const DEFAULT_MOVE_DISTANCE: f64 = 0.3;

/// Pans the camera about the world y axis through its own centre.
///
/// The camera-to-world rotation is left-multiplied by `R_y(phi)` and the
/// result is inverted back to world-to-camera form. Positive `phi` swings the
/// view toward the camera's right for a level camera.
pub fn rotate_yaw_in_place(pose: &ExtrinsicPose, phi_deg: f64) -> ExtrinsicPose {
    let center = camera_center(pose);
    let cam_to_world = yaw_rotation(phi_deg) * pose.rotation().transpose();
    let rotation = cam_to_world.transpose();
    ExtrinsicPose::from_parts_unchecked(rotation, -(rotation * center))
}

pub fn rotate_right(pose: &ExtrinsicPose, deg: f64) -> ExtrinsicPose {
    rotate_yaw_in_place(pose, deg)
}

pub fn rotate_left(pose: &ExtrinsicPose, deg: f64) -> ExtrinsicPose {
    rotate_yaw_in_place(pose, -deg)
}

pub fn turn_around(pose: &ExtrinsicPose) -> ExtrinsicPose {
    rotate_yaw_in_place(pose, 180.0)
}

pub fn move_forward(pose: &ExtrinsicPose, distance: f64) -> Result<ExtrinsicPose, GeometryError> {
    translate_along_view(pose, checked_distance(distance)?)
}

pub fn move_backward(pose: &ExtrinsicPose, distance: f64) -> Result<ExtrinsicPose, GeometryError> {
    translate_along_view(pose, -checked_distance(distance)?)
}

fn checked_distance(d: f64) -> Result<f64, GeometryError> {
    if d.is_finite() && d >= 0.0 {
        Ok(d)
    } else {
        Err(GeometryError::InvalidDistance(d))
    }
}

fn translate_along_view(pose: &ExtrinsicPose, signed: f64) -> Result<ExtrinsicPose, GeometryError> {
    let center = camera_center(pose) + pose.forward() * signed;
    let rotation = *pose.rotation();
    Ok(ExtrinsicPose::from_parts_unchecked(rotation, -(rotation * center)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn close(a: &ExtrinsicPose, b: &ExtrinsicPose, tol: f64) -> bool {
        (a.rotation() - b.rotation()).amax() <= tol && (a.translation() - b.translation()).amax() <= tol
    }

    fn sample() -> ExtrinsicPose {
        ExtrinsicPose::level(-37.0, Vector3::new(0.4, -0.1, 1.3))
    }

    #[test]
    fn zero_and_full_turns() {
        let p = sample();
        assert!(close(&rotate_yaw_in_place(&p, 0.0), &p, 0.0));
        assert!(close(&rotate_yaw_in_place(&p, 360.0), &p, 1e-9));
        let mut q = p;
        for _ in 0..4 {
            q = rotate_yaw_in_place(&q, 90.0);
        }
        assert!(close(&q, &p, 1e-9));
    }

    #[test]
    fn left_right_inverse_and_eight_steps() {
        let p = sample();
        let q = rotate_left(&rotate_right(&p, DEFAULT_ROTATION_DEG), DEFAULT_ROTATION_DEG);
        assert!(close(&q, &p, 1e-9));
        let mut r = p;
        for _ in 0..8 {
            r = rotate_right(&r, DEFAULT_ROTATION_DEG);
        }
        assert!(close(&r, &p, 1e-9));
        let id = rotate_right(&ExtrinsicPose::identity(), DEFAULT_ROTATION_DEG);
        assert!(camera_center(&id).amax() < 1e-15);
    }

    #[test]
    fn positive_yaw_turns_toward_camera_right() {
        let turned = rotate_right(&ExtrinsicPose::identity(), 90.0);
        assert!((turned.forward() - Vector3::x()).amax() < 1e-12);
        let turned = rotate_left(&ExtrinsicPose::identity(), 90.0);
        assert!((turned.forward() + Vector3::x()).amax() < 1e-12);
    }

    #[test]
    fn moves() {
        let p = sample();
        assert!(close(&move_forward(&p, 0.0).unwrap(), &p, 0.0));
        let q = move_backward(&move_forward(&p, 0.3).unwrap(), 0.3).unwrap();
        assert!(close(&q, &p, 1e-9));
        let fwd = move_forward(&ExtrinsicPose::identity(), 0.3).unwrap();
        assert!((camera_center(&fwd) - Vector3::new(0.0, 0.0, 0.3)).amax() < 1e-15);
        assert!(matches!(move_forward(&p, -1.0), Err(GeometryError::InvalidDistance(_))));
        assert!(matches!(move_backward(&p, f64::INFINITY), Err(GeometryError::InvalidDistance(_))));
    }

    #[test]
    fn turn_around_twice_is_identity() {
        let p = sample();
        let once = turn_around(&p);
        assert!((camera_center(&once) - camera_center(&p)).amax() < 1e-12);
        let (f0, f1) = (p.forward(), once.forward());
        assert!((f1.x + f0.x).abs() < 1e-12 && (f1.z + f0.z).abs() < 1e-12);
        assert!(close(&turn_around(&once), &p, 1e-9));
    }
}
