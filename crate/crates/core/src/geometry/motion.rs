use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::camera::{camera_center, ExtrinsicPose};
use super::GeometryError;
use crate::SceneUnits;

/// Horizontal displacements shorter than this are reported as negligible.
pub const EPS_MOVE: f64 = 1e-6;

/// Egocentric heading of a camera displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionLabel {
    Forward,
    ForwardRight,
    Right,
    BackwardRight,
    Backward,
    BackwardLeft,
    Left,
    ForwardLeft,
    Negligible,
}

impl MotionLabel {
    /// The eight canonical directions, clockwise from forward.
    pub const SECTORS: [MotionLabel; 8] = [
        MotionLabel::Forward,
        MotionLabel::ForwardRight,
        MotionLabel::Right,
        MotionLabel::BackwardRight,
        MotionLabel::Backward,
        MotionLabel::BackwardLeft,
        MotionLabel::Left,
        MotionLabel::ForwardLeft,
    ];

    /// Heading at the centre of the label's sector, in degrees.
    pub fn sector_center(self) -> Option<f64> {
        Self::SECTORS.iter().position(|&l| l == self).map(|i| {
            let deg = 45.0 * i as f64;
            if deg > 180.0 {
                deg - 360.0
            } else {
                deg
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MotionLabel::Forward => "forward",
            MotionLabel::ForwardRight => "forward-right",
            MotionLabel::Right => "right",
            MotionLabel::BackwardRight => "backward-right",
            MotionLabel::Backward => "backward",
            MotionLabel::BackwardLeft => "backward-left",
            MotionLabel::Left => "left",
            MotionLabel::ForwardLeft => "forward-left",
            MotionLabel::Negligible => "negligible",
        }
    }
}

impl fmt::Display for MotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `R₁·(C₂ − C₁)`: the motion from `pose1` to `pose2` seen from camera 1.
pub fn egocentric_displacement(pose1: &ExtrinsicPose, pose2: &ExtrinsicPose) -> Vector3<f64> {
    let delta_world = camera_center(pose2) - camera_center(pose1);
    pose1.rotation() * delta_world
}

/// Heading `atan2(d_x, d_z)` in degrees, in (−180, 180]. The vertical
/// component is ignored. Returns `None` when the horizontal displacement is
/// shorter than [`EPS_MOVE`].
pub fn yaw_angle(displacement: &Vector3<f64>) -> Option<f64> {
    let (dx, dz) = (displacement.x, displacement.z);
    if dx.hypot(dz) < EPS_MOVE {
        return None;
    }
    let deg = dx.atan2(dz).to_degrees();
    Some(if deg <= -180.0 { deg + 360.0 } else { deg })
}

/// Maps a heading in (−180, 180] onto one of eight 45° sectors, each
/// half-open on its upper edge: forward is [−22.5, 22.5).
pub fn discretize_motion(theta: f64) -> MotionLabel {
    let sector = ((theta + 22.5) / 45.0).floor().rem_euclid(8.0) as usize;
    MotionLabel::SECTORS[sector]
}

/// Label of the displacement from `pose1` to `pose2`.
pub fn classify_motion(pose1: &ExtrinsicPose, pose2: &ExtrinsicPose) -> MotionLabel {
    yaw_angle(&egocentric_displacement(pose1, pose2)).map_or(MotionLabel::Negligible, discretize_motion)
}

/// One line per consecutive pair of poses, views numbered from 1.
///
/// Distances carry a unit suffix only for metric reconstructions. Vertical
/// motion is mentioned when it exceeds a quarter of the total displacement.
pub fn describe_camera_motion(poses: &[ExtrinsicPose], units: SceneUnits) -> Result<String, GeometryError> {
    if poses.len() < 2 {
        return Err(GeometryError::InsufficientViews(poses.len()));
    }
    let lines: Vec<String> = poses
        .windows(2)
        .enumerate()
        .map(|(i, pair)| describe_step(i + 1, &pair[0], &pair[1], units))
        .collect();
    Ok(lines.join("\n"))
}

fn describe_step(view: usize, from: &ExtrinsicPose, to: &ExtrinsicPose, units: SceneUnits) -> String {
    let prefix = format!("From view {} to view {}:", view, view + 1);
    let d = egocentric_displacement(from, to);
    let distance = d.norm();
    if distance < EPS_MOVE {
        return format!("{prefix} negligible motion");
    }
    let dist = match units {
        SceneUnits::MetricMeters => format!("{distance:.3} m"),
        SceneUnits::Normalized => format!("{distance:.3}"),
    };
    // +y points down in the camera frame.
    let vertical = if d.y.abs() > 0.25 * distance {
        Some(if d.y < 0.0 { "up" } else { "down" })
    } else {
        None
    };
    match (yaw_angle(&d).map(discretize_motion), vertical) {
        (Some(label), Some(v)) => format!("{prefix} moved {label} while moving {v} (distance {dist})"),
        (Some(label), None) => format!("{prefix} moved {label} (distance {dist})"),
        (None, Some(v)) => format!("{prefix} moved {v} (distance {dist})"),
        (None, None) => format!("{prefix} negligible motion"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn displacement_examples() {
        let p = ExtrinsicPose::level(30.0, Vector3::new(1.0, 0.0, 2.0));
        assert_eq!(egocentric_displacement(&p, &p), Vector3::zeros());
        let p1 = ExtrinsicPose::identity();
        let p2 = ExtrinsicPose::from_center(Matrix3::identity(), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(egocentric_displacement(&p1, &p2), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn yaw_examples() {
        assert_eq!(yaw_angle(&Vector3::new(0.0, 5.0, 1.0)), Some(0.0));
        assert_eq!(yaw_angle(&Vector3::new(1.0, -3.0, 0.0)), Some(90.0));
        assert!((yaw_angle(&Vector3::new(1.0, 0.0, 1.0)).unwrap() - 45.0).abs() < 1e-12);
        assert_eq!(yaw_angle(&Vector3::new(-0.0, 0.0, -1.0)), Some(180.0));
        assert_eq!(yaw_angle(&Vector3::new(0.0, 1.0, 0.0)), None);
        assert_eq!(yaw_angle(&Vector3::new(1e-7, 0.0, 1e-7)), None);
    }

    #[test]
    fn sector_boundaries() {
        use MotionLabel::*;
        let cases = [
            (0.0, Forward),
            (90.0, Right),
            (180.0, Backward),
            (-22.5, Forward),
            (22.5, ForwardRight),
            (-22.5 - 1e-9, ForwardLeft),
            (67.5, Right),
            (112.5, BackwardRight),
            (157.5, Backward),
            (-157.5, BackwardLeft),
            (-157.5 - 1e-9, Backward),
            (-179.999, Backward),
            (-112.5, Left),
            (-67.5, ForwardLeft),
        ];
        for (theta, want) in cases {
            assert_eq!(discretize_motion(theta), want, "theta = {theta}");
        }
    }

    #[test]
    fn sector_centers_round_trip() {
        for label in MotionLabel::SECTORS {
            assert_eq!(discretize_motion(label.sector_center().unwrap()), label);
        }
        assert_eq!(MotionLabel::Negligible.sector_center(), None);
    }

    #[test]
    fn describe_requires_two_views() {
        let err = describe_camera_motion(&[ExtrinsicPose::identity()], SceneUnits::Normalized).unwrap_err();
        assert!(matches!(err, GeometryError::InsufficientViews(1)));
    }

    #[test]
    fn describe_identical_poses() {
        let p = ExtrinsicPose::level(10.0, Vector3::new(0.1, 0.2, 0.3));
        let text = describe_camera_motion(&[p, p], SceneUnits::Normalized).unwrap();
        assert_eq!(text, "From view 1 to view 2: negligible motion");
    }

    #[test]
    fn describe_forward_step_and_units() {
        let p1 = ExtrinsicPose::level(40.0, Vector3::zeros());
        let step = p1.forward() * 0.5;
        let p2 = ExtrinsicPose::level(40.0, step);
        let p3 = ExtrinsicPose::level(40.0, step * 2.0);
        let text = describe_camera_motion(&[p1, p2, p3], SceneUnits::Normalized).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "From view 1 to view 2: moved forward (distance 0.500)");
        assert_eq!(lines[1], "From view 2 to view 3: moved forward (distance 0.500)");
        let metric = describe_camera_motion(&[p1, p2], SceneUnits::MetricMeters).unwrap();
        assert_eq!(metric, "From view 1 to view 2: moved forward (distance 0.500 m)");
    }

    #[test]
    fn describe_vertical_component() {
        let p1 = ExtrinsicPose::identity();
        let up_right = ExtrinsicPose::from_center(Matrix3::identity(), Vector3::new(1.0, -1.0, 0.0)).unwrap();
        let text = describe_camera_motion(&[p1, up_right], SceneUnits::Normalized).unwrap();
        assert_eq!(text, "From view 1 to view 2: moved right while moving up (distance 1.414)");
        let down = ExtrinsicPose::from_center(Matrix3::identity(), Vector3::new(0.0, 2.0, 0.0)).unwrap();
        let text = describe_camera_motion(&[p1, down], SceneUnits::Normalized).unwrap();
        assert_eq!(text, "From view 1 to view 2: moved down (distance 2.000)");
    }
}
