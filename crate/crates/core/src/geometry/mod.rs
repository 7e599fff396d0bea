//! Pinhole back-projection, point-cloud construction, camera-motion
//! description and pose manipulation.

mod camera;
mod cloud;
mod motion;
mod pose_ops;

pub use camera::{
    back_project, cam_to_world, camera_center, yaw_rotation, ExtrinsicPose, Intrinsics, ROTATION_TOLERANCE,
};
pub use cloud::{build_point_cloud, DepthMap, PointCloud, PointCloudOptions};
pub use motion::{
    classify_motion, describe_camera_motion, discretize_motion, egocentric_displacement, yaw_angle, MotionLabel,
    EPS_MOVE,
};
pub use pose_ops::{
    move_backward, move_forward, rotate_left, rotate_right, rotate_yaw_in_place, turn_around, DEFAULT_MOVE_DISTANCE,
    DEFAULT_ROTATION_DEG,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid depth {0}: must be finite and positive")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid move distance {0}: must be finite and non-negative")]
    InvalidDistance(f64),
    #[error("need at least 2 views to describe motion, got {0}")]
    InsufficientViews(usize),
    #[error("point cloud is empty: every pixel was filtered out")]
    EmptyCloud,
    #[error("depth map has {actual} values, expected {expected}")]
    DepthShape { expected: usize, actual: usize },
}
