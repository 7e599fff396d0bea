use nalgebra::Vector3;

use super::camera::{back_project, cam_to_world};
use super::GeometryError;
use crate::recon::ReconstructionBundle;

/// Row-major depth raster in scene units. Non-finite or non-positive values
/// mark invalid pixels.
#[derive(Debug, Clone)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
    confidence: Option<Vec<f32>>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>, confidence: Option<Vec<f32>>) -> Result<Self, GeometryError> {
        let expected = width as usize * height as usize;
        if values.len() != expected {
            return Err(GeometryError::DepthShape { expected, actual: values.len() });
        }
        if let Some(c) = &confidence {
            if c.len() != expected {
                return Err(GeometryError::DepthShape { expected, actual: c.len() });
            }
        }
        Ok(Self { width, height, values, confidence })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn confidence(&self) -> Option<&[f32]> {
        self.confidence.as_deref()
    }

    /// Depth at column `x`, row `y`, or `None` if invalid.
    pub fn get(&self, x: u32, y: u32) -> Option<f32> {
        let d = self.values[(y * self.width + x) as usize];
        (d.is_finite() && d > 0.0).then_some(d)
    }
}

// Bitwise comparison so that NaN sentinels compare equal.
impl PartialEq for DepthMap {
    fn eq(&self, other: &Self) -> bool {
        fn bits(v: &[f32]) -> impl Iterator<Item = u32> + '_ {
            v.iter().map(|x| x.to_bits())
        }
        self.width == other.width
            && self.height == other.height
            && bits(&self.values).eq(bits(&other.values))
            && match (&self.confidence, &other.confidence) {
                (None, None) => true,
                (Some(a), Some(b)) => bits(a).eq(bits(b)),
                _ => false,
            }
    }
}

/// World-space coloured points; colours are RGB in [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Vec<[f32; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCloudOptions {
    /// Sample every `stride`-th pixel along both axes.
    pub stride: u32,
    /// Pixels with confidence below this are dropped. Ignored for frames
    /// without a confidence map.
    pub confidence_min: f32,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl Default for PointCloudOptions {
    fn default() -> Self {
        Self { stride: 1, confidence_min: 0.0, depth_min: 0.0, depth_max: f64::INFINITY }
    }
}

/// Back-projects every retained pixel of every frame into world space.
///
/// Points are emitted frame-major, then row-major within a frame.
pub fn build_point_cloud(bundle: &ReconstructionBundle, options: &PointCloudOptions) -> Result<PointCloud, GeometryError> {
    let stride = options.stride.max(1);
    let mut cloud = PointCloud::default();
    for frame in bundle.frames() {
        let depth = &frame.depth;
        let conf = depth.confidence();
        for y in (0..depth.height()).step_by(stride as usize) {
            for x in (0..depth.width()).step_by(stride as usize) {
                let Some(d) = depth.get(x, y) else { continue };
                let d = d as f64;
                if d < options.depth_min || d > options.depth_max {
                    continue;
                }
                if let Some(c) = conf {
                    if c[(y * depth.width() + x) as usize] < options.confidence_min {
                        continue;
                    }
                }
                let cam = back_project(x as f64, y as f64, d, &frame.intrinsics)?;
                let rgb = frame.image.get_pixel(x, y).0;
                cloud.points.push(cam_to_world(&cam, &frame.pose));
                cloud.colors.push(rgb.map(|c| c as f32 / 255.0));
            }
        }
    }
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(cloud)
}
