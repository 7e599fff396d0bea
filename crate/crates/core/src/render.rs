//! CPU z-buffered point splatting.

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{ExtrinsicPose, GeometryError, Intrinsics, PointCloud};

pub const DEFAULT_POINT_RADIUS: u32 = 0;
pub const DEFAULT_NEAR_CLIP: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("cannot render an empty point cloud")]
    EmptyCloud,
    #[error("invalid render options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub width: u32,
    pub height: u32,
    /// Half-size of the square splat in pixels; 0 fills exactly one pixel.
    pub point_radius: u32,
    pub near_clip: f64,
    pub background: [f32; 3],
}

impl RenderOptions {
    /// Defaults at the resolution of `k`.
    pub fn for_intrinsics(k: &Intrinsics) -> Self {
        Self {
            width: k.width,
            height: k.height,
            point_radius: DEFAULT_POINT_RADIUS,
            near_clip: DEFAULT_NEAR_CLIP,
            background: [0.0; 3],
        }
    }

    fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidOptions("width and height must be positive".into()));
        }
        if !(self.near_clip > 0.0) {
            return Err(RenderError::InvalidOptions(format!("near_clip {} must be positive", self.near_clip)));
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(RenderError::InvalidOptions("background channels must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z.
    pub depth: f64,
}

/// Projects a world point through `pose` and `k`. `None` when the point lies
/// closer than `near_clip` or behind the camera.
pub fn project_point(world: &Vector3<f64>, pose: &ExtrinsicPose, k: &Intrinsics, near_clip: f64) -> Option<Projection> {
    let p = pose.apply(world);
    if !(p.z >= near_clip) {
        return None;
    }
    Some(Projection { u: k.fx * p.x / p.z + k.cx, v: k.fy * p.y / p.z + k.cy, depth: p.z })
}

/// Row-major RGB raster with the per-pixel winning depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f32; 3]>,
    /// Depth of the winning point, `f64::INFINITY` where nothing landed.
    pub depth: Vec<f64>,
    pub coverage_fraction: f64,
}

impl RenderedImage {
    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn is_covered(&self, x: u32, y: u32) -> bool {
        self.depth[(y * self.width + x) as usize].is_finite()
    }

    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            Rgb(self.pixel(x, y).map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8))
        })
    }
}

/// Rasterizes `cloud` as seen from `pose`.
///
/// Each visible point fills a `(2r+1)²` square around its rounded projection.
/// The nearest depth wins each pixel; equal depths keep the lower point index.
/// When the output size differs from the calibration size, `k` is rescaled.
pub fn synthesize_novel_view(
    cloud: &PointCloud,
    pose: &ExtrinsicPose,
    k: &Intrinsics,
    options: &RenderOptions,
) -> Result<RenderedImage, RenderError> {
    if cloud.is_empty() {
        return Err(RenderError::EmptyCloud);
    }
    options.validate()?;
    let k = k.scaled_to(options.width, options.height)?;
    let (w, h) = (options.width as i64, options.height as i64);
    let r = options.point_radius as i64;
    let n = (w * h) as usize;
    let mut depth = vec![f64::INFINITY; n];
    let mut pixels = vec![options.background; n];

    for (point, color) in cloud.points.iter().zip(&cloud.colors) {
        let Some(p) = project_point(point, pose, &k, options.near_clip) else { continue };
        if !(p.u.is_finite() && p.v.is_finite()) {
            continue;
        }
        let (cu, cv) = (p.u.round(), p.v.round());
        if cu < -(r as f64) || cv < -(r as f64) || cu > (w + r) as f64 || cv > (h + r) as f64 {
            continue;
        }
        let (cu, cv) = (cu as i64, cv as i64);
        for y in (cv - r).max(0)..=(cv + r).min(h - 1) {
            for x in (cu - r).max(0)..=(cu + r).min(w - 1) {
                let i = (y * w + x) as usize;
                if p.depth < depth[i] {
                    depth[i] = p.depth;
                    pixels[i] = *color;
                }
            }
        }
    }
    let covered = depth.iter().filter(|d| d.is_finite()).count();
    Ok(RenderedImage {
        width: options.width,
        height: options.height,
        pixels,
        depth,
        coverage_fraction: covered as f64 / n as f64,
    })
}
