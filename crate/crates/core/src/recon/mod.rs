//! Reconstruction bundles: per-frame image, depth, intrinsics and pose, plus
//! the three ways of obtaining one (bundle directory, remote service,
//! analytic synthetic scene).

mod format;
mod remote;
pub mod synthetic;

use std::fmt;
use std::path::PathBuf;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DepthMap, ExtrinsicPose, Intrinsics};

pub use format::{load_bundle, save_bundle, MANIFEST_FILE, MANIFEST_VERSION};
pub use remote::{archive_bundle_dir, reconstruct_remote, RECONSTRUCT_PATH};

/// Scale of a reconstruction. Uniform across a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SceneUnits {
    #[serde(rename = "normalized")]
    Normalized,
    #[serde(rename = "metric-meters")]
    MetricMeters,
}

impl fmt::Display for SceneUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneUnits::Normalized => "normalized",
            SceneUnits::MetricMeters => "metric-meters",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: RgbImage,
    pub depth: DepthMap,
    pub intrinsics: Intrinsics,
    pub pose: ExtrinsicPose,
}

/// Validated multi-frame reconstruction. Frames share one resolution and
/// keep the order of the input images.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionBundle {
    frames: Vec<Frame>,
    units: SceneUnits,
    source_tag: String,
}

impl ReconstructionBundle {
    pub fn new(frames: Vec<Frame>, units: SceneUnits, source_tag: impl Into<String>) -> Result<Self, BundleError> {
        let Some(first) = frames.first() else {
            return Err(BundleError::Empty);
        };
        let (w, h) = first.image.dimensions();
        for (i, f) in frames.iter().enumerate() {
            if f.image.dimensions() != (w, h)
                || (f.depth.width(), f.depth.height()) != (w, h)
                || (f.intrinsics.width, f.intrinsics.height) != (w, h)
            {
                return Err(BundleError::ShapeMismatch(format!(
                    "frame {i}: image {:?}, depth {}x{}, intrinsics {}x{}; expected {w}x{h}",
                    f.image.dimensions(),
                    f.depth.width(),
                    f.depth.height(),
                    f.intrinsics.width,
                    f.intrinsics.height
                )));
            }
            f.intrinsics
                .validate()
                .map_err(|e| BundleError::InvalidFrame { frame: i, message: e.to_string() })?;
            ExtrinsicPose::new(*f.pose.rotation(), *f.pose.translation())
                .map_err(|e| BundleError::InvalidFrame { frame: i, message: e.to_string() })?;
        }
        Ok(Self { frames, units, source_tag: source_tag.into() })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn units(&self) -> SceneUnits {
        self.units
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn width(&self) -> u32 {
        self.frames[0].image.width()
    }

    pub fn height(&self) -> u32 {
        self.frames[0].image.height()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn poses(&self) -> Vec<ExtrinsicPose> {
        self.frames.iter().map(|f| f.pose).collect()
    }
}

/// The stored depth map of frame `index`.
pub fn estimate_depth(bundle: &ReconstructionBundle, index: usize) -> Result<&DepthMap, BundleError> {
    bundle
        .frames
        .get(index)
        .map(|f| &f.depth)
        .ok_or(BundleError::FrameIndex { index, len: bundle.frames.len() })
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle has no frames")]
    Empty,
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("unsupported manifest version {0}")]
    UnsupportedVersion(u64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed raster {}: expected {expected} bytes, found {actual}", path.display())]
    MalformedRaster { path: PathBuf, expected: usize, actual: usize },
    #[error("image {}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("frame {frame}: {message}")]
    InvalidFrame { frame: usize, message: String },
    #[error("frame index {index} out of range for {len} frames")]
    FrameIndex { index: usize, len: usize },
    #[error("invalid synthetic scene: {0}")]
    InvalidSpec(String),
    #[error("reconstruction service timed out after {0:?}")]
    RemoteTimeout(std::time::Duration),
    #[error("reconstruction service returned status {status}: {body}")]
    RemoteStatus { status: u16, body: String },
    #[error("reconstruction transport error: {0}")]
    RemoteTransport(String),
    #[error("malformed bundle archive: {0}")]
    MalformedArchive(String),
}
