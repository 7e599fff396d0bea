//! Bundle directory format.
//!
//! ```text
//! manifest.json          {"version": 1, "units", "source_tag", "width", "height", "frames": [...]}
//! images/frame_NNNN.png  8-bit RGB, width × height
//! depth/frame_NNNN.f32   little-endian f32, row-major, width·height values, no header
//! confidence/...f32      optional, same layout as depth
//! ```
//!
//! Each frame entry carries `image`, `depth`, `confidence` (path or null),
//! `intrinsics` (9 numbers, row-major 3×3) and `extrinsics` (12 numbers,
//! row-major 3×4 world-to-camera). Paths are relative to the bundle root.

use std::fs;
use std::io::{self, Cursor};
use std::path::{Component, Path, PathBuf};

use image::ImageFormat;
use serde::{Deserialize, Serialize};

use super::{BundleError, Frame, ReconstructionBundle, SceneUnits};
use crate::geometry::{DepthMap, ExtrinsicPose, Intrinsics};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u64,
    units: SceneUnits,
    source_tag: String,
    width: u32,
    height: u32,
    frames: Vec<FrameEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameEntry {
    image: String,
    depth: Option<String>,
    confidence: Option<String>,
    intrinsics: Vec<f64>,
    extrinsics: Vec<f64>,
}

pub fn load_bundle(dir: &Path) -> Result<ReconstructionBundle, BundleError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = read_file(&manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|e| BundleError::Manifest { path: manifest_path.clone(), message: e.to_string() })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(BundleError::UnsupportedVersion(manifest.version));
    }
    let (width, height) = (manifest.width, manifest.height);
    if width == 0 || height == 0 {
        return Err(BundleError::Manifest { path: manifest_path, message: "width and height must be positive".into() });
    }
    if manifest.frames.is_empty() {
        return Err(BundleError::Empty);
    }

    let field_err = |i: usize, field: &str, message: String| BundleError::Manifest {
        path: manifest_path.clone(),
        message: format!("frames[{i}].{field}: {message}"),
    };

    let mut frames = Vec::with_capacity(manifest.frames.len());
    for (i, entry) in manifest.frames.iter().enumerate() {
        let image_path = resolve(dir, &entry.image).map_err(|m| field_err(i, "image", m))?;
        let Some(depth_rel) = &entry.depth else {
            return Err(BundleError::ShapeMismatch(format!(
                "manifest declares {} frames but frame {i} has no depth raster",
                manifest.frames.len()
            )));
        };
        let depth_path = resolve(dir, depth_rel).map_err(|m| field_err(i, "depth", m))?;
        let confidence_path = match &entry.confidence {
            Some(rel) => Some(resolve(dir, rel).map_err(|m| field_err(i, "confidence", m))?),
            None => None,
        };

        let image = read_image(&image_path)?;
        if image.dimensions() != (width, height) {
            return Err(BundleError::Image {
                path: image_path,
                message: format!("dimensions {:?} differ from manifest {width}x{height}", image.dimensions()),
            });
        }
        let values = read_raster(&depth_path, width, height)?;
        let confidence = confidence_path.map(|p| read_raster(&p, width, height)).transpose()?;
        let depth = DepthMap::new(width, height, values, confidence)
            .map_err(|e| BundleError::ShapeMismatch(e.to_string()))?;

        let k: [f64; 9] = entry
            .intrinsics
            .as_slice()
            .try_into()
            .map_err(|_| field_err(i, "intrinsics", format!("expected 9 numbers, got {}", entry.intrinsics.len())))?;
        let intrinsics =
            Intrinsics::from_row_major(&k, width, height).map_err(|e| field_err(i, "intrinsics", e.to_string()))?;
        let g: [f64; 12] = entry
            .extrinsics
            .as_slice()
            .try_into()
            .map_err(|_| field_err(i, "extrinsics", format!("expected 12 numbers, got {}", entry.extrinsics.len())))?;
        let pose = ExtrinsicPose::from_row_major(&g).map_err(|e| field_err(i, "extrinsics", e.to_string()))?;

        frames.push(Frame { image, depth, intrinsics, pose });
    }
    ReconstructionBundle::new(frames, manifest.units, manifest.source_tag)
}

/// Writes `bundle` in canonical form. Loading and re-saving yields
/// byte-identical files.
pub fn save_bundle(bundle: &ReconstructionBundle, dir: &Path) -> Result<(), BundleError> {
    if bundle.is_empty() {
        return Err(BundleError::Empty);
    }
    for sub in ["images", "depth", "confidence"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|source| BundleError::Io { path: p, source })?;
    }
    let mut entries = Vec::with_capacity(bundle.len());
    for (i, frame) in bundle.frames().iter().enumerate() {
        let image_rel = format!("images/frame_{i:04}.png");
        let depth_rel = format!("depth/frame_{i:04}.f32");
        let mut png = Vec::new();
        frame
            .image
            .write_to(&mut Cursor::new(&mut png), ImageFormat::Png)
            .map_err(|e| BundleError::Image { path: dir.join(&image_rel), message: e.to_string() })?;
        write_file(&dir.join(&image_rel), &png)?;
        write_file(&dir.join(&depth_rel), &raster_bytes(frame.depth.values()))?;
        let confidence = match frame.depth.confidence() {
            Some(c) => {
                let rel = format!("confidence/frame_{i:04}.f32");
                write_file(&dir.join(&rel), &raster_bytes(c))?;
                Some(rel)
            }
            None => None,
        };
        entries.push(FrameEntry {
            image: image_rel,
            depth: Some(depth_rel),
            confidence,
            intrinsics: frame.intrinsics.to_row_major().to_vec(),
            extrinsics: frame.pose.to_row_major().to_vec(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        units: bundle.units(),
        source_tag: bundle.source_tag().to_string(),
        width: bundle.width(),
        height: bundle.height(),
        frames: entries,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}

fn resolve(root: &Path, rel: &str) -> Result<PathBuf, String> {
    let p = Path::new(rel);
    if rel.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir)) {
        return Err(format!("path {rel:?} must be relative and stay inside the bundle"));
    }
    Ok(root.join(p))
}

fn read_file(path: &Path) -> Result<Vec<u8>, BundleError> {
    fs::read(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            BundleError::MissingFile(path.to_path_buf())
        } else {
            BundleError::Io { path: path.to_path_buf(), source }
        }
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BundleError> {
    fs::write(path, bytes).map_err(|source| BundleError::Io { path: path.to_path_buf(), source })
}

fn read_image(path: &Path) -> Result<image::RgbImage, BundleError> {
    let bytes = read_file(path)?;
    image::load_from_memory(&bytes)
        .map(|img| img.to_rgb8())
        .map_err(|e| BundleError::Image { path: path.to_path_buf(), message: e.to_string() })
}

fn read_raster(path: &Path, width: u32, height: u32) -> Result<Vec<f32>, BundleError> {
    let bytes = read_file(path)?;
    let expected = 4 * width as usize * height as usize;
    if bytes.len() != expected {
        return Err(BundleError::MalformedRaster { path: path.to_path_buf(), expected, actual: bytes.len() });
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn raster_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::synthetic::{synthesize_scene, SyntheticSceneSpec, TrajectoryPattern};

    fn small_bundle() -> ReconstructionBundle {
        let spec = SyntheticSceneSpec::desk(32, 24, TrajectoryPattern::Lateral { step: 0.2, count: 3 });
        synthesize_scene(&spec).unwrap().0
    }

    fn rewrite_manifest(dir: &Path, f: impl FnOnce(&mut serde_json::Value)) {
        let path = dir.join(MANIFEST_FILE);
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        f(&mut v);
        fs::write(path, serde_json::to_vec(&v).unwrap()).unwrap();
    }

    #[test]
    fn round_trip_is_field_for_field() {
        let bundle = small_bundle();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        assert_eq!(load_bundle(dir.path()).unwrap(), bundle);
    }

    #[test]
    fn resave_is_byte_identical() {
        let bundle = small_bundle();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        save_bundle(&bundle, a.path()).unwrap();
        save_bundle(&load_bundle(a.path()).unwrap(), b.path()).unwrap();
        for rel in ["manifest.json", "images/frame_0001.png", "depth/frame_0002.f32"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
        }
    }

    #[test]
    fn missing_depth_entry_is_shape_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&small_bundle(), dir.path()).unwrap();
        rewrite_manifest(dir.path(), |v| v["frames"][2]["depth"] = serde_json::Value::Null);
        assert!(matches!(load_bundle(dir.path()), Err(BundleError::ShapeMismatch(_))));
    }

    #[test]
    fn short_raster_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&small_bundle(), dir.path()).unwrap();
        let raster = dir.path().join("depth/frame_0001.f32");
        let mut bytes = fs::read(&raster).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&raster, bytes).unwrap();
        match load_bundle(dir.path()) {
            Err(BundleError::MalformedRaster { path, expected, actual }) => {
                assert_eq!(path, raster);
                assert_eq!(expected, 4 * 32 * 24);
                assert_eq!(actual, expected - 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_errors_carry_locus() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(BundleError::MissingFile(p)) if p.ends_with(MANIFEST_FILE)));

        save_bundle(&small_bundle(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("images/frame_0000.png")).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(BundleError::MissingFile(p)) if p.ends_with("frame_0000.png")));

        let dir = tempfile::tempdir().unwrap();
        save_bundle(&small_bundle(), dir.path()).unwrap();
        rewrite_manifest(dir.path(), |v| v["frames"][1]["extrinsics"][0] = 2.0.into());
        let err = load_bundle(dir.path()).unwrap_err();
        assert!(err.to_string().contains("frames[1].extrinsics"), "{err}");

        rewrite_manifest(dir.path(), |v| v["frames"][0]["intrinsics"] = serde_json::json!([1, 2, 3]));
        let err = load_bundle(dir.path()).unwrap_err();
        assert!(err.to_string().contains("frames[0].intrinsics"), "{err}");

        rewrite_manifest(dir.path(), |v| v["frames"][0]["image"] = "../escape.png".into());
        assert!(matches!(load_bundle(dir.path()), Err(BundleError::Manifest { .. })));

        fs::write(dir.path().join(MANIFEST_FILE), b"{not json").unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(BundleError::Manifest { .. })));
    }

    #[test]
    fn image_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&small_bundle(), dir.path()).unwrap();
        image::RgbImage::new(8, 8).save(dir.path().join("images/frame_0002.png")).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(BundleError::Image { .. })));
    }

    #[test]
    fn empty_bundle_cannot_be_saved_or_built() {
        assert!(matches!(ReconstructionBundle::new(vec![], SceneUnits::Normalized, "x"), Err(BundleError::Empty)));
    }
}
