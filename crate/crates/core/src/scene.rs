use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use thiserror::Error;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene has no images")]
    NoImages,
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot decode image {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },
}

/// A question over an ordered set of views.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    question: String,
    image_paths: Vec<PathBuf>,
    images: Vec<RgbImage>,
}

impl Scene {
    /// Loads images from `inputs`. A directory expands to its png/jpg/jpeg
    /// files in lexicographic order; files are taken as given. Duplicate
    /// paths keep their first occurrence.
    pub fn load(inputs: &[PathBuf], question: impl Into<String>) -> Result<Self, SceneError> {
        let paths = expand_image_paths(inputs)?;
        let images = paths.iter().map(|p| read_rgb(p)).collect::<Result<Vec<_>, _>>()?;
        Self::from_images(question, paths, images)
    }

    pub fn from_images(
        question: impl Into<String>,
        image_paths: Vec<PathBuf>,
        images: Vec<RgbImage>,
    ) -> Result<Self, SceneError> {
        if images.is_empty() || images.len() != image_paths.len() {
            return Err(SceneError::NoImages);
        }
        Ok(Self { question: question.into(), image_paths, images })
    }

    /// The frame images of `bundle` as in-memory views named
    /// `frame_NNNN.png`.
    pub fn from_bundle(bundle: &crate::recon::ReconstructionBundle, question: impl Into<String>) -> Self {
        let paths = (0..bundle.len()).map(|i| PathBuf::from(format!("frame_{i:04}.png"))).collect();
        let images = bundle.frames().iter().map(|f| f.image.clone()).collect();
        Self { question: question.into(), image_paths: paths, images }
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn image_paths(&self) -> &[PathBuf] {
        &self.image_paths
    }

    pub fn images(&self) -> &[RgbImage] {
        &self.images
    }
}

pub fn expand_image_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, SceneError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for input in inputs {
        let expanded = if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|source| SceneError::Io { path: input.clone(), source })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && has_image_extension(p))
                .collect();
            found.sort();
            found
        } else {
            vec![input.clone()]
        };
        for p in expanded {
            if seen.insert(p.clone()) {
                out.push(p);
            }
        }
    }
    if out.is_empty() {
        return Err(SceneError::NoImages);
    }
    Ok(out)
}

fn has_image_extension(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn read_rgb(path: &Path) -> Result<RgbImage, SceneError> {
    let bytes = fs::read(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
    image::load_from_memory(&bytes)
        .map(|i| i.to_rgb8())
        .map_err(|e| SceneError::Decode { path: path.to_path_buf(), message: e.to_string() })
}
