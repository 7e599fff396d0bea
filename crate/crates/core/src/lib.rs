//! Geometry, rendering and reconstruction bundles for program-driven spatial
//! reasoning over multi-view images.
//!
//! Camera convention: +x right, +y down, +z forward. Poses are world-to-camera
//! (`x_cam = R·x_world + t`). Angles at public boundaries are degrees.

pub mod geometry;
pub mod recon;
pub mod render;
pub mod scene;

pub use recon::SceneUnits;
