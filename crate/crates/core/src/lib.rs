//! Multi-LiDAR placement on a vehicle by minimizing the largest
//! volume-to-surface ratio (VSR) among the blind subspaces left between beam
//! cones.
//!
//! The pipeline: voxelize the region of interest ([`geometry`]), label each
//! voxel by the beam band it falls in for every LiDAR and split the labels
//! into face-connected components ([`segmentation`]), score each component
//! ([`cost`]), and search poses with an Artificial Bee Colony ([`abc`],
//! [`placement`]). [`odr`] estimates object detection rate for a fixed
//! configuration, and [`scenario`] / [`cli`] drive it all from JSON files.

pub mod abc;
pub mod cli;
pub mod cost;
pub mod error;
pub mod geometry;
pub mod odr;
pub mod placement;
pub mod scenario;
pub mod segmentation;
pub mod units;

pub use error::{Error, Result};
