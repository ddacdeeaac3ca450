//! The LiDAR placement problem as a box-constrained minimization.
//!
//! Each LiDAR contributes five decision variables `(x, y, z, pitch, roll)`.
//! Yaw is held at zero: a spinning LiDAR's cones are symmetric about its
//! vertical axis, so yaw only matters through its coupling with pitch and
//! roll, which the optimizer already covers.

use crate::abc::{optimize, AbcParams, SearchBox, SolveResult};
use crate::cost::{evaluate, max_vsr_on_grid, Evaluation};
use crate::error::{Error, Result};
use crate::odr::{estimate_odr, ObjectSpec, OdrReport};
use crate::segmentation::segment;
use crate::geometry::{build_voxel_grid, LidarModel, PoseBounds, PoseConfig, RoiSpec, Vec3, VoxelGrid};

pub const VARS_PER_LIDAR: usize = 5;

/// Everything needed to score a configuration set.
#[derive(Clone, Debug)]
pub struct PlacementProblem {
    grid: VoxelGrid,
    models: Vec<LidarModel>,
    bounds: PoseBounds,
}

impl PlacementProblem {
    /// One entry of `models` per LiDAR to place.
    pub fn new(roi: &RoiSpec, models: Vec<LidarModel>, bounds: PoseBounds) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Mismatch("at least one lidar is required".into()));
        }
        bounds.validate()?;
        Ok(PlacementProblem {
            grid: build_voxel_grid(roi)?,
            models,
            bounds,
        })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn models(&self) -> &[LidarModel] {
        &self.models
    }

    pub fn bounds(&self) -> &PoseBounds {
        &self.bounds
    }

    pub fn lidar_count(&self) -> usize {
        self.models.len()
    }

    pub fn dim(&self) -> usize {
        VARS_PER_LIDAR * self.lidar_count()
    }

    pub fn search_box(&self) -> SearchBox {
        let pick = |p: &PoseConfig| [p.position.x, p.position.y, p.position.z, p.pitch, p.roll];
        let (lo, hi) = (pick(&self.bounds.lower), pick(&self.bounds.upper));
        let n = self.lidar_count();
        SearchBox::new(lo.repeat(n), hi.repeat(n)).expect("pose bounds were validated")
    }

    pub fn decode(&self, x: &[f64]) -> Vec<PoseConfig> {
        x.chunks_exact(VARS_PER_LIDAR)
            .map(|c| PoseConfig::new(Vec3::new(c[0], c[1], c[2]), 0.0, c[3], c[4]))
            .collect()
    }

    pub fn encode(&self, poses: &[PoseConfig]) -> Vec<f64> {
        poses
            .iter()
            .flat_map(|p| [p.position.x, p.position.y, p.position.z, p.pitch, p.roll])
            .collect()
    }

    pub fn max_vsr(&self, poses: &[PoseConfig]) -> Result<f64> {
        max_vsr_on_grid(poses, &self.models, &self.grid)
    }

    pub fn evaluate(&self, poses: &[PoseConfig]) -> Result<Evaluation> {
        evaluate(poses, &self.models, &self.grid)
    }

    pub fn odr(&self, poses: &[PoseConfig], object: &ObjectSpec, trials: usize, threshold: usize, seed: u64) -> Result<OdrReport> {
        let segmentation = segment(poses, &self.models, &self.grid)?;
        estimate_odr(&segmentation, &self.grid, object, trials, threshold, seed)
    }

    /// Objective on a raw decision vector of length [`Self::dim`].
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.max_vsr(&self.decode(x))
            .expect("decision vector length matches the lidar count")
    }

    pub fn solve(&self, params: &AbcParams) -> Result<SolveResult> {
        optimize(|x| self.objective(x), &self.search_box(), params)
    }
}
