//! Two-level segmentation of the voxel grid.
//!
//! The first level gives every active voxel one digit per LiDAR: the band
//! between consecutive beam cones its centre falls in. The second level
//! splits each distinct digit vector into face-connected components.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{LidarFrame, LidarModel, PoseConfig, Vec3, VoxelGrid};

/// One digit per LiDAR; digit `d` of LiDAR `i` lies in `0..=beam_count(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubspaceCode(pub Vec<u16>);

impl SubspaceCode {
    pub fn digits(&self) -> &[u16] {
        &self.0
    }
}

impl fmt::Display for SubspaceCode {
    /// Digits joined by `-`, e.g. `3-16-0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl Serialize for SubspaceCode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Maximum number of distinct codes: the product of `beam_count + 1`.
pub fn code_space_size(models: &[LidarModel]) -> u128 {
    models.iter().map(|m| m.beam_count() as u128 + 1).product()
}

/// Band index of a LiDAR-local point: the number of beam cones lying at or
/// below it. Returns 0 below the lowest cone and `beam_count` on or above
/// the highest one.
pub fn beam_digit(model: &LidarModel, local: &Vec3) -> usize {
    let r = (local.x * local.x + local.y * local.y).sqrt();
    model.slopes().partition_point(|&slope| local.z >= slope * r)
}

/// Packed first-level labels for every voxel of a grid.
///
/// Codes are stored as mixed-radix integers, digit of LiDAR 0 most
/// significant, so integer order equals lexicographic digit order.
#[derive(Clone, Debug)]
pub struct VoxelLabels {
    radices: Vec<u64>,
    codes: Vec<u64>,
}

impl VoxelLabels {
    /// Sentinel for inactive voxels.
    pub const INACTIVE: u64 = u64::MAX;

    #[inline]
    pub fn packed(&self, linear: usize) -> Option<u64> {
        let c = self.codes[linear];
        (c != Self::INACTIVE).then_some(c)
    }

    pub fn packed_codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn unpack(&self, mut packed: u64) -> SubspaceCode {
        let mut digits = vec![0u16; self.radices.len()];
        for (d, &radix) in digits.iter_mut().zip(&self.radices).rev() {
            *d = (packed % radix) as u16;
            packed /= radix;
        }
        SubspaceCode(digits)
    }

    pub fn code(&self, linear: usize) -> Option<SubspaceCode> {
        self.packed(linear).map(|c| self.unpack(c))
    }

    /// Number of distinct codes over active voxels.
    pub fn distinct_codes(&self) -> usize {
        let mut seen: Vec<u64> = self.codes.iter().copied().filter(|&c| c != Self::INACTIVE).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Labels each active voxel centre with its per-LiDAR band digits.
pub fn first_level_labels(
    configs: &[PoseConfig],
    models: &[LidarModel],
    grid: &VoxelGrid,
) -> Result<VoxelLabels> {
    if configs.is_empty() {
        return Err(Error::Mismatch("at least one lidar is required".into()));
    }
    if configs.len() != models.len() {
        return Err(Error::Mismatch(format!(
            "{} poses but {} lidar models",
            configs.len(),
            models.len()
        )));
    }
    if code_space_size(models) >= u64::MAX as u128 {
        return Err(Error::Mismatch("too many lidars to pack subspace codes".into()));
    }
    let frames: Vec<LidarFrame> = configs.iter().map(LidarFrame::new).collect();
    let radices: Vec<u64> = models.iter().map(|m| m.beam_count() as u64 + 1).collect();

    let codes = (0..grid.len())
        .into_par_iter()
        .with_min_len(1024)
        .map(|v| {
            if !grid.is_active(v) {
                return VoxelLabels::INACTIVE;
            }
            let center = grid.center(v);
            frames
                .iter()
                .zip(models)
                .zip(&radices)
                .fold(0u64, |acc, ((frame, model), &radix)| {
                    acc * radix + beam_digit(model, &frame.to_local(center)) as u64
                })
        })
        .collect();
    Ok(VoxelLabels { radices, codes })
}

/// A non-detectable subspace: a maximal face-connected set of active voxels
/// sharing one code.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceSet {
    pub component_id: usize,
    pub code: SubspaceCode,
    /// Voxel index triples in increasing lexicographic order.
    pub voxels: Vec<[usize; 3]>,
}

impl SubspaceSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Second-level segmentation result.
#[derive(Clone, Debug)]
pub struct Segmentation {
    pub labels: VoxelLabels,
    /// Component id per voxel, `None` for inactive voxels.
    pub component_of: Vec<Option<u32>>,
    pub subspaces: Vec<SubspaceSet>,
}

impl Segmentation {
    pub fn component_count(&self) -> usize {
        self.subspaces.len()
    }
}

/// Splits labelled voxels into face-connected components by breadth-first
/// search. Components are numbered in lexicographic order of their smallest
/// voxel index.
pub fn connected_components(labels: VoxelLabels, grid: &VoxelGrid) -> Segmentation {
    let n = grid.len();
    let mut component_of: Vec<Option<u32>> = vec![None; n];
    let mut subspaces = Vec::new();
    let mut queue = VecDeque::new();

    // Linear order is lexicographic (i, j, k), so each seed is the minimum
    // of its component and ids come out already sorted.
    for seed in 0..n {
        let Some(code) = labels.packed(seed) else { continue };
        if component_of[seed].is_some() {
            continue;
        }
        let id = subspaces.len() as u32;
        component_of[seed] = Some(id);
        queue.push_back(seed);
        let mut members = Vec::new();
        while let Some(v) = queue.pop_front() {
            let idx = grid.index(v);
            members.push(v);
            for nb in grid.face_neighbors(idx) {
                let w = grid.linear(nb);
                if component_of[w].is_none() && labels.packed(w) == Some(code) {
                    component_of[w] = Some(id);
                    queue.push_back(w);
                }
            }
        }
        members.sort_unstable();
        subspaces.push(SubspaceSet {
            component_id: id as usize,
            code: labels.unpack(code),
            voxels: members.into_iter().map(|v| grid.index(v)).collect(),
        });
    }

    Segmentation {
        labels,
        component_of,
        subspaces,
    }
}

/// Both segmentation levels in one call.
pub fn segment(
    configs: &[PoseConfig],
    models: &[LidarModel],
    grid: &VoxelGrid,
) -> Result<Segmentation> {
    let labels = first_level_labels(configs, models, grid)?;
    Ok(connected_components(labels, grid))
}
