//! Volume, surface area and volume-to-surface ratio (VSR) of subspaces, and
//! the min-max objective built on them.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{build_voxel_grid, LidarModel, PoseConfig, RoiSpec, Vec3, VoxelGrid};
use crate::segmentation::{segment, Segmentation, SubspaceCode, SubspaceSet};

/// Face orientation whose area is being summed. `Xy` faces are normal to z
/// and are found by scanning along z, and so on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Xy,
    Xz,
    Yz,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Xy, Axis::Xz, Axis::Yz];

    /// Index of the scan axis (the face normal).
    pub fn normal(self) -> usize {
        match self {
            Axis::Xy => 2,
            Axis::Xz => 1,
            Axis::Yz => 0,
        }
    }

    pub fn face_area(self, e: &Vec3) -> f64 {
        match self {
            Axis::Xy => e.x * e.y,
            Axis::Xz => e.x * e.z,
            Axis::Yz => e.y * e.z,
        }
    }
}

pub fn voxel_volume(e: &Vec3) -> f64 {
    e.x * e.y * e.z
}

pub fn volume(voxel_count: usize, resolution: &Vec3) -> f64 {
    voxel_volume(resolution) * voxel_count as f64
}

/// Area of all faces normal to `axis.normal()`.
///
/// Sorts the voxels with the scan axis last, then counts consecutive pairs
/// in the same column whose scan coordinates differ by one. Each such pair
/// hides two faces; every other voxel contributes two exposed faces.
pub fn surface_area_axis(voxels: &[[usize; 3]], resolution: &Vec3, axis: Axis) -> f64 {
    if voxels.is_empty() {
        return 0.0;
    }
    let scan = axis.normal();
    let (a, b) = match scan {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut keyed: Vec<(usize, usize, usize)> = voxels.iter().map(|v| (v[a], v[b], v[scan])).collect();
    keyed.sort_unstable();
    let joined = keyed
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 && w[1].1 == w[0].1 && w[1].2 == w[0].2 + 1)
        .count();
    2.0 * (keyed.len() - joined) as f64 * axis.face_area(resolution)
}

pub fn surface_area(voxels: &[[usize; 3]], resolution: &Vec3) -> f64 {
    Axis::ALL
        .iter()
        .map(|&axis| surface_area_axis(voxels, resolution, axis))
        .sum()
}

pub fn vsr(voxels: &[[usize; 3]], resolution: &Vec3) -> f64 {
    volume(voxels.len(), resolution) / surface_area(voxels, resolution)
}

/// Per-subspace report row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubspaceMetrics {
    pub component_id: usize,
    pub code: SubspaceCode,
    pub voxel_count: usize,
    pub volume: f64,
    pub surface_area: f64,
    pub vsr: f64,
    /// `3 V / S`, the inscribed-sphere radius of a polyhedron with the same
    /// volume and area. Reported only; never used in the objective.
    pub inscribed_radius_estimate: f64,
}

impl SubspaceMetrics {
    pub fn of(set: &SubspaceSet, resolution: &Vec3) -> Self {
        let volume = volume(set.len(), resolution);
        let surface_area = surface_area(&set.voxels, resolution);
        let vsr = volume / surface_area;
        SubspaceMetrics {
            component_id: set.component_id,
            code: set.code.clone(),
            voxel_count: set.len(),
            volume,
            surface_area,
            vsr,
            inscribed_radius_estimate: 3.0 * vsr,
        }
    }
}

/// Full evaluation of one configuration set.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    pub metrics: Vec<SubspaceMetrics>,
    pub segmentation: Segmentation,
}

impl Evaluation {
    /// Index into `metrics` of the subspace attaining the objective (first
    /// one on ties).
    pub fn worst(&self) -> usize {
        let mut best = 0;
        for (i, m) in self.metrics.iter().enumerate() {
            if m.vsr > self.metrics[best].vsr {
                best = i;
            }
        }
        best
    }
}

/// Segments the grid for `configs` and scores every subspace.
pub fn evaluate(configs: &[PoseConfig], models: &[LidarModel], grid: &VoxelGrid) -> Result<Evaluation> {
    let segmentation = segment(configs, models, grid)?;
    let e = grid.resolution();
    let metrics: Vec<SubspaceMetrics> = segmentation
        .subspaces
        .iter()
        .map(|s| SubspaceMetrics::of(s, &e))
        .collect();
    let objective = metrics.iter().map(|m| m.vsr).fold(0.0, f64::max);
    Ok(Evaluation {
        objective,
        metrics,
        segmentation,
    })
}

/// Largest subspace VSR on a prebuilt grid.
pub fn max_vsr_on_grid(configs: &[PoseConfig], models: &[LidarModel], grid: &VoxelGrid) -> Result<f64> {
    let segmentation = segment(configs, models, grid)?;
    let e = grid.resolution();
    Ok(segmentation
        .subspaces
        .iter()
        .map(|s| vsr(&s.voxels, &e))
        .fold(0.0, f64::max))
}

/// Largest subspace VSR for `configs` over the voxelized `roi`.
pub fn max_vsr(configs: &[PoseConfig], models: &[LidarModel], roi: &RoiSpec) -> Result<f64> {
    max_vsr_on_grid(configs, models, &build_voxel_grid(roi)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    const RES: Vec3 = Vec3::new(1.0, 0.5, 0.2);

    /// Counts, per orientation, voxel faces whose face-neighbour is absent.
    fn exposed_face_oracle(voxels: &[[usize; 3]], e: &Vec3) -> f64 {
        let set: HashSet<[isize; 3]> = voxels.iter().map(|v| [v[0] as isize, v[1] as isize, v[2] as isize]).collect();
        let mut counts = [0usize; 3]; // faces normal to x, y, z
        for v in &set {
            for axis in 0..3 {
                for d in [-1, 1] {
                    let mut n = *v;
                    n[axis] += d;
                    if !set.contains(&n) {
                        counts[axis] += 1;
                    }
                }
            }
        }
        counts[2] as f64 * (e.x * e.y) + counts[1] as f64 * (e.x * e.z) + counts[0] as f64 * (e.y * e.z)
    }

    fn random_blob(rng: &mut ChaCha8Rng, size: usize) -> Vec<[usize; 3]> {
        let mut set = HashSet::new();
        let mut cur = [5usize, 5, 5];
        set.insert(cur);
        while set.len() < size {
            if rng.random_bool(0.2) {
                let all: Vec<_> = set.iter().copied().collect();
                cur = all[rng.random_range(0..all.len())];
            }
            let axis = rng.random_range(0..3);
            cur[axis] = if rng.random_bool(0.5) { cur[axis] + 1 } else { cur[axis].saturating_sub(1) };
            set.insert(cur);
        }
        set.into_iter().collect()
    }

    #[test]
    fn volume_examples() {
        assert_eq!(volume(1, &RES), 0.1);
        assert!((volume(48000, &RES) - 4800.0).abs() < 1e-9);
        assert_eq!(volume(27, &Vec3::new(1.0, 1.0, 1.0)), 27.0);
    }

    #[test]
    fn stacked_pair_by_hand() {
        let s = [[0, 0, 0], [0, 0, 1]];
        assert!((surface_area_axis(&s, &RES, Axis::Xy) - 1.0).abs() < 1e-12);
        assert!((surface_area_axis(&s, &RES, Axis::Xz) - 0.8).abs() < 1e-12);
        assert!((surface_area_axis(&s, &RES, Axis::Yz) - 0.4).abs() < 1e-12);
        let box_area = 2.0 * (1.0 * 0.5 + 1.0 * 0.4 + 0.5 * 0.4);
        assert!((surface_area(&s, &RES) - box_area).abs() < 1e-12);
    }

    #[test]
    fn single_voxel_and_full_block() {
        assert!((surface_area(&[[3, 1, 4]], &RES) - 1.6).abs() < 1e-12);
        assert!((vsr(&[[3, 1, 4]], &RES) - 0.0625).abs() < 1e-12);

        let mut block = Vec::with_capacity(48000);
        for i in 0..60 {
            for j in 0..40 {
                for k in 0..20 {
                    block.push([i, j, k]);
                }
            }
        }
        assert!((surface_area(&block, &RES) - 3040.0).abs() < 1e-9);
        let v = vsr(&block, &RES);
        assert!((v - 4800.0 / 3040.0).abs() < 1e-12);
        assert!((3.0 * v - 4.737).abs() < 1e-3);
    }

    #[test]
    fn matches_exposed_face_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let size = rng.random_range(1..200);
            let blob = random_blob(&mut rng, size);
            assert_eq!(surface_area(&blob, &RES), exposed_face_oracle(&blob, &RES));
        }
    }

    #[test]
    fn single_subspace_when_all_beams_miss() {
        // Steep beams from far below: every voxel lies above both cones and
        // the whole region is one subspace.
        let roi = RoiSpec {
            extent: Vec3::new(4.0, 4.0, 4.0),
            excluded_boxes: vec![],
            resolution: Vec3::new(1.0, 1.0, 1.0),
        };
        let grid = build_voxel_grid(&roi).unwrap();
        let model = LidarModel::new(vec![1.4, 1.5]).unwrap();
        let pose = PoseConfig::at(Vec3::new(2.0, 2.0, -100.0));
        let eval = evaluate(&[pose], &[model], &grid).unwrap();
        assert_eq!(eval.metrics.len(), 1);
        assert_eq!(eval.objective, 64.0 / 96.0);
    }

    #[test]
    fn duplicate_lidar_changes_nothing() {
        let roi = RoiSpec {
            extent: Vec3::new(8.0, 8.0, 4.0),
            excluded_boxes: vec![Aabb::new(Vec3::new(3.0, 3.0, 0.0), Vec3::new(5.0, 5.0, 4.0))],
            resolution: Vec3::new(1.0, 1.0, 1.0),
        };
        let model = LidarModel::evenly_spaced(4, -0.4, 0.4).unwrap();
        let pose = PoseConfig::new(Vec3::new(4.2, 3.9, 3.1), 0.0, 0.2, 0.05);
        let one = max_vsr(&[pose], &[model.clone()], &roi).unwrap();
        let two = max_vsr(&[pose, pose], &[model.clone(), model], &roi).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn evaluation_is_deterministic_and_consistent() {
        let roi = RoiSpec {
            extent: Vec3::new(8.0, 8.0, 4.0),
            excluded_boxes: vec![],
            resolution: Vec3::new(1.0, 1.0, 0.5),
        };
        let grid = build_voxel_grid(&roi).unwrap();
        let models = vec![LidarModel::evenly_spaced(3, -0.3, 0.3).unwrap(); 2];
        let poses = [
            PoseConfig::new(Vec3::new(4.0, 4.0, 3.0), 0.0, 0.4, 0.0),
            PoseConfig::new(Vec3::new(3.0, 5.0, 2.5), 0.0, 0.0, 0.7),
        ];
        let a = evaluate(&poses, &models, &grid).unwrap();
        let b = evaluate(&poses, &models, &grid).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.objective, max_vsr_on_grid(&poses, &models, &grid).unwrap());
        assert_eq!(a.metrics[a.worst()].vsr, a.objective);

        let total: f64 = a.metrics.iter().map(|m| m.volume).sum();
        let expected = grid.active_count() as f64 * voxel_volume(&grid.resolution());
        assert!((total - expected).abs() <= 1e-9 * expected);
        for m in &a.metrics {
            assert!(m.vsr > 0.0);
            assert!(m.surface_area >= surface_area(&[[0, 0, 0]], &grid.resolution()));
            assert_eq!(m.inscribed_radius_estimate, 3.0 * m.vsr);
        }
    }

    #[test]
    fn adding_a_lidar_refines_the_partition() {
        let roi = RoiSpec {
            extent: Vec3::new(8.0, 8.0, 4.0),
            excluded_boxes: vec![],
            resolution: Vec3::new(1.0, 1.0, 1.0),
        };
        let grid = build_voxel_grid(&roi).unwrap();
        let model = LidarModel::evenly_spaced(4, -0.4, 0.4).unwrap();
        let p1 = PoseConfig::new(Vec3::new(4.0, 4.0, 3.0), 0.0, 0.1, 0.0);
        let p2 = PoseConfig::new(Vec3::new(2.0, 6.0, 2.0), 0.0, 0.5, 0.3);
        let coarse = evaluate(&[p1], &[model.clone()], &grid).unwrap();
        let fine = evaluate(&[p1, p2], &[model.clone(), model], &grid).unwrap();
        for s in &fine.segmentation.subspaces {
            let parents: HashSet<_> = s
                .voxels
                .iter()
                .map(|&v| coarse.segmentation.component_of[grid.linear(v)])
                .collect();
            assert_eq!(parents.len(), 1);
        }
    }

    proptest! {
        #[test]
        fn area_ignores_input_order(seed in 0u64..1000, size in 1usize..120) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut blob = random_blob(&mut rng, size);
            let before = surface_area(&blob, &RES);
            use rand::seq::SliceRandom;
            blob.shuffle(&mut rng);
            prop_assert_eq!(before, surface_area(&blob, &RES));
        }
    }
}
