//! Random coarse scenarios, in both oracle and library form.

use lidar_vsr::geometry::{Aabb, LidarModel, PoseConfig, RoiSpec, Vec3};
use rand::Rng;

use super::{Grid, Pose};

pub struct Case {
    pub grid: Grid,
    pub poses: Vec<Pose>,
    pub pitches: Vec<Vec<f64>>,
}

impl Case {
    pub fn roi(&self) -> RoiSpec {
        RoiSpec {
            extent: Vec3::from(self.grid.extent),
            excluded_boxes: self
                .grid
                .excluded
                .iter()
                .map(|(lo, hi)| Aabb::new(Vec3::from(*lo), Vec3::from(*hi)))
                .collect(),
            resolution: Vec3::from(self.grid.res),
        }
    }

    pub fn configs(&self) -> Vec<PoseConfig> {
        self.poses
            .iter()
            .map(|p| PoseConfig::new(Vec3::from(p.position), p.yaw, p.pitch, p.roll))
            .collect()
    }

    pub fn models(&self) -> Vec<LidarModel> {
        self.pitches
            .iter()
            .map(|b| LidarModel::new(b.clone()).unwrap())
            .collect()
    }
}

/// Strictly increasing pitches in (-0.5, 0.5) rad.
pub fn random_pitches<R: Rng>(rng: &mut R, count: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..count).map(|_| rng.random_range(-0.5..0.5)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            return v;
        }
    }
}

/// The 8 x 8 x 4 m grid with 1 m voxels and a vehicle-sized hole.
pub fn coarse_grid() -> Grid {
    Grid {
        extent: [8.0, 8.0, 4.0],
        res: [1.0, 1.0, 1.0],
        excluded: vec![([3.0, 3.0, 0.0], [5.0, 5.0, 2.0])],
    }
}

/// 1 or 2 lidars with 2 to 4 beams each, anywhere above the hole, with
/// arbitrary orientation.
pub fn random_coarse_case<R: Rng>(rng: &mut R) -> Case {
    let n = rng.random_range(1..=2);
    let pitches = (0..n)
        .map(|_| {
            let count = rng.random_range(2..=4);
            random_pitches(rng, count)
        })
        .collect();
    let poses = (0..n)
        .map(|_| Pose {
            position: [rng.random_range(2.5..5.5), rng.random_range(2.5..5.5), rng.random_range(2.0..3.5)],
            yaw: rng.random_range(-3.1..3.1),
            pitch: rng.random_range(-0.8..0.8),
            roll: rng.random_range(-0.8..0.8),
        })
        .collect();
    Case {
        grid: coarse_grid(),
        poses,
        pitches,
    }
}
