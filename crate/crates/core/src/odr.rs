//! Monte Carlo object detection rate.
//!
//! An axis-aligned object is dropped uniformly at random inside a placement
//! region. It counts as detected when the voxels whose centres it covers
//! belong to more than `threshold` distinct subspaces, i.e. at least one
//! beam surface passes through it.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abc::substream;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3, VoxelGrid};
use crate::segmentation::Segmentation;

const ODR_STREAM: u64 = 0x0d12;

/// Object size and where it may appear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub dims: Vec3,
    /// Region the whole object must stay inside; `None` means the full ROI.
    #[serde(default)]
    pub placement: Option<Aabb>,
}

impl Default for ObjectSpec {
    /// Roughly a standing pedestrian.
    fn default() -> Self {
        ObjectSpec {
            dims: Vec3::new(0.5, 0.5, 1.7),
            placement: None,
        }
    }
}

impl ObjectSpec {
    /// Region for the object's minimum corner.
    fn corner_region(&self, roi_box: &Aabb) -> Result<Aabb> {
        if (0..3).any(|a| !(self.dims[a].is_finite() && self.dims[a] > 0.0)) {
            return Err(Error::InvalidObject("object dimensions must be > 0".into()));
        }
        let region = self.placement.unwrap_or(*roi_box);
        if !roi_box.contains(&region.min) || !roi_box.contains(&region.max) {
            return Err(Error::InvalidObject("placement region leaves the ROI".into()));
        }
        let max = region.max - self.dims;
        if (0..3).any(|a| max[a] < region.min[a]) {
            return Err(Error::InvalidObject(
                "object does not fit inside its placement region".into(),
            ));
        }
        Ok(Aabb::new(region.min, max))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdrReport {
    pub trials: usize,
    pub detections: usize,
    pub odr: f64,
    pub threshold: usize,
}

/// Number of distinct subspaces among active voxels whose centres lie in
/// `object` (closed box).
pub fn count_occupied_subspaces(object: &Aabb, segmentation: &Segmentation, grid: &VoxelGrid) -> usize {
    let dims = grid.dims();
    let e = grid.resolution();
    // Voxel i has centre (i + 0.5) e. The index window is padded by one
    // cell; the explicit containment test below decides membership.
    let mut range = [(0usize, 0usize); 3];
    for a in 0..3 {
        let lo = ((object.min[a] / e[a] - 0.5).ceil() - 1.0).max(0.0);
        let hi = ((object.max[a] / e[a] - 0.5).floor() + 1.0).min(dims[a] as f64 - 1.0);
        if hi < lo {
            return 0;
        }
        range[a] = (lo as usize, hi as usize);
    }
    let mut seen = BTreeSet::new();
    for i in range[0].0..=range[0].1 {
        for j in range[1].0..=range[1].1 {
            for k in range[2].0..=range[2].1 {
                let v = grid.linear([i, j, k]);
                if !object.contains(grid.center(v)) {
                    continue;
                }
                if let Some(c) = segmentation.component_of[v] {
                    seen.insert(c);
                }
            }
        }
    }
    seen.len()
}

/// Places the object `trials` times and reports the detected fraction.
pub fn estimate_odr(
    segmentation: &Segmentation,
    grid: &VoxelGrid,
    object: &ObjectSpec,
    trials: usize,
    threshold: usize,
    seed: u64,
) -> Result<OdrReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("at least one trial is required".into()));
    }
    let roi_box = Aabb::new(Vec3::zeros(), grid.resolution().component_mul(&Vec3::new(
        grid.dims()[0] as f64,
        grid.dims()[1] as f64,
        grid.dims()[2] as f64,
    )));
    let corners = object.corner_region(&roi_box)?;
    let detections = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = substream(seed, ODR_STREAM, t as u64, 0);
            let min = Vec3::from_fn(|a, _| {
                if corners.min[a] < corners.max[a] {
                    rng.random_range(corners.min[a]..=corners.max[a])
                } else {
                    corners.min[a]
                }
            });
            let placed = Aabb::new(min, min + object.dims);
            count_occupied_subspaces(&placed, segmentation, grid) > threshold
        })
        .count();
    Ok(OdrReport {
        trials,
        detections,
        odr: detections as f64 / trials as f64,
        threshold,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut start = 0;
        while start < order.len() {
            let mut end = start;
            while end + 1 < order.len() && v[order[end + 1]] == v[order[start]] {
                end += 1;
            }
            let avg = (start + end) as f64 / 2.0 + 1.0;
            for &i in &order[start..=end] {
                r[i] = avg;
            }
            start = end + 1;
        }
        r
    }
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}
