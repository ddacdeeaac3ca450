//! Pose math, the rotating-beam cone model and voxelization of the region
//! of interest.

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// A point or direction in meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Six-DoF pose of one LiDAR in the world frame.
///
/// Angles are radians and are kept as given (never wrapped).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseConfig {
    pub position: Vec3,
    #[serde(deserialize_with = "units::angle")]
    pub yaw: f64,
    #[serde(deserialize_with = "units::angle")]
    pub pitch: f64,
    #[serde(deserialize_with = "units::angle")]
    pub roll: f64,
}

impl PoseConfig {
    pub fn new(position: Vec3, yaw: f64, pitch: f64, roll: f64) -> Self {
        PoseConfig {
            position,
            yaw,
            pitch,
            roll,
        }
    }

    /// Pose with zero rotation at `position`.
    pub fn at(position: Vec3) -> Self {
        Self::new(position, 0.0, 0.0, 0.0)
    }

    /// `[x, y, z, yaw, pitch, roll]`.
    pub fn to_array(&self) -> [f64; 6] {
        let p = self.position;
        [p.x, p.y, p.z, self.yaw, self.pitch, self.roll]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(Vec3::new(a[0], a[1], a[2]), a[3], a[4], a[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Box constraint on a single LiDAR pose, shared by every LiDAR.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseBounds {
    pub lower: PoseConfig,
    pub upper: PoseConfig,
}

impl PoseBounds {
    pub fn new(lower: PoseConfig, upper: PoseConfig) -> Result<Self> {
        let bounds = PoseBounds { lower, upper };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        const NAMES: [&str; 6] = ["x", "y", "z", "yaw", "pitch", "roll"];
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        for (i, name) in NAMES.iter().enumerate() {
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::InvalidBounds(format!("{name} bound is not finite")));
            }
            if lo[i] > hi[i] {
                return Err(Error::InvalidBounds(format!(
                    "{name}: lower {} exceeds upper {}",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, pose: &PoseConfig) -> bool {
        let (lo, hi, p) = (self.lower.to_array(), self.upper.to_array(), pose.to_array());
        (0..6).all(|i| lo[i] <= p[i] && p[i] <= hi[i])
    }
}

/// Rotation from the LiDAR frame to the world frame, composed as
/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
///
/// Note: the widely circulated closed form of this matrix sometimes appears
/// with flipped signs in the (0,2) and (1,1) entries; that variant is not
/// orthonormal (it gives `diag(1, -1, 1)` at zero angles), so the proper
/// rotation is used here. `det(R) = +1` is pinned by a regression test.
pub fn rotation_matrix(pose: &PoseConfig) -> Matrix3<f64> {
    let (sa, ca) = pose.yaw.sin_cos();
    let (sb, cb) = pose.pitch.sin_cos();
    let (sg, cg) = pose.roll.sin_cos();
    Matrix3::new(
        ca * cb,
        ca * sb * sg - sa * cg,
        ca * sb * cg + sa * sg,
        sa * cb,
        sa * sb * sg + ca * cg,
        sa * sb * cg - ca * sg,
        -sb,
        cb * sg,
        cb * cg,
    )
}

/// Homogeneous LiDAR-to-world transform `[R t; 0 1]`.
pub fn pose_matrix(pose: &PoseConfig) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&rotation_matrix(pose));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&pose.position);
    m
}

/// Closed-form inverse of [`pose_matrix`]: `[Rᵀ  -Rᵀt; 0 1]`.
pub fn inverse_pose_matrix(pose: &PoseConfig) -> Matrix4<f64> {
    let rt = rotation_matrix(pose).transpose();
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    m.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(-(rt * pose.position)));
    m
}

/// Maps a world point into the LiDAR's local frame.
pub fn world_to_lidar(pose: &PoseConfig, point_world: &Vec3) -> Vec3 {
    let h = inverse_pose_matrix(pose) * Vector4::new(point_world.x, point_world.y, point_world.z, 1.0);
    Vec3::new(h.x, h.y, h.z)
}

/// Maps a LiDAR-local point into the world frame.
pub fn lidar_to_world(pose: &PoseConfig, point_lidar: &Vec3) -> Vec3 {
    let h = pose_matrix(pose) * Vector4::new(point_lidar.x, point_lidar.y, point_lidar.z, 1.0);
    Vec3::new(h.x, h.y, h.z)
}

/// Precomputed world-to-LiDAR transform for transforming many points.
#[derive(Clone, Debug)]
pub struct LidarFrame {
    inverse: Matrix4<f64>,
}

impl LidarFrame {
    pub fn new(pose: &PoseConfig) -> Self {
        LidarFrame {
            inverse: inverse_pose_matrix(pose),
        }
    }

    #[inline]
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let h = self.inverse * Vector4::new(p.x, p.y, p.z, 1.0);
        Vec3::new(h.x, h.y, h.z)
    }
}

/// Height of the cone swept by a beam at `pitch`, at horizontal offset `(x, y)`.
pub fn beam_surface_z(pitch: f64, x: f64, y: f64) -> f64 {
    pitch.tan() * (x * x + y * y).sqrt()
}

/// A LiDAR type, described by the pitch of each of its beams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLidarModel", into = "RawLidarModel")]
pub struct LidarModel {
    beam_pitches: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawLidarModel {
    #[serde(deserialize_with = "units::angle_list")]
    beam_pitches: Vec<f64>,
}

impl TryFrom<RawLidarModel> for LidarModel {
    type Error = Error;

    fn try_from(raw: RawLidarModel) -> Result<Self> {
        LidarModel::new(raw.beam_pitches)
    }
}

impl From<LidarModel> for RawLidarModel {
    fn from(m: LidarModel) -> Self {
        RawLidarModel {
            beam_pitches: m.beam_pitches,
        }
    }
}

impl LidarModel {
    /// Pitches must be strictly increasing and inside (-π/2, π/2).
    pub fn new(beam_pitches: Vec<f64>) -> Result<Self> {
        if beam_pitches.is_empty() {
            return Err(Error::InvalidModel("a lidar needs at least one beam".into()));
        }
        for &p in &beam_pitches {
            if !p.is_finite() || p.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(Error::InvalidModel(format!(
                    "beam pitch {p} must lie strictly between -pi/2 and pi/2"
                )));
            }
        }
        if beam_pitches.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "beam pitches must be strictly increasing".into(),
            ));
        }
        let slopes = beam_pitches.iter().map(|p| p.tan()).collect();
        Ok(LidarModel {
            beam_pitches,
            slopes,
        })
    }

    /// `count` beams evenly spread from `lowest` to `highest` (inclusive).
    pub fn evenly_spaced(count: usize, lowest: f64, highest: f64) -> Result<Self> {
        match count {
            0 => Err(Error::InvalidModel("a lidar needs at least one beam".into())),
            1 => Self::new(vec![0.5 * (lowest + highest)]),
            n => {
                let step = (highest - lowest) / (n - 1) as f64;
                Self::new((0..n).map(|k| lowest + step * k as f64).collect())
            }
        }
    }

    pub fn beam_pitches(&self) -> &[f64] {
        &self.beam_pitches
    }

    /// `tan(pitch)` for every beam, increasing.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn beam_count(&self) -> usize {
        self.beam_pitches.len()
    }
}

/// Closed axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }
}

/// The region of interest: a box anchored at the world origin, minus
/// excluded boxes, cut into cuboids of size `resolution`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    pub extent: Vec3,
    #[serde(default)]
    pub excluded_boxes: Vec<Aabb>,
    pub resolution: Vec3,
}

impl RoiSpec {
    /// Number of cells along each axis. Fails unless every extent is an
    /// integer multiple of the matching resolution.
    pub fn dims(&self) -> Result<[usize; 3]> {
        let mut dims = [0usize; 3];
        for axis in 0..3 {
            let (len, step) = (self.extent[axis], self.resolution[axis]);
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidRoi(format!("extent[{axis}] = {len} must be > 0")));
            }
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::InvalidRoi(format!(
                    "resolution[{axis}] = {step} must be > 0"
                )));
            }
            let ratio = len / step;
            let n = ratio.round();
            if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::InvalidRoi(format!(
                    "extent[{axis}] = {len} is not a multiple of resolution {step}"
                )));
            }
            dims[axis] = n as usize;
        }
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims()?;
        let whole = Aabb::new(Vec3::zeros(), self.extent);
        for (i, b) in self.excluded_boxes.iter().enumerate() {
            if (0..3).any(|a| !(b.min[a] <= b.max[a])) {
                return Err(Error::InvalidRoi(format!("excluded box {i} has min > max")));
            }
            if !whole.contains(&b.min) || !whole.contains(&b.max) {
                return Err(Error::InvalidRoi(format!(
                    "excluded box {i} extends outside the region"
                )));
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::new(Vec3::zeros(), self.extent)
    }
}

/// Voxelized region of interest.
///
/// Voxels are stored with `k` (z) varying fastest, so linear order equals
/// lexicographic order of `(i, j, k)`.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    dims: [usize; 3],
    resolution: Vec3,
    centers: Vec<Vec3>,
    active: Vec<bool>,
    active_count: usize,
}

impl VoxelGrid {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> Vec3 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    #[inline]
    pub fn index(&self, linear: usize) -> [usize; 3] {
        let k = linear % self.dims[2];
        let rest = linear / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    #[inline]
    pub fn center(&self, linear: usize) -> &Vec3 {
        &self.centers[linear]
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    #[inline]
    pub fn is_active(&self, linear: usize) -> bool {
        self.active[linear]
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    /// Voxel containing `p`, or `None` outside the extent. Points on an
    /// interior cell boundary go to the upper cell; the far faces of the
    /// extent belong to the last cell.
    pub fn locate(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for axis in 0..3 {
            let extent = self.resolution[axis] * self.dims[axis] as f64;
            if !(p[axis] >= 0.0 && p[axis] <= extent) {
                return None;
            }
            let cell = (p[axis] / self.resolution[axis]).floor() as usize;
            idx[axis] = cell.min(self.dims[axis] - 1);
        }
        Some(idx)
    }

    /// Face neighbours of a voxel that lie inside the grid.
    pub fn face_neighbors(&self, idx: [usize; 3]) -> impl Iterator<Item = [usize; 3]> + '_ {
        const STEPS: [(usize, isize); 6] = [(0, -1), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)];
        STEPS.iter().filter_map(move |&(axis, delta)| {
            let v = idx[axis] as isize + delta;
            if v < 0 || v >= self.dims[axis] as isize {
                return None;
            }
            let mut n = idx;
            n[axis] = v as usize;
            Some(n)
        })
    }
}

/// Cuts the region into voxels and masks out those whose centre lies in an
/// excluded box.
pub fn build_voxel_grid(roi: &RoiSpec) -> Result<VoxelGrid> {
    roi.validate()?;
    let dims = roi.dims()?;
    let e = roi.resolution;
    let total = dims[0] * dims[1] * dims[2];
    let mut centers = Vec::with_capacity(total);
    let mut active = Vec::with_capacity(total);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let c = Vec3::new(
                    (i as f64 + 0.5) * e.x,
                    (j as f64 + 0.5) * e.y,
                    (k as f64 + 0.5) * e.z,
                );
                active.push(!roi.excluded_boxes.iter().any(|b| b.contains(&c)));
                centers.push(c);
            }
        }
    }
    let active_count = active.iter().filter(|&&a| a).count();
    if active_count == 0 {
        return Err(Error::InvalidRoi("every voxel is excluded".into()));
    }
    Ok(VoxelGrid {
        dims,
        resolution: e,
        centers,
        active,
        active_count,
    })
}
