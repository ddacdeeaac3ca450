//! Brute-force reference implementations shared by the integration tests.
//!
//! The oracle functions never call into the library; `cases` only builds
//! library inputs. Rotations are built from elementary matrices, labels
//! come from direct comparisons against each cone, components from a
//! recursive flood fill and areas from counting exposed faces one voxel at
//! a time.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

pub type M3 = [[f64; 3]; 3];

fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rotation(yaw: f64, pitch: f64, roll: f64) -> M3 {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let rz = [[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]];
    mat_mul(&mat_mul(&rz, &ry), &rx)
}

#[derive(Clone, Copy, Debug)]
pub struct Pose {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// World point expressed in the sensor frame: `R^T (p - t)`.
pub fn to_sensor(pose: &Pose, p: [f64; 3]) -> [f64; 3] {
    let r = rotation(pose.yaw, pose.pitch, pose.roll);
    let d = [p[0] - pose.position[0], p[1] - pose.position[1], p[2] - pose.position[2]];
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|k| r[k][i] * d[k]).sum();
    }
    out
}

/// Band of a sensor-frame point given the beam pitches in ascending order,
/// by the three explicit cases: below the lowest cone, between two
/// neighbouring cones, on or above the highest cone.
pub fn band(pitches: &[f64], local: [f64; 3]) -> usize {
    let r = (local[0] * local[0] + local[1] * local[1]).sqrt();
    let z = local[2];
    let surface = |b: usize| pitches[b].tan() * r;
    let n = pitches.len();
    if z < surface(0) {
        return 0;
    }
    if z >= surface(n - 1) {
        return n;
    }
    for i in 1..n {
        if surface(i - 1) <= z && z < surface(i) {
            return i;
        }
    }
    unreachable!("cones are sorted, one case always applies")
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub extent: [f64; 3],
    pub res: [f64; 3],
    pub excluded: Vec<([f64; 3], [f64; 3])>,
}

impl Grid {
    pub fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| (self.extent[a] / self.res[a]).round() as usize)
    }

    pub fn center(&self, v: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| (v[a] as f64 + 0.5) * self.res[a])
    }

    pub fn active(&self, v: [usize; 3]) -> bool {
        let c = self.center(v);
        !self
            .excluded
            .iter()
            .any(|(lo, hi)| (0..3).all(|a| lo[a] <= c[a] && c[a] <= hi[a]))
    }

    pub fn all_voxels(&self) -> Vec<[usize; 3]> {
        let [nx, ny, nz] = self.dims();
        let mut out = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    out.push([i, j, k]);
                }
            }
        }
        out
    }
}

/// Code of every active voxel.
pub fn label(grid: &Grid, poses: &[Pose], pitches: &[Vec<f64>]) -> HashMap<[usize; 3], Vec<usize>> {
    grid.all_voxels()
        .into_iter()
        .filter(|&v| grid.active(v))
        .map(|v| {
            let c = grid.center(v);
            let code = poses
                .iter()
                .zip(pitches)
                .map(|(p, b)| band(b, to_sensor(p, c)))
                .collect();
            (v, code)
        })
        .collect()
}

fn fill(
    v: [usize; 3],
    code: &[usize],
    labels: &HashMap<[usize; 3], Vec<usize>>,
    seen: &mut HashSet<[usize; 3]>,
    out: &mut Vec<[usize; 3]>,
) {
    if seen.contains(&v) || labels.get(&v).map(|c| c.as_slice()) != Some(code) {
        return;
    }
    seen.insert(v);
    out.push(v);
    for a in 0..3 {
        let mut up = v;
        up[a] += 1;
        fill(up, code, labels, seen, out);
        if v[a] > 0 {
            let mut down = v;
            down[a] -= 1;
            fill(down, code, labels, seen, out);
        }
    }
}

/// Face-connected same-code components, by recursive flood fill.
pub fn components(labels: &HashMap<[usize; 3], Vec<usize>>) -> Vec<Vec<[usize; 3]>> {
    let mut keys: Vec<_> = labels.keys().copied().collect();
    keys.sort();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for v in keys {
        if seen.contains(&v) {
            continue;
        }
        let mut comp = Vec::new();
        fill(v, &labels[&v], labels, &mut seen, &mut comp);
        out.push(comp);
    }
    out
}

/// Exposed faces per normal axis (x, y, z).
pub fn exposed_faces(voxels: &[[usize; 3]]) -> [usize; 3] {
    let set: HashSet<[usize; 3]> = voxels.iter().copied().collect();
    let mut faces = [0usize; 3];
    for v in voxels {
        for (a, f) in faces.iter_mut().enumerate() {
            let mut up = *v;
            up[a] += 1;
            if !set.contains(&up) {
                *f += 1;
            }
            if v[a] == 0 || !set.contains(&{
                let mut down = *v;
                down[a] -= 1;
                down
            }) {
                *f += 1;
            }
        }
    }
    faces
}

/// Surface area by face counting, summed z-normal, y-normal, x-normal.
pub fn area(voxels: &[[usize; 3]], e: [f64; 3]) -> f64 {
    let [fx, fy, fz] = exposed_faces(voxels);
    fz as f64 * (e[0] * e[1]) + fy as f64 * (e[0] * e[2]) + fx as f64 * (e[1] * e[2])
}

pub fn vsr(voxels: &[[usize; 3]], e: [f64; 3]) -> f64 {
    (e[0] * e[1] * e[2]) * voxels.len() as f64 / area(voxels, e)
}

pub fn max_vsr(grid: &Grid, poses: &[Pose], pitches: &[Vec<f64>]) -> f64 {
    components(&label(grid, poses, pitches))
        .iter()
        .map(|c| vsr(c, grid.res))
        .fold(0.0, f64::max)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub mod cases;
