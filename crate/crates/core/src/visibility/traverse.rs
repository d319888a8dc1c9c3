//! Ray traversal through the occupancy lattice and cone direction sampling.

use rand::Rng;

use crate::geometry::{Pose, Vec3};
use crate::voxel_field::{Occupancy, VoxelGrid};

/// Front-to-back voxel walk (Amanatides–Woo). Calls `visit` once for every
/// voxel the ray enters, starting with the one containing `origin`, and
/// stops after the first occupied voxel, when the next crossing lies beyond
/// `t_limit`, or when the ray leaves the grid. `dir` must be unit length.
pub fn march(occupancy: &Occupancy, origin: &Vec3, dir: &Vec3, t_limit: f64, mut visit: impl FnMut(usize)) {
    let grid = occupancy.grid();
    let start = grid.cell_of(origin);
    if !grid.in_bounds(start) {
        return;
    }
    let mut cell = start;
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let d = dir[a];
        if d > 0.0 {
            step[a] = 1;
            let boundary = grid.origin[a] + (cell[a] + 1) as f64 * grid.voxel_size;
            t_max[a] = (boundary - origin[a]) / d;
            t_delta[a] = grid.voxel_size / d;
        } else if d < 0.0 {
            step[a] = -1;
            let boundary = grid.origin[a] + cell[a] as f64 * grid.voxel_size;
            t_max[a] = (boundary - origin[a]) / d;
            t_delta[a] = -grid.voxel_size / d;
        }
    }
    let [nx, ny, nz] = grid.dims.map(|d| d as i64);
    loop {
        let index = (cell[0] + nx * (cell[1] + ny * cell[2])) as usize;
        visit(index);
        if occupancy.is_occupied(index) {
            return;
        }
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > t_limit {
            return;
        }
        cell[axis] += step[axis];
        let limit = [nx, ny, nz][axis];
        if cell[axis] < 0 || cell[axis] >= limit {
            return;
        }
        t_max[axis] += t_delta[axis];
    }
}

/// First occupied voxel along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub voxel: usize,
    /// Ray parameter where the ray enters the voxel.
    pub t: f64,
    /// Unit normal of the entered face, pointing back toward the ray.
    pub normal: Vec3,
}

/// Ray parameter and face of the first occupied voxel within `t_limit`,
/// using the same stepping as [`march`]. `None` if the origin voxel is
/// occupied or outside the grid, or nothing is hit.
pub fn first_hit(occupancy: &Occupancy, origin: &Vec3, dir: &Vec3, t_limit: f64) -> Option<RayHit> {
    let grid = occupancy.grid();
    let mut cell = grid.cell_of(origin);
    if !grid.in_bounds(cell) {
        return None;
    }
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let d = dir[a];
        if d != 0.0 {
            step[a] = if d > 0.0 { 1 } else { -1 };
            let k = if d > 0.0 { cell[a] + 1 } else { cell[a] };
            t_max[a] = (grid.origin[a] + k as f64 * grid.voxel_size - origin[a]) / d;
            t_delta[a] = grid.voxel_size / d.abs();
        }
    }
    let [nx, ny, nz] = grid.dims.map(|d| d as i64);
    let index = |c: [i64; 3]| (c[0] + nx * (c[1] + ny * c[2])) as usize;
    if occupancy.is_occupied(index(cell)) {
        return None;
    }
    loop {
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        let t = t_max[axis];
        if t > t_limit {
            return None;
        }
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= [nx, ny, nz][axis] {
            return None;
        }
        t_max[axis] += t_delta[axis];
        let v = index(cell);
        if occupancy.is_occupied(v) {
            let mut normal = Vec3::zeros();
            normal[axis] = -(step[axis] as f64);
            return Some(RayHit { voxel: v, t, normal });
        }
    }
}

/// Independent reference walk: enumerates every lattice-plane crossing in
/// `(0, t_limit]`, sorts them, and classifies each non-degenerate segment by
/// its midpoint. Slow; used to certify `march`.
pub fn exact_ray_cells(occupancy: &Occupancy, origin: &Vec3, dir: &Vec3, t_limit: f64) -> Vec<usize> {
    let grid = occupancy.grid();
    let mut ts = vec![0.0, t_limit];
    for a in 0..3 {
        let d = dir[a];
        if d == 0.0 {
            continue;
        }
        let lo = grid.origin[a];
        for k in 0..=grid.dims[a] {
            let plane = lo + k as f64 * grid.voxel_size;
            let t = (plane - origin[a]) / d;
            if t > 0.0 && t < t_limit {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    let mut out: Vec<usize> = Vec::new();
    for w in ts.windows(2) {
        if w[1] - w[0] <= 1e-12 {
            continue;
        }
        let mid = origin + dir * ((w[0] + w[1]) / 2.0);
        let Some(index) = grid.voxel_of(&mid) else {
            break;
        };
        if out.last() != Some(&index) {
            out.push(index);
            if occupancy.is_occupied(index) {
                break;
            }
        }
    }
    out
}

/// Unit direction drawn uniformly over the solid angle of the cone with
/// the given half-angle cosine around the pose's optical axis.
pub fn sample_cone<R: Rng + ?Sized>(rng: &mut R, pose: &Pose, cos_half: f64) -> Vec3 {
    let cos_t = 1.0 - rng.gen::<f64>() * (1.0 - cos_half);
    let phi = std::f64::consts::TAU * rng.gen::<f64>();
    cone_direction(pose, cos_t, phi)
}

/// Direction at polar cosine `cos_t` and azimuth `phi` about the optical axis.
pub fn cone_direction(pose: &Pose, cos_t: f64, phi: f64) -> Vec3 {
    let m = pose.rotation().matrix();
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let d = m.column(0) * (sin_t * phi.cos()) + m.column(1) * (sin_t * phi.sin()) + m.column(2) * cos_t;
    d.normalize()
}

/// Longest ray length that can still reach a voxel whose center lies in
/// the frustum.
pub fn ray_length_limit(grid: &VoxelGrid, max_depth: f64, cos_half: f64) -> f64 {
    max_depth / cos_half + grid.voxel_size * 3f64.sqrt()
}
