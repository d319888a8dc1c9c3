//! The agent's own occupancy estimate, built from splatted depth.

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, FrustumSpec, Pose};
use crate::visibility::march;
use crate::voxel_field::{splat_target, Occupancy, VoxelGrid};

use super::render::DepthRender;

/// How never-observed voxels are treated when the reconstruction is used
/// as the visibility source.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownSpace {
    #[default]
    Free,
    Opaque,
}

/// Voxels hit by some depth sample, and voxels a viewing ray passed
/// through before its hit (or through its whole range on a miss).
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    grid: VoxelGrid,
    hit: Vec<bool>,
    seen_free: Vec<bool>,
}

impl Reconstruction {
    pub fn new(grid: VoxelGrid) -> Self {
        Self {
            grid,
            hit: vec![false; grid.len()],
            seen_free: vec![false; grid.len()],
        }
    }

    pub fn hits(&self) -> &[bool] {
        &self.hit
    }

    pub fn seen_free(&self) -> &[bool] {
        &self.seen_free
    }

    pub fn integrate(&mut self, render: &DepthRender, pose: &Pose, intrinsics: &CameraIntrinsics, frustum: &FrustumSpec) {
        let empty = Occupancy::empty(self.grid);
        let origin = pose.translation();
        let forward = pose.forward();
        let (w, h) = render.depth.dims();
        for v in 0..h {
            for u in 0..w {
                let d = *render.depth.get(u, v);
                let dir = (pose.rotation() * intrinsics.unproject_ray(CameraIntrinsics::pixel_center(u, v))).normalize();
                let cos_axis = dir.dot(&forward);
                let target = if d.is_finite() {
                    splat_target(&self.grid, u, v, d, pose, intrinsics)
                } else {
                    None
                };
                let t_end = if d.is_finite() { d / cos_axis } else { frustum.max_depth / cos_axis };
                let seen_free = &mut self.seen_free;
                march(&empty, &origin, &dir, t_end, |voxel| {
                    if Some(voxel) != target {
                        seen_free[voxel] = true;
                    }
                });
                if let Some(t) = target {
                    self.hit[t] = true;
                }
            }
        }
    }

    /// Occupancy used for agent-side visibility. Hit voxels are always
    /// occupied; never-observed voxels follow `unknown`.
    pub fn occupancy(&self, unknown: UnknownSpace) -> Occupancy {
        let occupied = (0..self.grid.len())
            .map(|v| self.hit[v] || (unknown == UnknownSpace::Opaque && !self.seen_free[v]))
            .collect();
        Occupancy::from_vec(self.grid, occupied).expect("length matches grid")
    }
}
