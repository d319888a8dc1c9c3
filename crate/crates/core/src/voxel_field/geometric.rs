use crate::error::{Error, Result};
use crate::geometry::{back_project, CameraIntrinsics, Pose};
use crate::image::{min_max_normalize, Image};

use super::grid::VoxelGrid;

/// Distance (in voxel sizes) a back-projected point is pushed along its
/// viewing ray before voxel lookup, so that points lying exactly on a voxel
/// face land in the voxel behind the face.
pub const SPLAT_NUDGE: f64 = 1e-3;

/// Per-voxel geometric uncertainty in `[0, 1]`.
///
/// Voxels never hit by a splatted pixel hold the sentinel uncertainty 1.0
/// with an observation count of zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricField {
    grid: VoxelGrid,
    uncertainty: Vec<f64>,
    observation_count: Vec<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SplatStats {
    pub splatted: usize,
    pub dropped: usize,
}

/// Min–max normalization of raw confidences over a frame's valid pixels.
/// A constant frame maps to 1.0 everywhere.
pub fn normalize_confidence(raw: &[f64]) -> Vec<f64> {
    min_max_normalize(raw, Some(1.0))
}

#[inline]
pub(crate) fn valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

impl GeometricField {
    pub fn new(grid: VoxelGrid) -> Self {
        Self {
            grid,
            uncertainty: vec![1.0; grid.len()],
            observation_count: vec![0; grid.len()],
        }
    }

    /// Rebuilds a field from stored values (snapshots, synthetic fixtures).
    pub fn from_parts(grid: VoxelGrid, uncertainty: Vec<f64>, observation_count: Vec<u32>) -> Result<Self> {
        if uncertainty.len() != grid.len() || observation_count.len() != grid.len() {
            return Err(Error::InvalidInput("field length does not match grid".into()));
        }
        if uncertainty.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::InvalidInput("uncertainty must lie in [0, 1]".into()));
        }
        Ok(Self {
            grid,
            uncertainty,
            observation_count,
        })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn uncertainty(&self) -> &[f64] {
        &self.uncertainty
    }

    pub fn observation_count(&self) -> &[u32] {
        &self.observation_count
    }

    pub fn is_observed(&self, index: usize) -> bool {
        self.observation_count[index] > 0
    }

    /// Records free-space evidence: every voxel in `free` that no depth
    /// sample has landed in becomes an observation of empty space with
    /// uncertainty 0, so only voxels no ray has reached keep the sentinel.
    pub fn mark_free(&mut self, free: &[bool]) -> Result<usize> {
        if free.len() != self.grid.len() {
            return Err(Error::InvalidInput("mask length does not match grid".into()));
        }
        let mut marked = 0;
        for (v, &f) in free.iter().enumerate() {
            if f && self.observation_count[v] == 0 {
                self.uncertainty[v] = 0.0;
                self.observation_count[v] = 1;
                marked += 1;
            }
        }
        Ok(marked)
    }

    /// Splats one frame: every valid pixel is back-projected to a single
    /// voxel whose uncertainty becomes `min(previous, 1 - normalized
    /// confidence)`. Points outside the grid are dropped.
    pub fn splat_confidence(
        &mut self,
        depth: &Image<f64>,
        confidence: &Image<f64>,
        pose: &Pose,
        intrinsics: &CameraIntrinsics,
    ) -> Result<SplatStats> {
        depth.ensure_same_dims(confidence)?;
        if depth.dims() != (intrinsics.width, intrinsics.height) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", intrinsics.width, intrinsics.height),
                actual: format!("{}x{}", depth.width(), depth.height()),
            });
        }
        let mut valid = Vec::new();
        let mut raw = Vec::new();
        for (i, (&d, &c)) in depth.as_slice().iter().zip(confidence.as_slice()).enumerate() {
            if valid_depth(d) {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "confidence must be finite and non-negative, got {c}"
                    )));
                }
                valid.push(i);
                raw.push(c);
            }
        }
        let normalized = normalize_confidence(&raw);
        let mut stats = SplatStats::default();
        for (&i, &c) in valid.iter().zip(&normalized) {
            let (u, v) = (i % depth.width(), i / depth.width());
            match splat_target(&self.grid, u, v, depth.as_slice()[i], pose, intrinsics) {
                Some(voxel) => {
                    let slot = &mut self.uncertainty[voxel];
                    *slot = slot.min(1.0 - c);
                    self.observation_count[voxel] = self.observation_count[voxel].saturating_add(1);
                    stats.splatted += 1;
                }
                None => stats.dropped += 1,
            }
        }
        Ok(stats)
    }
}

/// Voxel a pixel's back-projected depth sample lands in.
pub(crate) fn splat_target(
    grid: &VoxelGrid,
    u: usize,
    v: usize,
    depth: f64,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
) -> Option<usize> {
    let pixel = CameraIntrinsics::pixel_center(u, v);
    let p = back_project(pixel, depth, intrinsics, pose).ok()?;
    let ray = (p - pose.translation()).normalize();
    grid.voxel_of(&(p + ray * (SPLAT_NUDGE * grid.voxel_size)))
}
