//! Voxel-space semantic field built by lifting per-pixel values.

use crate::error::{invalid, Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::image::Image;
use crate::voxel_field::{splat_target, valid_depth, VoxelGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticField {
    grid: VoxelGrid,
    values: Vec<f64>,
}

impl SemanticField {
    pub fn zeros(grid: VoxelGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: VoxelGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("semantic values do not match grid"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("semantic values must be finite and non-negative"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-voxel maximum with another field on the same grid.
    pub fn merge_max(&mut self, other: &SemanticField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = a.max(*b);
        }
        Ok(())
    }

    /// Lifts one frame into this field (per-voxel maximum). Returns the
    /// number of deposits.
    pub fn deposit(
        &mut self,
        u_sem: &Image<f64>,
        depth: &Image<f64>,
        pose: &Pose,
        intrinsics: &CameraIntrinsics,
    ) -> Result<usize> {
        let lifted = lift_to_3d(u_sem, depth, pose, intrinsics, &self.grid)?;
        self.merge_max(&lifted)?;
        Ok(lifted.values.iter().filter(|&&v| v > 0.0).count())
    }
}

/// Deposits every pixel's value at its back-projected voxel, keeping the
/// maximum where several pixels land in the same voxel.
pub fn lift_to_3d(
    u_sem: &Image<f64>,
    depth: &Image<f64>,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    grid: &VoxelGrid,
) -> Result<SemanticField> {
    u_sem.ensure_same_dims(depth)?;
    if depth.dims() != (intrinsics.width, intrinsics.height) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", intrinsics.width, intrinsics.height),
            actual: format!("{}x{}", depth.width(), depth.height()),
        });
    }
    let mut out = SemanticField::zeros(*grid);
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let value = *u_sem.get(u, v);
            let d = *depth.get(u, v);
            if !(value.is_finite() && value > 0.0) || !valid_depth(d) {
                continue;
            }
            if let Some(voxel) = splat_target(grid, u, v, d, pose, intrinsics) {
                let slot = &mut out.values[voxel];
                *slot = slot.max(value);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (VoxelGrid, CameraIntrinsics) {
        let grid = VoxelGrid::new([-1.0, -1.0, 0.0], 0.1, [20, 20, 30]).unwrap();
        let k = CameraIntrinsics::new(2.0, 2.0, 1.5, 1.5, 3, 3).unwrap();
        (grid, k)
    }

    fn frame(value: f64, depth: f64) -> (Image<f64>, Image<f64>) {
        let mut s = Image::filled(3, 3, 0.0);
        let mut d = Image::filled(3, 3, f64::INFINITY);
        *s.get_mut(1, 1) = value;
        *d.get_mut(1, 1) = depth;
        (s, d)
    }

    #[test]
    fn single_pixel_single_voxel() {
        let (grid, k) = setup();
        let (s, d) = frame(0.8, 1.0);
        let f = lift_to_3d(&s, &d, &Pose::identity(), &k, &grid).unwrap();
        let nonzero: Vec<_> = f.values().iter().enumerate().filter(|(_, v)| **v > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(*nonzero[0].1, 0.8);
        let expected = grid.voxel_of(&nalgebra::Vector3::new(0.0, 0.0, 1.0 + 1e-4)).unwrap();
        assert_eq!(nonzero[0].0, expected);
    }

    #[test]
    fn frames_combine_by_max() {
        let (grid, k) = setup();
        let mut field = SemanticField::zeros(grid);
        for value in [0.3, 0.7, 0.5] {
            let (s, d) = frame(value, 1.0);
            field.deposit(&s, &d, &Pose::identity(), &k).unwrap();
        }
        assert_eq!(field.values().iter().cloned().fold(0.0, f64::max), 0.7);
    }

    #[test]
    fn invalid_depth_is_skipped() {
        let (grid, k) = setup();
        for bad in [f64::INFINITY, f64::NAN, 0.0, -1.0] {
            let (s, d) = frame(0.8, bad);
            let f = lift_to_3d(&s, &d, &Pose::identity(), &k, &grid).unwrap();
            assert!(f.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn mismatched_inputs_error() {
        let (grid, k) = setup();
        let s = Image::filled(3, 2, 0.5);
        let d = Image::filled(3, 3, 1.0);
        assert!(lift_to_3d(&s, &d, &Pose::identity(), &k, &grid).is_err());
        let other = VoxelGrid::new([0.0; 3], 0.1, [2, 2, 2]).unwrap();
        let mut a = SemanticField::zeros(grid);
        assert!(a.merge_max(&SemanticField::zeros(other)).is_err());
    }
}
