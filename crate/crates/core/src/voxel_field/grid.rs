use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Vec3;

/// Axis-aligned voxel lattice. `origin` is the minimum corner.
///
/// Linear indices are row-major with `z` outermost and `x` innermost:
/// `index = x + nx * (y + ny * z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: [f64; 3],
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(origin: [f64; 3], voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(invalid("voxel_size must be positive"));
        }
        if dims.contains(&0) {
            return Err(invalid("grid dims must be positive"));
        }
        if dims.iter().product::<usize>() > u32::MAX as usize {
            return Err(invalid("grid too large for 32-bit voxel indices"));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(invalid("grid origin must be finite"));
        }
        Ok(Self {
            origin,
            voxel_size,
            dims,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn in_bounds(&self, c: [i64; 3]) -> bool {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a])
    }

    #[inline]
    pub fn index_signed(&self, c: [i64; 3]) -> Option<usize> {
        self.in_bounds(c)
            .then(|| self.index([c[0] as usize, c[1] as usize, c[2] as usize]))
    }

    #[inline]
    pub fn center(&self, index: usize) -> Vec3 {
        let c = self.coords(index);
        self.center_of(c)
    }

    #[inline]
    pub fn center_of(&self, c: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin[0] + (c[0] as f64 + 0.5) * self.voxel_size,
            self.origin[1] + (c[1] as f64 + 0.5) * self.voxel_size,
            self.origin[2] + (c[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    /// Integer cell containing `p` (may be out of bounds).
    #[inline]
    pub fn cell_of(&self, p: &Vec3) -> [i64; 3] {
        [
            ((p.x - self.origin[0]) / self.voxel_size).floor() as i64,
            ((p.y - self.origin[1]) / self.voxel_size).floor() as i64,
            ((p.z - self.origin[2]) / self.voxel_size).floor() as i64,
        ]
    }

    #[inline]
    pub fn voxel_of(&self, p: &Vec3) -> Option<usize> {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return None;
        }
        self.index_signed(self.cell_of(p))
    }

    pub fn min_corner(&self) -> Vec3 {
        Vec3::from(self.origin)
    }

    pub fn max_corner(&self) -> Vec3 {
        Vec3::new(
            self.origin[0] + self.dims[0] as f64 * self.voxel_size,
            self.origin[1] + self.dims[1] as f64 * self.voxel_size,
            self.origin[2] + self.dims[2] as f64 * self.voxel_size,
        )
    }

    pub fn diagonal(&self) -> f64 {
        (self.max_corner() - self.min_corner()).norm()
    }

    /// The six face neighbours of a voxel that lie inside the grid.
    pub fn face_neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords(index);
        const OFFS: [[i64; 3]; 6] = [
            [1, 0, 0],
            [-1, 0, 0],
            [0, 1, 0],
            [0, -1, 0],
            [0, 0, 1],
            [0, 0, -1],
        ];
        OFFS.iter().filter_map(move |o| {
            self.index_signed([c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]])
        })
    }
}

/// Binary occupancy over a grid; the geometry rays terminate on.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    grid: VoxelGrid,
    occupied: Vec<bool>,
}

impl Occupancy {
    pub fn empty(grid: VoxelGrid) -> Self {
        Self {
            grid,
            occupied: vec![false; grid.len()],
        }
    }

    pub fn from_vec(grid: VoxelGrid, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != grid.len() {
            return Err(invalid("occupancy length does not match grid"));
        }
        Ok(Self { grid, occupied })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    #[inline]
    pub fn is_occupied(&self, index: usize) -> bool {
        self.occupied[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.occupied[index] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.occupied
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Stable 64-bit content fingerprint (grid parameters and occupancy bits).
    pub fn fingerprint(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for o in self.grid.origin {
            h.update(o.to_le_bytes());
        }
        h.update(self.grid.voxel_size.to_le_bytes());
        for d in self.grid.dims {
            h.update((d as u64).to_le_bytes());
        }
        let mut byte = 0u8;
        for (i, &o) in self.occupied.iter().enumerate() {
            byte |= (o as u8) << (i % 8);
            if i % 8 == 7 {
                h.update([byte]);
                byte = 0;
            }
        }
        h.update([byte]);
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }
}
