//! Shared voxel grid, geometric uncertainty field, fused utility field and
//! frustum decay.

mod fused;
mod geometric;
mod grid;
mod snapshot;

pub use fused::{fuse, FusedField, FusionWeights, UnobservedGeometry};
pub use geometric::{normalize_confidence, GeometricField, SplatStats, SPLAT_NUDGE};
pub(crate) use geometric::{splat_target, valid_depth};
pub use grid::{Occupancy, VoxelGrid};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
