//! Flat binary field snapshots.
//!
//! Layout (little-endian):
//!
//! | bytes | content                         |
//! |-------|---------------------------------|
//! | 8     | magic `NBVFIELD`                |
//! | 4     | format version (`u32`, = 1)     |
//! | 24    | origin, 3 × `f64`               |
//! | 8     | voxel size, `f64`               |
//! | 12    | dims, 3 × `u32`                 |
//! | 4·N   | scalars, `f32`, grid index order |

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::grid::VoxelGrid;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NBVFIELD";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut out: W, grid: &VoxelGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::InvalidInput("snapshot length does not match grid".into()));
    }
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    for o in grid.origin {
        out.write_all(&o.to_le_bytes())?;
    }
    out.write_all(&grid.voxel_size.to_le_bytes())?;
    for d in grid.dims {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    let mut body = Vec::with_capacity(values.len() * 4);
    for &v in values {
        body.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&body)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<(VoxelGrid, Vec<f32>)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let header = 8 + 4 + 24 + 8 + 12;
    if bytes.len() < header || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a field snapshot".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let origin = [f64_at(12), f64_at(20), f64_at(28)];
    let voxel_size = f64_at(36);
    let dims = [u32_at(44) as usize, u32_at(48) as usize, u32_at(52) as usize];
    let grid = VoxelGrid::new(origin, voxel_size, dims)
        .map_err(|e| Error::Format(format!("bad snapshot header: {e}")))?;
    let body = &bytes[header..];
    if body.len() != grid.len() * 4 {
        return Err(Error::Format(format!(
            "snapshot body has {} bytes, expected {}",
            body.len(),
            grid.len() * 4
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((grid, values))
}
