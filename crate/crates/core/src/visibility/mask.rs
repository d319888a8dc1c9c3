//! Monte Carlo visibility masks and the quadrature reference.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{in_frustum, FrustumSpec, Pose, Vec3};
use crate::rng::{stream_rng, Stream};
use crate::voxel_field::Occupancy;

use super::bins::{BinSpec, OrientationBin};
use super::traverse::{cone_direction, exact_ray_cells, march, ray_length_limit, sample_cone};

/// Everything a mask depends on besides the occupancy it is cast against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams {
    pub frustum: FrustumSpec,
    pub bins: BinSpec,
    /// Rays per mask.
    pub r_pre: u32,
    pub rng_seed: u64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            frustum: FrustumSpec::default(),
            bins: BinSpec::default(),
            r_pre: 512,
            rng_seed: 0,
        }
    }
}

impl VisibilityParams {
    pub fn validate(&self) -> Result<()> {
        self.frustum.validate()?;
        self.bins.validate()?;
        if self.r_pre == 0 || self.r_pre > u16::MAX as u32 {
            return Err(invalid(format!("r_pre must be in 1..={}, got {}", u16::MAX, self.r_pre)));
        }
        Ok(())
    }

    /// Camera at the seed voxel center looking along the bin center.
    pub fn bin_pose(&self, occupancy: &Occupancy, seed: usize, bin: OrientationBin) -> Pose {
        let (yaw, pitch) = self.bins.center(bin);
        Pose::from_yaw_pitch(occupancy.grid().center(seed), yaw, pitch)
    }
}

/// Visible voxels of one (seed, bin) pair with hit counts out of `r_pre`.
/// Entries are sorted by voxel index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisibilityMask {
    pub seed: usize,
    pub bin: OrientationBin,
    pub r_pre: u32,
    pub voxels: Vec<u32>,
    pub counts: Vec<u16>,
}

impl VisibilityMask {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.r_pre as f64
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len()).map(|i| (self.voxels[i] as usize, self.probability(i)))
    }

    /// `Σ p(v) · utility(v)` in voxel order.
    #[inline]
    pub fn score(&self, utility: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&v, &c) in self.voxels.iter().zip(&self.counts) {
            acc += c as f64 * utility[v as usize];
        }
        acc / self.r_pre as f64
    }

    pub fn heap_bytes(&self) -> usize {
        self.voxels.len() * 4 + self.counts.len() * 2
    }
}

/// Reusable per-worker buffers sized to the grid.
pub struct Scratch {
    counts: Vec<u16>,
    touched: Vec<u32>,
}

impl Scratch {
    pub fn new(voxels: usize) -> Self {
        Self {
            counts: vec![0; voxels],
            touched: Vec::new(),
        }
    }
}

fn check_seed(occupancy: &Occupancy, seed: usize) -> Result<()> {
    if seed >= occupancy.grid().len() {
        return Err(invalid(format!("seed voxel {seed} outside grid")));
    }
    if occupancy.is_occupied(seed) {
        return Err(Error::DegenerateSeed(seed));
    }
    Ok(())
}

/// The `r_pre` ray directions used for a (seed, bin) pair.
pub fn mc_directions(params: &VisibilityParams, occupancy: &Occupancy, seed: usize, bin: OrientationBin) -> Vec<Vec3> {
    let pose = params.bin_pose(occupancy, seed, bin);
    let cos_half = params.frustum.cos_half_angle();
    let mut rng = stream_rng(
        params.rng_seed,
        Stream::MonteCarlo,
        &[seed as u64, params.bins.index(bin) as u64],
    );
    (0..params.r_pre).map(|_| sample_cone(&mut rng, &pose, cos_half)).collect()
}

pub fn mc_visibility(
    occupancy: &Occupancy,
    seed: usize,
    bin: OrientationBin,
    params: &VisibilityParams,
) -> Result<VisibilityMask> {
    let mut scratch = Scratch::new(occupancy.grid().len());
    mc_visibility_with(occupancy, seed, bin, params, &mut scratch)
}

pub fn mc_visibility_with(
    occupancy: &Occupancy,
    seed: usize,
    bin: OrientationBin,
    params: &VisibilityParams,
    scratch: &mut Scratch,
) -> Result<VisibilityMask> {
    params.validate()?;
    check_seed(occupancy, seed)?;
    if params.bins.index(bin) >= params.bins.count() {
        return Err(invalid("bin outside the bin layout"));
    }
    if scratch.counts.len() != occupancy.grid().len() {
        *scratch = Scratch::new(occupancy.grid().len());
    }
    let grid = occupancy.grid();
    let pose = params.bin_pose(occupancy, seed, bin);
    let origin = pose.translation();
    let t_limit = ray_length_limit(grid, params.frustum.max_depth, params.frustum.cos_half_angle());
    let Scratch { counts, touched } = scratch;
    for dir in mc_directions(params, occupancy, seed, bin) {
        march(occupancy, &origin, &dir, t_limit, |v| {
            if counts[v] == 0 {
                touched.push(v as u32);
            }
            counts[v] += 1;
        });
    }
    touched.sort_unstable();
    let mut voxels = Vec::new();
    let mut out_counts = Vec::new();
    for &v in touched.iter() {
        let c = std::mem::take(&mut counts[v as usize]);
        if in_frustum(&grid.center(v as usize), &pose, &params.frustum) {
            voxels.push(v);
            out_counts.push(c);
        }
    }
    touched.clear();
    Ok(VisibilityMask {
        seed,
        bin,
        r_pre: params.r_pre,
        voxels,
        counts: out_counts,
    })
}

/// Deterministic reference for the visible fraction of each voxel: a
/// `resolution × resolution` midpoint quadrature over the cone, uniform in
/// solid angle, traced with the plane-crossing walk. Returns `(voxel,
/// fraction)` sorted by voxel index.
pub fn exact_visibility(
    occupancy: &Occupancy,
    seed: usize,
    bin: OrientationBin,
    params: &VisibilityParams,
    resolution: usize,
) -> Result<Vec<(usize, f64)>> {
    params.validate()?;
    check_seed(occupancy, seed)?;
    if resolution == 0 {
        return Err(invalid("resolution must be positive"));
    }
    let grid = occupancy.grid();
    let pose = params.bin_pose(occupancy, seed, bin);
    let origin = pose.translation();
    let cos_half = params.frustum.cos_half_angle();
    let t_limit = ray_length_limit(grid, params.frustum.max_depth, cos_half);
    let mut counts = vec![0u32; grid.len()];
    let n = resolution as f64;
    for i in 0..resolution {
        let cos_t = 1.0 - (i as f64 + 0.5) / n * (1.0 - cos_half);
        for j in 0..resolution {
            let phi = std::f64::consts::TAU * (j as f64 + 0.5) / n;
            let dir = cone_direction(&pose, cos_t, phi);
            for v in exact_ray_cells(occupancy, &origin, &dir, t_limit) {
                counts[v] += 1;
            }
        }
    }
    let total = (resolution * resolution) as f64;
    Ok(counts
        .iter()
        .enumerate()
        .filter(|&(v, &c)| c > 0 && in_frustum(&grid.center(v), &pose, &params.frustum))
        .map(|(v, &c)| (v, c as f64 / total))
        .collect())
}

/// Whether every voxel of `mask` is reachable along one of its own ray
/// directions by the reference walk. Returns the offending voxels.
pub fn occlusion_violations(occupancy: &Occupancy, mask: &VisibilityMask, params: &VisibilityParams) -> Vec<usize> {
    let pose = params.bin_pose(occupancy, mask.seed, mask.bin);
    let origin = pose.translation();
    let t_limit = ray_length_limit(occupancy.grid(), params.frustum.max_depth, params.frustum.cos_half_angle());
    let mut reached = std::collections::HashSet::new();
    for dir in mc_directions(params, occupancy, mask.seed, mask.bin) {
        reached.extend(exact_ray_cells(occupancy, &origin, &dir, t_limit));
    }
    mask.voxels
        .iter()
        .map(|&v| v as usize)
        .filter(|v| !reached.contains(v))
        .collect()
}
