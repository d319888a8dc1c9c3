//! Candidate seeds, orientation fans and mask-only scoring.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{angle_diff_deg, Pose, Vec3};
use crate::visibility::{BinSpec, MaskCache, OrientationBin};

/// A camera placement: position plus yaw/pitch in degrees, and the
/// stand-off range it was generated from, if any.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPose {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub range: Option<f64>,
}

impl ViewPose {
    pub fn new(position: Vec3, yaw: f64, pitch: f64) -> Self {
        Self {
            position: [position.x, position.y, position.z],
            yaw: yaw.rem_euclid(360.0),
            pitch,
            range: None,
        }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn pose(&self) -> Pose {
        Pose::from_yaw_pitch(self.position(), self.yaw, self.pitch)
    }
}

/// One camera position belonging to a candidate seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPosition {
    pub voxel: usize,
    pub range: Option<f64>,
}

/// A planner seed: its own voxel plus the positions its fan may use
/// (several stand-off ranges at object level, just the seed in a scene).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub seed: usize,
    pub positions: Vec<SeedPosition>,
}

impl Candidate {
    pub fn single(seed: usize) -> Self {
        Self {
            seed,
            positions: vec![SeedPosition {
                voxel: seed,
                range: None,
            }],
        }
    }
}

/// Non-maximum suppression radii.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmsRadii {
    pub position: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

impl NmsRadii {
    /// Position radius `8 · voxel_size`, angular radii of half a bin.
    pub fn for_grid(voxel_size: f64, bins: &BinSpec) -> Self {
        Self {
            position: 8.0 * voxel_size,
            yaw_deg: bins.yaw_width() / 2.0,
            pitch_deg: bins.pitch_width() / 2.0,
        }
    }

    /// A pose is suppressed by an earlier one when it is closer than the
    /// position radius and within both angular radii (inclusive, so a
    /// commitment suppresses its whole fan).
    pub fn suppresses(&self, earlier: &ViewPose, pose: &ViewPose) -> bool {
        (earlier.position() - pose.position()).norm() < self.position
            && angle_diff_deg(earlier.yaw, pose.yaw) <= self.yaw_deg + 1e-9
            && (earlier.pitch - pose.pitch).abs() <= self.pitch_deg + 1e-9
    }
}

/// `exp(-distance / tau)`; exactly 1 when `tau` is infinite.
pub fn distance_prior(position: &Vec3, anchor: &Vec3, tau: f64) -> f64 {
    if tau.is_infinite() {
        1.0
    } else {
        (-(position - anchor).norm() / tau).exp()
    }
}

/// Upper-bound key of a seed and where it is attained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedKey {
    pub key: f64,
    pub position: usize,
    pub bin: OrientationBin,
}

/// `max over positions and bins of (mask score · distance prior)`.
/// Ties go to the lowest position voxel, then the lowest bin index.
/// Positions occupied in the cache's occupancy are skipped; `None` when no
/// position is usable.
pub fn compute_seed_key(
    cache: &MaskCache,
    utility: &[f64],
    candidate: &Candidate,
    anchor: &Vec3,
    tau: f64,
) -> Result<Option<SeedKey>> {
    let grid = cache.occupancy().grid();
    let bins = cache.params().bins;
    let mut best: Option<SeedKey> = None;
    let mut positions: Vec<usize> = candidate.positions.iter().map(|p| p.voxel).collect();
    positions.sort_unstable();
    positions.dedup();
    for voxel in positions {
        if cache.occupancy().is_occupied(voxel) {
            continue;
        }
        let prior = distance_prior(&grid.center(voxel), anchor, tau);
        for bin in bins.all() {
            let key = cache.get_or_build(voxel, bin)?.score(utility) * prior;
            if best.is_none_or(|b| key > b.key) {
                best = Some(SeedKey {
                    key,
                    position: voxel,
                    bin,
                });
            }
        }
    }
    Ok(best)
}

/// Score of a pose from the cached mask of its voxel and bin.
pub fn score_pose(cache: &MaskCache, utility: &[f64], pose: &ViewPose) -> Result<f64> {
    let (voxel, bin) = pose_key(cache, pose)?;
    Ok(cache.get_or_build(voxel, bin)?.score(utility))
}

/// The (voxel, bin) mask a pose is scored with.
pub fn pose_key(cache: &MaskCache, pose: &ViewPose) -> Result<(usize, OrientationBin)> {
    let grid = cache.occupancy().grid();
    let voxel = grid
        .voxel_of(&pose.position())
        .ok_or_else(|| invalid("pose position outside the grid"))?;
    let bin = cache
        .params()
        .bins
        .bin_of(pose.yaw, pose.pitch)
        .ok_or_else(|| invalid(format!("pitch {} outside the bin range", pose.pitch)))?;
    Ok((voxel, bin))
}

/// Bin center and its ±half-bin yaw/pitch neighbours (9 orientations),
/// at every candidate position, ranges outermost.
pub fn instantiate_fan(cache: &MaskCache, candidate: &Candidate, bin: OrientationBin) -> Vec<ViewPose> {
    let grid = cache.occupancy().grid();
    let bins: &BinSpec = &cache.params().bins;
    let (yaw, pitch) = bins.center(bin);
    let (hy, hp) = (bins.yaw_width() / 2.0, bins.pitch_width() / 2.0);
    let mut out = Vec::with_capacity(9 * candidate.positions.len());
    for p in &candidate.positions {
        let position = grid.center(p.voxel);
        for dy in [-1.0, 0.0, 1.0] {
            for dp in [-1.0, 0.0, 1.0] {
                let mut v = ViewPose::new(position, yaw + dy * hy, pitch + dp * hp);
                v.range = p.range;
                out.push(v);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrustumSpec;
    use crate::visibility::VisibilityParams;
    use crate::voxel_field::{Occupancy, VoxelGrid};
    use std::sync::Arc;

    fn cache(bins: BinSpec) -> MaskCache {
        let g = VoxelGrid::new([0.0; 3], 0.1, [8, 8, 8]).unwrap();
        let params = VisibilityParams {
            frustum: FrustumSpec::new(60.0, 0.05, 0.5).unwrap(),
            bins,
            r_pre: 32,
            rng_seed: 1,
        };
        MaskCache::new(Arc::new(Occupancy::empty(g)), params).unwrap()
    }

    #[test]
    fn fan_sizes_and_membership() {
        let c = cache(BinSpec::default());
        let single = Candidate::single(100);
        for bin in c.params().bins.all() {
            let fan = instantiate_fan(&c, &single, bin);
            assert_eq!(fan.len(), 9);
            for pose in &fan {
                let (voxel, _) = pose_key(&c, pose).unwrap();
                assert_eq!(voxel, 100);
            }
            assert!(fan.contains(&{
                let (y, p) = c.params().bins.center(bin);
                ViewPose::new(c.occupancy().grid().center(100), y, p)
            }));
        }
        let ranged = Candidate {
            seed: 100,
            positions: [99, 100, 101]
                .map(|voxel| SeedPosition {
                    voxel,
                    range: Some(voxel as f64),
                })
                .to_vec(),
        };
        assert_eq!(instantiate_fan(&c, &ranged, c.params().bins.from_index(0)).len(), 27);
    }

    #[test]
    fn zero_field_gives_zero_key() {
        let c = cache(BinSpec::new(4, 1, -30.0, 30.0).unwrap());
        let u = vec![0.0; 512];
        let k = compute_seed_key(&c, &u, &Candidate::single(200), &Vec3::zeros(), 1.0)
            .unwrap()
            .unwrap();
        assert_eq!(k.key, 0.0);
        assert_eq!(c.params().bins.index(k.bin), 0);
    }

    #[test]
    fn key_is_bin_score_times_prior() {
        let c = cache(BinSpec::new(4, 1, -30.0, 30.0).unwrap());
        let g = *c.occupancy().grid();
        let seed = g.index([2, 4, 4]);
        let hot = g.index([5, 4, 4]);
        let mut u = vec![0.0; g.len()];
        u[hot] = 2.0;
        let anchor = Vec3::new(0.0, 0.0, 0.0);
        let tau = 0.7;
        let k = compute_seed_key(&c, &u, &Candidate::single(seed), &anchor, tau)
            .unwrap()
            .unwrap();
        let b = c.params().bins.bin_of(0.0, 0.0).unwrap();
        let m = c.get_or_build(seed, b).unwrap();
        let prior = (-(g.center(seed) - anchor).norm() / tau).exp();
        assert_eq!(k.bin, b);
        assert_eq!(k.key, m.score(&u) * prior);
        let far = compute_seed_key(&c, &u, &Candidate::single(seed), &anchor, f64::INFINITY)
            .unwrap()
            .unwrap();
        assert_eq!(far.key, m.score(&u));
    }

    #[test]
    fn uniform_utility_scores_mask_mass() {
        let c = cache(BinSpec::default());
        let u = vec![0.5; 512];
        let pose = ViewPose::new(c.occupancy().grid().center(300), 10.0, 5.0);
        let (voxel, bin) = pose_key(&c, &pose).unwrap();
        let m = c.get_or_build(voxel, bin).unwrap();
        let mass: f64 = m.entries().map(|(_, p)| p).sum();
        assert!((score_pose(&c, &u, &pose).unwrap() - 0.5 * mass).abs() < 1e-12);
        let bad = ViewPose::new(c.occupancy().grid().center(300), 10.0, 80.0);
        assert!(score_pose(&c, &u, &bad).is_err());
    }

    #[test]
    fn nms_rule() {
        let r = NmsRadii::for_grid(0.1, &BinSpec::default());
        let a = ViewPose::new(Vec3::zeros(), 10.0, 0.0);
        assert!(r.suppresses(&a, &ViewPose::new(Vec3::new(0.5, 0.0, 0.0), 20.0, 5.0)));
        assert!(!r.suppresses(&a, &ViewPose::new(Vec3::new(0.8, 0.0, 0.0), 10.0, 0.0)));
        assert!(r.suppresses(&a, &ViewPose::new(Vec3::zeros(), 32.5, 0.0)));
        assert!(!r.suppresses(&a, &ViewPose::new(Vec3::zeros(), 33.0, 0.0)));
        assert!(!r.suppresses(&a, &ViewPose::new(Vec3::zeros(), 10.0, 21.0)));
        assert!(r.suppresses(&a, &ViewPose::new(Vec3::zeros(), 350.0, 0.0)));
    }
}
