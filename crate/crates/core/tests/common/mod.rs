//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nbv_core::geometry::{FrustumSpec, Vec3};
use nbv_core::planner::{distance_prior, instantiate_fan, pose_key, Candidate, NmsRadii, SeedPosition, ViewPose};
use nbv_core::visibility::{BinSpec, MaskCache, VisibilityParams};
use nbv_core::voxel_field::{FusedField, Occupancy, VoxelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Conical frustum test written from scratch: forward axis from yaw and
/// pitch, depth along it, angle to it. `None` when the point sits within
/// `eps` of any boundary, where rounding may go either way.
pub fn frustum_oracle(point: &Vec3, position: &Vec3, yaw: f64, pitch: f64, spec: &FrustumSpec) -> Option<bool> {
    let eps = 1e-9;
    let (y, p) = (yaw.to_radians(), pitch.to_radians());
    let fwd = [p.cos() * y.cos(), p.cos() * y.sin(), p.sin()];
    let d = [point.x - position.x, point.y - position.y, point.z - position.z];
    let depth = fwd[0] * d[0] + fwd[1] * d[1] + fwd[2] * d[2];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let half = (spec.fov_deg / 2.0).to_radians();
    let margins = [
        depth - spec.min_depth,
        spec.max_depth - depth,
        if len > 0.0 { half - (depth / len).clamp(-1.0, 1.0).acos() } else { -1.0 },
    ];
    if margins.iter().any(|m| m.abs() < eps) {
        None
    } else {
        Some(margins.iter().all(|&m| m > 0.0))
    }
}

/// Random axis-aligned boxes in an otherwise empty grid.
pub fn random_boxes<R: Rng>(rng: &mut R, grid: VoxelGrid, boxes: usize, max_side: usize) -> Occupancy {
    let mut occ = Occupancy::empty(grid);
    let d = grid.dims;
    for _ in 0..boxes {
        let lo: Vec<usize> = (0..3).map(|a| rng.gen_range(0..d[a])).collect();
        let side: Vec<usize> = (0..3).map(|_| rng.gen_range(1..=max_side)).collect();
        for z in lo[2]..(lo[2] + side[2]).min(d[2]) {
            for y in lo[1]..(lo[1] + side[1]).min(d[1]) {
                for x in lo[0]..(lo[0] + side[0]).min(d[0]) {
                    occ.set(grid.index([x, y, z]), true);
                }
            }
        }
    }
    occ
}

pub fn free_voxels(occ: &Occupancy) -> Vec<usize> {
    (0..occ.grid().len()).filter(|&v| !occ.is_occupied(v)).collect()
}

/// A small planning instance that can be searched exhaustively.
pub struct Instance {
    pub cache: Arc<MaskCache>,
    pub field: FusedField,
    pub candidates: Vec<Candidate>,
    pub nms: NmsRadii,
}

/// Grid of at most 8³ voxels, at most 4 bins, random clutter and utility.
/// Most candidates are single voxels; some carry several positions.
pub fn small_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let dims = [r.gen_range(4..=8), r.gen_range(4..=8), r.gen_range(4..=8)];
    let grid = VoxelGrid::new([0.0; 3], 0.1, dims).unwrap();
    let boxes = r.gen_range(1..5);
    let occ = random_boxes(&mut r, grid, boxes, 3);
    let (yb, pb) = [(4, 1), (2, 2), (3, 1), (2, 1)][r.gen_range(0..4)];
    let bins = BinSpec::new(yb, pb, -45.0, 45.0).unwrap();
    let params = VisibilityParams {
        frustum: FrustumSpec::new(r.gen_range(50.0..100.0), 0.05, r.gen_range(0.3..0.9)).unwrap(),
        bins,
        r_pre: 48,
        rng_seed: seed,
    };
    let utility: Vec<f64> = (0..grid.len())
        .map(|_| if r.gen_bool(0.2) { 0.0 } else { r.gen_range(0.0..1.0) })
        .collect();
    let field = FusedField::from_utility(grid, utility).unwrap();
    let free = free_voxels(&occ);
    let mut candidates = Vec::new();
    for &v in free.iter().step_by(3) {
        if r.gen_bool(0.2) {
            let mut positions = vec![SeedPosition { voxel: v, range: None }];
            for _ in 0..2 {
                let other = free[r.gen_range(0..free.len())];
                positions.push(SeedPosition {
                    voxel: other,
                    range: Some(r.gen_range(0.1..1.0)),
                });
            }
            candidates.push(Candidate { seed: v, positions });
        } else {
            candidates.push(Candidate::single(v));
        }
    }
    let cache = Arc::new(MaskCache::new(Arc::new(occ), params).unwrap());
    let nms = NmsRadii::for_grid(grid.voxel_size, &bins);
    Instance {
        cache,
        field,
        candidates,
        nms,
    }
}

/// Best pose of the documented pose set under `utility`, by exhaustive
/// search: each candidate's fan is centered on its top bin (highest
/// `score · prior` over positions and bins, ties to lower voxel then bin),
/// suppressed and occupied poses are dropped, and the winner maximizes
/// `score · prior`. Ties: lower seed, then voxel, then bin index, then fan
/// order. Returns `(objective, pose)`.
pub fn brute_force_best(
    cache: &MaskCache,
    utility: &[f64],
    candidates: &[Candidate],
    committed: &[ViewPose],
    nms: &NmsRadii,
    anchor: &Vec3,
    tau: f64,
) -> Option<(f64, ViewPose)> {
    let occ = cache.occupancy();
    let grid = occ.grid();
    let bins = cache.params().bins;
    let score = |voxel: usize, bin| -> f64 {
        let m = cache.get_or_build(voxel, bin).unwrap();
        m.voxels
            .iter()
            .zip(&m.counts)
            .map(|(&v, &c)| c as f64 / m.r_pre as f64 * utility[v as usize])
            .sum()
    };
    let mut sorted: Vec<&Candidate> = candidates.iter().collect();
    sorted.sort_by_key(|c| c.seed);
    let mut best: Option<(f64, (usize, usize, usize, usize), ViewPose)> = None;
    for c in sorted {
        let mut top: Option<(f64, usize, usize)> = None;
        let mut positions: Vec<usize> = c.positions.iter().map(|p| p.voxel).collect();
        positions.sort_unstable();
        positions.dedup();
        for &voxel in &positions {
            if occ.is_occupied(voxel) {
                continue;
            }
            let prior = distance_prior(&grid.center(voxel), anchor, tau);
            for bin in bins.all() {
                let key = score(voxel, bin) * prior;
                if top.is_none_or(|(k, _, _)| key > k) {
                    top = Some((key, voxel, bins.index(bin)));
                }
            }
        }
        let Some((_, _, top_bin)) = top else { continue };
        for (order, pose) in instantiate_fan(cache, c, bins.from_index(top_bin)).into_iter().enumerate() {
            if committed.iter().any(|e| nms.suppresses(e, &pose)) {
                continue;
            }
            let (voxel, bin) = pose_key(cache, &pose).unwrap();
            if occ.is_occupied(voxel) {
                continue;
            }
            let objective = score(voxel, bin) * distance_prior(&grid.center(voxel), anchor, tau);
            let rank = (c.seed, voxel, bins.index(bin), order);
            let better = match &best {
                None => true,
                Some((o, r, _)) => objective > *o || (objective == *o && rank < *r),
            };
            if better {
                best = Some((objective, rank, pose));
            }
        }
    }
    best.map(|(o, _, p)| (o, p))
}

/// One-sided binomial sign test: probability of at least `wins` successes
/// in `wins + losses` fair coin flips.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in wins..=n {
        let mut c = 1.0;
        for i in 0..k {
            c *= (n - i) as f64 / (i + 1) as f64;
        }
        p += c;
    }
    p / 2f64.powi(n as i32)
}
