//! Initial-view layouts, baseline view generators and planner seeds.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::geometry::{yaw_pitch_of, Vec3};
use crate::planner::{Candidate, SeedPosition, ViewPose};
use crate::visibility::BinSpec;

use super::scene::{OccupancyScene, Regime, ROOM_CAMERA_HEIGHT};

/// Stand-off radius of the object-regime camera shell.
pub const SHELL_RADIUS: f64 = 1.3;
/// Offset between the three object-level stand-off ranges.
pub const RANGE_STEP: f64 = 0.2;
/// Number of object-level seed directions.
pub const OBJECT_SEEDS: usize = 96;
/// Elevation band of object-level cameras, degrees.
pub const ELEVATION_RANGE: (f64, f64) = (10.0, 75.0);
/// Grid stride of scene-level seeds.
pub const SCENE_SEED_STRIDE: usize = 4;
/// Inset of the initial-view ring from the inner wall faces, meters.
pub const RING_INSET: f64 = 0.8;
/// Inset of the uniform-baseline ring, meters.
pub const UNIFORM_RING_INSET: f64 = 1.2;
/// Downward tilt of ring views, degrees.
pub const RING_PITCH: f64 = -15.0;

/// Unit directions on a Fibonacci lattice over the elevation band,
/// equal-area in the band.
pub fn fibonacci_hemisphere(n: usize, phase: f64) -> Vec<Vec3> {
    let (lo, hi) = (ELEVATION_RANGE.0.to_radians().sin(), ELEVATION_RANGE.1.to_radians().sin());
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = phase + golden * i as f64;
            Vec3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

fn look_at(position: Vec3, target: Vec3) -> ViewPose {
    let (yaw, pitch) = yaw_pitch_of(&(target - position));
    ViewPose::new(position, yaw, pitch)
}

fn is_free(scene: &OccupancyScene, p: &Vec3) -> bool {
    scene
        .grid()
        .voxel_of(p)
        .is_some_and(|v| !scene.occupancy.is_occupied(v))
}

fn shell_center() -> Vec3 {
    Vec3::zeros()
}

/// Object regime: views on the shell aimed at the scene focus.
fn shell_views(scene: &OccupancyScene, dirs: &[Vec3]) -> Vec<ViewPose> {
    dirs.iter()
        .map(|d| look_at(shell_center() + d * SHELL_RADIUS, scene.focus))
        .collect()
}

/// Inner room rectangle `(x0, y0, x1, y1)` inset from the walls.
fn ring_rect(scene: &OccupancyScene, inset: f64) -> [f64; 4] {
    let g = scene.grid();
    let wall = 0.2;
    let w = g.dims[0] as f64 * g.voxel_size;
    let d = g.dims[1] as f64 * g.voxel_size;
    [wall + inset, wall + inset, w - wall - inset, d - wall - inset]
}

fn ring_point(r: [f64; 4], s: f64) -> Vec3 {
    let (lx, ly) = (r[2] - r[0], r[3] - r[1]);
    let per = 2.0 * (lx + ly);
    let s = s.rem_euclid(per);
    let (x, y) = if s < lx {
        (r[0] + s, r[1])
    } else if s < lx + ly {
        (r[2], r[1] + s - lx)
    } else if s < 2.0 * lx + ly {
        (r[2] - (s - lx - ly), r[3])
    } else {
        (r[0], r[3] - (s - 2.0 * lx - ly))
    };
    Vec3::new(x, y, ROOM_CAMERA_HEIGHT)
}

/// `n` equally spaced ring views starting at arc length `phase`, each
/// slid forward along the ring until its position is free.
fn ring_views(scene: &OccupancyScene, n: usize, inset: f64, phase: f64) -> Vec<ViewPose> {
    let r = ring_rect(scene, inset);
    let per = 2.0 * ((r[2] - r[0]) + (r[3] - r[1]));
    let center = Vec3::new((r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0, ROOM_CAMERA_HEIGHT);
    (0..n)
        .map(|k| {
            let mut s = phase + per * k as f64 / n as f64;
            let mut p = ring_point(r, s);
            let mut tries = 0;
            while !is_free(scene, &p) && tries < 1000 {
                s += 0.05;
                p = ring_point(r, s);
                tries += 1;
            }
            let (yaw, _) = yaw_pitch_of(&(center - p));
            ViewPose::new(p, yaw, RING_PITCH)
        })
        .collect()
}

/// Direction drawn uniformly by area from the elevation band.
pub fn random_hemisphere<R: Rng>(rng: &mut R) -> Vec3 {
    let (lo, hi) = (ELEVATION_RANGE.0.to_radians().sin(), ELEVATION_RANGE.1.to_radians().sin());
    let z = rng.gen_range(lo..hi);
    let r = (1.0 - z * z).sqrt();
    let a = rng.gen_range(0.0..TAU);
    Vec3::new(r * a.cos(), r * a.sin(), z)
}

/// `|O₀|` initial views: uniformly random on the hemisphere around the
/// object, or an equal-spaced perimeter ring with a random phase in a room.
pub fn initial_views<R: Rng>(rng: &mut R, scene: &OccupancyScene, n: usize) -> Vec<ViewPose> {
    match scene.spec.regime {
        Regime::Object => {
            let dirs: Vec<Vec3> = (0..n).map(|_| random_hemisphere(rng)).collect();
            shell_views(scene, &dirs)
        }
        Regime::Scene => {
            let r = ring_rect(scene, RING_INSET);
            let per = 2.0 * ((r[2] - r[0]) + (r[3] - r[1]));
            let phase: f64 = rng.gen();
            ring_views(scene, n, RING_INSET, phase * per)
        }
    }
}

/// Uniform baseline: Fibonacci hemisphere around the object, or an
/// equal-spaced inner ring offset by half a spacing in a room.
pub fn uniform_views(scene: &OccupancyScene, n: usize, phase: f64) -> Vec<ViewPose> {
    match scene.spec.regime {
        Regime::Object => shell_views(scene, &fibonacci_hemisphere(n, TAU * phase)),
        Regime::Scene => {
            let r = ring_rect(scene, UNIFORM_RING_INSET);
            let per = 2.0 * ((r[2] - r[0]) + (r[3] - r[1]));
            ring_views(scene, n, UNIFORM_RING_INSET, (phase + 0.5 / n as f64) * per)
        }
    }
}

/// Planner seeds. Object level: shell directions with three stand-off
/// ranges each; scene level: free voxels of the camera layer on a stride.
/// Every position is a free voxel of the ground truth.
pub fn planner_candidates(scene: &OccupancyScene) -> Vec<Candidate> {
    let g = *scene.grid();
    let free = |v: usize| !scene.occupancy.is_occupied(v);
    let mut out: Vec<Candidate> = match scene.spec.regime {
        Regime::Object => fibonacci_hemisphere(OBJECT_SEEDS, 0.0)
            .into_iter()
            .filter_map(|d| {
                let positions: Vec<SeedPosition> = [-1.0, 0.0, 1.0]
                    .into_iter()
                    .filter_map(|k| {
                        let range = SHELL_RADIUS + k * RANGE_STEP;
                        let voxel = g.voxel_of(&(shell_center() + d * range))?;
                        free(voxel).then_some(SeedPosition {
                            voxel,
                            range: Some(range),
                        })
                    })
                    .collect();
                let seed = g.voxel_of(&(shell_center() + d * SHELL_RADIUS))?;
                (free(seed) && !positions.is_empty()).then_some(Candidate { seed, positions })
            })
            .collect(),
        Regime::Scene => {
            let z = (ROOM_CAMERA_HEIGHT / g.voxel_size).floor() as usize;
            let mut v = Vec::new();
            for y in (2..g.dims[1]).step_by(SCENE_SEED_STRIDE) {
                for x in (2..g.dims[0]).step_by(SCENE_SEED_STRIDE) {
                    let seed = g.index([x, y, z]);
                    if free(seed) && g.face_neighbors(seed).all(free) {
                        v.push(Candidate::single(seed));
                    }
                }
            }
            v
        }
    };
    out.sort_by_key(|c| c.seed);
    out.dedup_by_key(|c| c.seed);
    out
}

/// Random baseline: a random candidate position with uniformly random
/// yaw and pitch within the bin range.
pub fn random_view<R: Rng>(rng: &mut R, scene: &OccupancyScene, candidates: &[Candidate], bins: &BinSpec) -> ViewPose {
    let c = &candidates[rng.gen_range(0..candidates.len())];
    let p = c.positions[rng.gen_range(0..c.positions.len())];
    let yaw = rng.gen_range(0.0..360.0);
    let pitch = rng.gen_range(bins.pitch_min..=bins.pitch_max);
    let mut v = ViewPose::new(scene.grid().center(p.voxel), yaw, pitch);
    v.range = p.range;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::scene::{build_scene, SceneSpec};
    use rand::SeedableRng;

    #[test]
    fn layouts_are_free_and_sized() {
        for regime in [Regime::Object, Regime::Scene] {
            let s = build_scene(SceneSpec { regime, seed: 4, complexity: None }).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
            for v in initial_views(&mut rng, &s, 15).into_iter().chain(uniform_views(&s, 25, 0.3)) {
                assert!(is_free(&s, &v.position()), "{regime:?} {v:?}");
            }
            let c = planner_candidates(&s);
            assert!(c.len() > 20, "{regime:?}: {}", c.len());
            assert!(c.windows(2).all(|w| w[0].seed < w[1].seed));
        }
    }

    #[test]
    fn fibonacci_band() {
        let dirs = fibonacci_hemisphere(50, 0.0);
        for d in dirs {
            assert!((d.norm() - 1.0).abs() < 1e-12);
            let e = d.z.asin().to_degrees();
            assert!(e >= ELEVATION_RANGE.0 - 1e-9 && e <= ELEVATION_RANGE.1 + 1e-9);
        }
    }
}
