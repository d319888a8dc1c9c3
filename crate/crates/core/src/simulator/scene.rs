//! Procedural ground-truth scenes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::rng::{stream_rng, Stream};
use crate::voxel_field::{Occupancy, VoxelGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Object,
    Scene,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Object => "object",
            Regime::Scene => "scene",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub regime: Regime,
    pub seed: u64,
    /// Object regime: number of solids (1–7). Scene regime: number of
    /// furniture pieces (1–10). `None` draws it from the seed.
    pub complexity: Option<usize>,
}

/// Axis-aligned solid primitives in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solid {
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Two boxes sharing a corner.
    LShape { a_min: [f64; 3], a_max: [f64; 3], b_min: [f64; 3], b_max: [f64; 3] },
}

impl Solid {
    pub fn contains(&self, p: &Vec3) -> bool {
        let in_box = |lo: &[f64; 3], hi: &[f64; 3]| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]);
        match self {
            Solid::Box { min, max } => in_box(min, max),
            Solid::Sphere { center, radius } => (p - Vec3::from(*center)).norm() <= *radius,
            Solid::LShape {
                a_min,
                a_max,
                b_min,
                b_max,
            } => in_box(a_min, a_max) || in_box(b_min, b_max),
        }
    }
}

/// Voxelized ground truth. `surface` marks occupied voxels with at least
/// one free in-grid face neighbour.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyScene {
    pub spec: SceneSpec,
    pub occupancy: Occupancy,
    pub surface: Vec<bool>,
    pub solids: Vec<Solid>,
    /// Point the object regime's views aim at; room center otherwise.
    pub focus: Vec3,
}

impl OccupancyScene {
    pub fn grid(&self) -> &VoxelGrid {
        self.occupancy.grid()
    }

    pub fn surface_voxels(&self) -> Vec<usize> {
        (0..self.surface.len()).filter(|&v| self.surface[v]).collect()
    }

    /// Voxels that belong to the reconstruction target region: the
    /// tabletop hemisphere for objects, the whole room otherwise.
    pub fn workspace(&self) -> Vec<bool> {
        let grid = self.grid();
        match self.spec.regime {
            Regime::Object => (0..grid.len())
                .map(|v| {
                    let c = grid.center(v);
                    c.z >= 0.0 && c.norm() <= OBJECT_WORKSPACE_RADIUS
                })
                .collect(),
            Regime::Scene => vec![true; grid.len()],
        }
    }

    pub fn from_occupancy(spec: SceneSpec, occupancy: Occupancy, solids: Vec<Solid>, focus: Vec3) -> Result<Self> {
        let grid = *occupancy.grid();
        if occupancy.count() == grid.len() {
            return Err(Error::Generation("scene has no free space".into()));
        }
        let surface = (0..grid.len())
            .map(|v| occupancy.is_occupied(v) && grid.face_neighbors(v).any(|n| !occupancy.is_occupied(n)))
            .collect();
        Ok(Self {
            spec,
            occupancy,
            surface,
            solids,
            focus,
        })
    }
}

/// Object-regime workspace: 64³ voxels of 5 cm, floor at `z = 0`.
pub fn object_grid() -> VoxelGrid {
    VoxelGrid::new([-1.6, -1.6, 0.0], 0.05, [64, 64, 64]).expect("valid grid")
}

/// Scene-regime room: 64 × 64 × 32 voxels of 10 cm.
pub fn scene_grid() -> VoxelGrid {
    VoxelGrid::new([0.0, 0.0, 0.0], 0.1, [64, 64, 32]).expect("valid grid")
}

/// Radius of the disc the object regime places solids in.
pub const OBJECT_PLACEMENT_RADIUS: f64 = 0.6;
/// Radius of the tabletop hemisphere holding the solids; cameras stay
/// outside it.
pub const OBJECT_WORKSPACE_RADIUS: f64 = 1.0;
/// Minimum gap between the footprints of neighbouring solids.
pub const OBJECT_GAP: f64 = 0.05;
/// Height of the navigable camera layer in the room.
pub const ROOM_CAMERA_HEIGHT: f64 = 1.45;
/// Ceiling height of the room.
pub const ROOM_CEILING: f64 = 3.0;

pub fn build_scene(spec: SceneSpec) -> Result<OccupancyScene> {
    match spec.regime {
        Regime::Object => build_object_scene(spec),
        Regime::Scene => build_room_scene(spec),
    }
}

fn rasterize(grid: &VoxelGrid, occ: &mut Occupancy, solid: &Solid) {
    for v in 0..grid.len() {
        if !occ.is_occupied(v) && solid.contains(&grid.center(v)) {
            occ.set(v, true);
        }
    }
}

fn build_object_scene(spec: SceneSpec) -> Result<OccupancyScene> {
    let mut rng = stream_rng(spec.seed, Stream::Scene, &[1]);
    let count = match spec.complexity {
        Some(c) if (1..=7).contains(&c) => c,
        Some(c) => return Err(Error::Generation(format!("object complexity {c} outside 1..=7"))),
        None => rng.gen_range(3..=7),
    };
    let grid = object_grid();
    // footprint circles (x, y, r) of placed solids
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    let mut solids = Vec::new();
    let scale = if count <= 2 { 1.0 } else { (2.0 / count as f64).sqrt().max(0.6) };
    let mut attempts = 0;
    while solids.len() < count {
        attempts += 1;
        if attempts > 5000 {
            return Err(Error::Generation(format!("could not place {count} solids")));
        }
        let shape = Shape::sample(&mut rng, scale);
        let r = shape.footprint();
        let (x, y) = sample_disc(&mut rng, OBJECT_PLACEMENT_RADIUS - r);
        if try_place(&mut placed, x, y, r) {
            solids.push(shape.at(x, y));
        }
    }
    let mut occ = Occupancy::empty(grid);
    for s in &solids {
        rasterize(&grid, &mut occ, s);
    }
    let top = solids.iter().map(solid_top).fold(0.0, f64::max);
    let focus = Vec3::new(0.0, 0.0, (top / 2.0).max(0.1));
    OccupancyScene::from_occupancy(spec, occ, solids, focus)
}

/// Object-regime primitive before placement.
enum Shape {
    Box { hx: f64, hy: f64, h: f64 },
    Sphere { r: f64 },
    /// Arms of length `a` along ±x and `b` along ±y, thickness `t`.
    L { a: f64, b: f64, t: f64, h: f64, sx: f64, sy: f64 },
}

impl Shape {
    fn sample<R: Rng>(rng: &mut R, scale: f64) -> Self {
        match rng.gen_range(0..3) {
            0 => Shape::Box {
                hx: rng.gen_range(0.08..0.3) * scale,
                hy: rng.gen_range(0.08..0.3) * scale,
                h: rng.gen_range(0.2..1.0),
            },
            1 => Shape::Sphere {
                r: rng.gen_range(0.1..0.3) * scale,
            },
            _ => Shape::L {
                a: rng.gen_range(0.25..0.5) * scale,
                b: rng.gen_range(0.25..0.5) * scale,
                t: rng.gen_range(0.08..0.15) * scale.max(0.8),
                h: rng.gen_range(0.3..0.8),
                sx: if rng.gen::<bool>() { 1.0 } else { -1.0 },
                sy: if rng.gen::<bool>() { 1.0 } else { -1.0 },
            },
        }
    }

    fn footprint(&self) -> f64 {
        match *self {
            Shape::Box { hx, hy, .. } => hx.hypot(hy),
            Shape::Sphere { r } => r,
            Shape::L { a, b, .. } => (a / 2.0).hypot(b / 2.0),
        }
    }

    fn at(&self, x: f64, y: f64) -> Solid {
        match *self {
            Shape::Box { hx, hy, h } => Solid::Box {
                min: [x - hx, y - hy, 0.0],
                max: [x + hx, y + hy, h],
            },
            Shape::Sphere { r } => Solid::Sphere {
                center: [x, y, r],
                radius: r,
            },
            Shape::L { a, b, t, h, sx, sy } => {
                // corner at (x0, y0); the arms span the footprint box
                let (x0, y0) = (x - sx * a / 2.0, y - sy * b / 2.0);
                let span = |p: f64, q: f64| if p <= q { (p, q) } else { (q, p) };
                let (ax0, ax1) = span(x0, x0 + sx * a);
                let (ay0, ay1) = span(y0, y0 + sy * t);
                let (bx0, bx1) = span(x0, x0 + sx * t);
                let (by0, by1) = span(y0, y0 + sy * b);
                Solid::LShape {
                    a_min: [ax0, ay0, 0.0],
                    a_max: [ax1, ay1, h],
                    b_min: [bx0, by0, 0.0],
                    b_max: [bx1, by1, h],
                }
            }
        }
    }
}

fn solid_top(s: &Solid) -> f64 {
    match s {
        Solid::Box { max, .. } => max[2],
        Solid::Sphere { center, radius } => center[2] + radius,
        Solid::LShape { a_max, b_max, .. } => a_max[2].max(b_max[2]),
    }
}

fn sample_disc<R: Rng>(rng: &mut R, radius: f64) -> (f64, f64) {
    let radius = radius.max(0.0);
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    (r * a.cos(), r * a.sin())
}

/// Accepts a footprint circle if it keeps the minimum gap to all others.
fn try_place(placed: &mut Vec<(f64, f64, f64)>, x: f64, y: f64, r: f64) -> bool {
    let ok = placed
        .iter()
        .all(|&(px, py, pr)| (px - x).hypot(py - y) >= pr + r + OBJECT_GAP);
    if ok {
        placed.push((x, y, r));
    }
    ok
}

fn build_room_scene(spec: SceneSpec) -> Result<OccupancyScene> {
    let mut rng = stream_rng(spec.seed, Stream::Scene, &[2]);
    let count = match spec.complexity {
        Some(c) if (1..=10).contains(&c) => c,
        Some(c) => return Err(Error::Generation(format!("scene complexity {c} outside 1..=10"))),
        None => rng.gen_range(6..=9),
    };
    let grid = scene_grid();
    let (w, d) = (
        grid.dims[0] as f64 * grid.voxel_size,
        grid.dims[1] as f64 * grid.voxel_size,
    );
    let wall = 0.2;
    let mut solids = vec![
        Solid::Box { min: [0.0, 0.0, 0.0], max: [w, d, 0.1] },
        Solid::Box { min: [0.0, 0.0, ROOM_CEILING], max: [w, d, 3.2] },
        Solid::Box { min: [0.0, 0.0, 0.0], max: [wall, d, 3.2] },
        Solid::Box { min: [w - wall, 0.0, 0.0], max: [w, d, 3.2] },
        Solid::Box { min: [0.0, 0.0, 0.0], max: [w, wall, 3.2] },
        Solid::Box { min: [0.0, d - wall, 0.0], max: [w, d, 3.2] },
    ];
    // footprint rectangles of furniture, kept apart for walkways
    let mut rects: Vec<[f64; 4]> = Vec::new();
    let mut attempts = 0;
    let mut placed = 0;
    while placed < count {
        attempts += 1;
        if attempts > 5000 {
            return Err(Error::Generation(format!("could not place {count} furniture pieces")));
        }
        // the first two pieces are partitions that split off recesses
        let kind = if placed < 2.min(count) { 4 } else { rng.gen_range(0..4) };
        let pieces = match kind {
            4 => partition(&mut rng, w, d, wall),
            0 => shelf(&mut rng, w, d, wall),
            1 => table(&mut rng, w, d),
            2 => cabinet(&mut rng, w, d, wall),
            _ => column(&mut rng, w, d),
        };
        let rect = footprint(&pieces);
        let clear = rects.iter().all(|r| {
            rect[0] >= r[2] + 0.6 || r[0] >= rect[2] + 0.6 || rect[1] >= r[3] + 0.6 || r[1] >= rect[3] + 0.6
        });
        if clear {
            rects.push(rect);
            solids.extend(pieces);
            placed += 1;
        }
    }
    let mut occ = Occupancy::empty(grid);
    for s in &solids {
        rasterize(&grid, &mut occ, s);
    }
    let focus = Vec3::new(w / 2.0, d / 2.0, 1.0);
    OccupancyScene::from_occupancy(spec, occ, solids, focus)
}

fn footprint(pieces: &[Solid]) -> [f64; 4] {
    let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in pieces {
        let (lo, hi) = match p {
            Solid::Box { min, max } => (*min, *max),
            Solid::Sphere { center, radius } => (center.map(|c| c - radius), center.map(|c| c + radius)),
            Solid::LShape {
                a_min,
                a_max,
                b_min,
                b_max,
            } => (
                [a_min[0].min(b_min[0]), a_min[1].min(b_min[1]), 0.0],
                [a_max[0].max(b_max[0]), a_max[1].max(b_max[1]), 0.0],
            ),
        };
        r[0] = r[0].min(lo[0]);
        r[1] = r[1].min(lo[1]);
        r[2] = r[2].max(hi[0]);
        r[3] = r[3].max(hi[1]);
    }
    r
}

/// Wall-side placement: returns `(x0, y0, x1, y1)` of a footprint with its
/// back against a random wall, plus the unit normal pointing into the room.
fn against_wall<R: Rng>(rng: &mut R, w: f64, d: f64, wall: f64, length: f64, depth: f64) -> ([f64; 4], [f64; 2]) {
    let side = rng.gen_range(0..4);
    let along = |rng: &mut R, extent: f64| rng.gen_range(wall + 0.3..extent - wall - 0.3 - length);
    match side {
        0 => {
            let x = along(rng, w);
            ([x, wall, x + length, wall + depth], [0.0, 1.0])
        }
        1 => {
            let x = along(rng, w);
            ([x, d - wall - depth, x + length, d - wall], [0.0, -1.0])
        }
        2 => {
            let y = along(rng, d);
            ([wall, y, wall + depth, y + length], [1.0, 0.0])
        }
        _ => {
            let y = along(rng, d);
            ([w - wall - depth, y, w - wall, y + length], [-1.0, 0.0])
        }
    }
}

/// Thin interior wall jutting out from an outer wall.
fn partition<R: Rng>(rng: &mut R, w: f64, d: f64, wall: f64) -> Vec<Solid> {
    let length = rng.gen_range(1.6..2.8);
    let t = 0.1;
    let height = 2.4;
    let side = rng.gen_range(0..4);
    let extent = if side < 2 { w } else { d };
    let at = rng.gen_range(1.4..extent - 1.4);
    let (min, max) = match side {
        0 => ([at, wall, 0.0], [at + t, wall + length, height]),
        1 => ([at, d - wall - length, 0.0], [at + t, d - wall, height]),
        2 => ([wall, at, 0.0], [wall + length, at + t, height]),
        _ => ([w - wall - length, at, 0.0], [w - wall, at + t, height]),
    };
    vec![Solid::Box { min, max }]
}

/// Open-fronted shelf unit against a wall: a hollow shell with interior
/// boards, leaving pockets visible only from in front.
fn shelf<R: Rng>(rng: &mut R, w: f64, d: f64, wall: f64) -> Vec<Solid> {
    let length = rng.gen_range(1.0..2.0);
    let depth = rng.gen_range(0.4..0.6);
    let height = rng.gen_range(1.2..2.2);
    let (r, n) = against_wall(rng, w, d, wall, length, depth);
    let t = 0.1;
    let mut out = Vec::new();
    // sides perpendicular to the wall
    if n[0] == 0.0 {
        out.push(Solid::Box { min: [r[0], r[1], 0.0], max: [r[0] + t, r[3], height] });
        out.push(Solid::Box { min: [r[2] - t, r[1], 0.0], max: [r[2], r[3], height] });
        let back_y = if n[1] > 0.0 { [r[1], r[1] + t] } else { [r[3] - t, r[3]] };
        out.push(Solid::Box { min: [r[0], back_y[0], 0.0], max: [r[2], back_y[1], height] });
    } else {
        out.push(Solid::Box { min: [r[0], r[1], 0.0], max: [r[2], r[1] + t, height] });
        out.push(Solid::Box { min: [r[0], r[3] - t, 0.0], max: [r[2], r[3], height] });
        let back_x = if n[0] > 0.0 { [r[0], r[0] + t] } else { [r[2] - t, r[2]] };
        out.push(Solid::Box { min: [back_x[0], r[1], 0.0], max: [back_x[1], r[3], height] });
    }
    let boards = rng.gen_range(2..=4);
    for k in 0..=boards {
        let z = k as f64 * height / boards as f64;
        let z0 = (z - t / 2.0).max(0.0);
        out.push(Solid::Box { min: [r[0], r[1], z0], max: [r[2], r[3], (z0 + t).min(height)] });
    }
    out
}

fn table<R: Rng>(rng: &mut R, w: f64, d: f64) -> Vec<Solid> {
    let lx = rng.gen_range(0.8..1.6);
    let ly = rng.gen_range(0.6..1.2);
    let x = rng.gen_range(1.0..w - 1.0 - lx);
    let y = rng.gen_range(1.0..d - 1.0 - ly);
    let h = rng.gen_range(0.7..0.9);
    let leg = 0.1;
    let mut out = vec![Solid::Box { min: [x, y, h - 0.1], max: [x + lx, y + ly, h] }];
    for (cx, cy) in [(x, y), (x + lx - leg, y), (x, y + ly - leg), (x + lx - leg, y + ly - leg)] {
        out.push(Solid::Box { min: [cx, cy, 0.0], max: [cx + leg, cy + leg, h] });
    }
    // an item on the table
    let s = rng.gen_range(0.15..0.3);
    let ix = rng.gen_range(x..x + lx - s);
    let iy = rng.gen_range(y..y + ly - s);
    out.push(Solid::Box { min: [ix, iy, h], max: [ix + s, iy + s, h + rng.gen_range(0.1..0.4)] });
    out
}

fn cabinet<R: Rng>(rng: &mut R, w: f64, d: f64, wall: f64) -> Vec<Solid> {
    let length = rng.gen_range(0.6..1.4);
    let depth = rng.gen_range(0.4..0.7);
    let height = rng.gen_range(0.8..1.3);
    let (r, _) = against_wall(rng, w, d, wall, length, depth);
    vec![Solid::Box { min: [r[0], r[1], 0.0], max: [r[2], r[3], height] }]
}

fn column<R: Rng>(rng: &mut R, w: f64, d: f64) -> Vec<Solid> {
    let s = rng.gen_range(0.3..0.6);
    let x = rng.gen_range(1.2..w - 1.2 - s);
    let y = rng.gen_range(1.2..d - 1.2 - s);
    vec![Solid::Box { min: [x, y, 0.0], max: [x + s, y + s, ROOM_CEILING] }]
}
