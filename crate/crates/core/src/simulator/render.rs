//! Ray-cast depth rendering with a synthetic confidence model.

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, FrustumSpec, Pose};
use crate::image::Image;
use crate::visibility::first_hit;
use crate::voxel_field::Occupancy;

/// Relative depth jump between neighbouring pixels that counts as a
/// discontinuity.
pub const DEPTH_JUMP: f64 = 0.10;
/// Confidence multiplier lost next to discontinuities and silhouettes.
pub const EDGE_PENALTY: f64 = 0.5;

/// Per-pixel depth (camera `z`, `∞` on misses), raw confidence, and the
/// cosine between the viewing ray and the hit face normal (0 on misses).
#[derive(Clone, Debug, PartialEq)]
pub struct DepthRender {
    pub depth: Image<f64>,
    pub confidence: Image<f64>,
    pub incidence: Image<f64>,
}

impl DepthRender {
    pub fn is_hit(&self, u: usize, v: usize) -> bool {
        self.depth.get(u, v).is_finite()
    }

    /// Whether the pixel borders a miss or a large relative depth jump.
    pub fn is_edge(&self, u: usize, v: usize) -> bool {
        let d = *self.depth.get(u, v);
        if !d.is_finite() {
            return false;
        }
        let (w, h) = self.depth.dims();
        let mut neighbours = Vec::with_capacity(4);
        if u > 0 {
            neighbours.push((u - 1, v));
        }
        if u + 1 < w {
            neighbours.push((u + 1, v));
        }
        if v > 0 {
            neighbours.push((u, v - 1));
        }
        if v + 1 < h {
            neighbours.push((u, v + 1));
        }
        neighbours.into_iter().any(|(x, y)| {
            let n = *self.depth.get(x, y);
            !n.is_finite() || (n - d).abs() > DEPTH_JUMP * d.min(n)
        })
    }

    /// Per-pixel feature uncertainty `1 - normalized confidence` on hit
    /// pixels, 0 on misses.
    pub fn feature_uncertainty(&self) -> Image<f64> {
        let hits: Vec<f64> = self
            .depth
            .as_slice()
            .iter()
            .zip(self.confidence.as_slice())
            .filter(|(d, _)| d.is_finite())
            .map(|(_, c)| *c)
            .collect();
        let norm = crate::voxel_field::normalize_confidence(&hits);
        let mut it = norm.into_iter();
        let data = self
            .depth
            .as_slice()
            .iter()
            .map(|d| if d.is_finite() { 1.0 - it.next().expect("one value per hit") } else { 0.0 })
            .collect();
        Image::from_vec(self.depth.width(), self.depth.height(), data).expect("same dims")
    }
}

/// First-hit depth render. Confidence is
/// `cos(incidence) · exp(-depth / max_depth) · (1 - penalty at edges)`.
pub fn render_depth(
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    occupancy: &Occupancy,
    frustum: &FrustumSpec,
) -> Result<DepthRender> {
    let grid = occupancy.grid();
    let origin = pose.translation();
    if let Some(v) = grid.voxel_of(&origin) {
        if occupancy.is_occupied(v) {
            return Err(Error::Render(format!("camera inside occupied voxel {v}")));
        }
    }
    let (w, h) = (intrinsics.width, intrinsics.height);
    let forward = pose.forward();
    let mut depth = Image::filled(w, h, f64::INFINITY);
    let mut incidence = Image::filled(w, h, 0.0);
    for v in 0..h {
        for u in 0..w {
            let ray = pose.rotation() * intrinsics.unproject_ray(CameraIntrinsics::pixel_center(u, v));
            let dir = ray.normalize();
            let cos_axis = dir.dot(&forward);
            let t_limit = frustum.max_depth / cos_axis;
            if let Some(hit) = first_hit(occupancy, &origin, &dir, t_limit) {
                let z = hit.t * cos_axis;
                if z >= frustum.min_depth && z <= frustum.max_depth {
                    *depth.get_mut(u, v) = z;
                    *incidence.get_mut(u, v) = dir.dot(&hit.normal).abs();
                }
            }
        }
    }
    let mut render = DepthRender {
        confidence: Image::filled(w, h, 0.0),
        depth,
        incidence,
    };
    for v in 0..h {
        for u in 0..w {
            let d = *render.depth.get(u, v);
            if !d.is_finite() {
                continue;
            }
            let edge = if render.is_edge(u, v) { 1.0 - EDGE_PENALTY } else { 1.0 };
            *render.confidence.get_mut(u, v) = render.incidence.get(u, v) * (-d / frustum.max_depth).exp() * edge;
        }
    }
    Ok(render)
}
