//! Surface coverage and depth error of acquired observations.

use crate::geometry::{back_project, CameraIntrinsics, Pose};

use super::render::DepthRender;
use super::scene::OccupancyScene;

/// Per-surface-voxel record of the closest back-projected depth sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageTracker {
    tolerance: f64,
    surface: Vec<bool>,
    surface_count: usize,
    closest: Vec<f64>,
    covered: usize,
}

impl CoverageTracker {
    pub fn new(scene: &OccupancyScene, tolerance: f64) -> Self {
        let surface_count = scene.surface.iter().filter(|&&s| s).count();
        Self {
            tolerance,
            surface: scene.surface.clone(),
            surface_count,
            closest: vec![f64::INFINITY; scene.surface.len()],
            covered: 0,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Marks every surface voxel whose center lies within tolerance of
    /// some valid pixel's back-projection.
    pub fn add_view(&mut self, scene: &OccupancyScene, render: &DepthRender, pose: &Pose, intrinsics: &CameraIntrinsics) {
        let grid = scene.grid();
        let reach = (self.tolerance / grid.voxel_size).ceil() as i64;
        let (w, h) = render.depth.dims();
        for v in 0..h {
            for u in 0..w {
                let d = *render.depth.get(u, v);
                if !d.is_finite() {
                    continue;
                }
                let Ok(p) = back_project(CameraIntrinsics::pixel_center(u, v), d, intrinsics, pose) else {
                    continue;
                };
                let c = grid.cell_of(&p);
                for dz in -reach..=reach {
                    for dy in -reach..=reach {
                        for dx in -reach..=reach {
                            let Some(n) = grid.index_signed([c[0] + dx, c[1] + dy, c[2] + dz]) else {
                                continue;
                            };
                            if !self.surface[n] {
                                continue;
                            }
                            let dist = (grid.center(n) - p).norm();
                            if dist <= self.tolerance {
                                if self.closest[n].is_infinite() {
                                    self.covered += 1;
                                }
                                self.closest[n] = self.closest[n].min(dist);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Fraction of ground-truth surface voxels covered.
    pub fn coverage(&self) -> f64 {
        if self.surface_count == 0 {
            return 0.0;
        }
        self.covered as f64 / self.surface_count as f64
    }

    /// Mean distance from covered surface voxel centers to their closest
    /// sample; 0 when nothing is covered.
    pub fn depth_error(&self) -> f64 {
        if self.covered == 0 {
            return 0.0;
        }
        self.closest.iter().filter(|d| d.is_finite()).sum::<f64>() / self.covered as f64
    }

    pub fn is_covered(&self, voxel: usize) -> bool {
        self.closest[voxel].is_finite()
    }
}

/// Coverage of a set of observations from scratch.
pub fn coverage(
    scene: &OccupancyScene,
    observations: &[(DepthRender, Pose)],
    intrinsics: &CameraIntrinsics,
    tolerance: f64,
) -> f64 {
    let mut t = CoverageTracker::new(scene, tolerance);
    for (r, p) in observations {
        t.add_view(scene, r, p, intrinsics);
    }
    t.coverage()
}
