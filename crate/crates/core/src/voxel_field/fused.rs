use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{in_frustum, FrustumSpec, Pose};
use crate::semantic_field::SemanticField;

use super::geometric::GeometricField;
use super::grid::VoxelGrid;

/// How voxels that were never splatted enter the geometric term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnobservedGeometry {
    /// Contribute nothing; the global weight alone keeps them in the objective.
    Ignore,
    /// Contribute the stored sentinel uncertainty (1.0).
    #[default]
    Sentinel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w_g: f64,
    pub w_s: f64,
    pub gamma: f64,
    #[serde(default)]
    pub unobserved: UnobservedGeometry,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            w_g: 0.5,
            w_s: 0.5,
            gamma: 0.01,
            unobserved: UnobservedGeometry::Sentinel,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("w_g", self.w_g), ("w_s", self.w_s), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// The planner's objective landscape: per-voxel utility
/// `(w_g·geo + w_s·sem + gamma) · attenuation`, where `attenuation` is the
/// product of every decay factor applied so far.
///
/// Mutation (`apply_decay`, `refresh`) requires exclusive access; reading
/// utility while another thread mutates the field is a contract violation,
/// which the borrow checker enforces for safe callers.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedField {
    grid: VoxelGrid,
    weights: FusionWeights,
    utility: Vec<f64>,
    attenuation: Vec<f64>,
    support: Option<Vec<bool>>,
}

#[inline]
fn combine(weights: &FusionWeights, geo: &GeometricField, sem: &SemanticField, v: usize) -> f64 {
    let g = match weights.unobserved {
        UnobservedGeometry::Ignore if !geo.is_observed(v) => 0.0,
        _ => geo.uncertainty()[v],
    };
    weights.w_g * g + weights.w_s * sem.values()[v] + weights.gamma
}

/// Fuses geometric and semantic fields on their shared grid.
pub fn fuse(geo: &GeometricField, sem: &SemanticField, weights: FusionWeights) -> Result<FusedField> {
    weights.validate()?;
    if geo.grid() != sem.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *geo.grid();
    let utility = (0..grid.len()).map(|v| combine(&weights, geo, sem, v)).collect();
    Ok(FusedField {
        grid,
        weights,
        utility,
        attenuation: vec![1.0; grid.len()],
        support: None,
    })
}

impl FusedField {
    /// Field with explicit utilities and no decay history; mostly for tests
    /// and synthetic instances.
    pub fn from_utility(grid: VoxelGrid, utility: Vec<f64>) -> Result<Self> {
        if utility.len() != grid.len() {
            return Err(invalid("utility length does not match grid"));
        }
        if utility.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(invalid("utility must be finite and non-negative"));
        }
        Ok(Self {
            grid,
            weights: FusionWeights {
                w_g: 0.0,
                w_s: 0.0,
                gamma: 0.0,
                unobserved: UnobservedGeometry::Ignore,
            },
            attenuation: vec![1.0; grid.len()],
            utility,
            support: None,
        })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn weights(&self) -> &FusionWeights {
        &self.weights
    }

    pub fn utility(&self) -> &[f64] {
        &self.utility
    }

    pub fn attenuation(&self) -> &[f64] {
        &self.attenuation
    }

    /// Voxels outside `support` carry no utility from now on, including
    /// after `refresh`.
    pub fn restrict(&mut self, support: Vec<bool>) -> Result<()> {
        if support.len() != self.grid.len() {
            return Err(invalid("support length does not match grid"));
        }
        for (u, &keep) in self.utility.iter_mut().zip(&support) {
            if !keep {
                *u = 0.0;
            }
        }
        self.support = Some(support);
        Ok(())
    }

    pub fn support(&self) -> Option<&[bool]> {
        self.support.as_deref()
    }

    pub fn total(&self) -> f64 {
        self.utility.iter().sum()
    }

    /// Scales every voxel whose center lies in the pose's frustum by
    /// `1 - eta`; all other voxels are left untouched. Returns the number of
    /// voxels scaled.
    pub fn apply_decay(&mut self, pose: &Pose, spec: &FrustumSpec, eta: f64) -> Result<usize> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
        }
        let factor = 1.0 - eta;
        let mut changed = 0;
        for v in 0..self.grid.len() {
            if in_frustum(&self.grid.center(v), pose, spec) {
                self.utility[v] *= factor;
                self.attenuation[v] *= factor;
                changed += 1;
            }
        }
        Ok(changed)
    }

    /// Recombines updated source fields while keeping the accumulated decay.
    pub fn refresh(&mut self, geo: &GeometricField, sem: &SemanticField) -> Result<()> {
        if geo.grid() != &self.grid || sem.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        for v in 0..self.grid.len() {
            let inside = self.support.as_ref().is_none_or(|s| s[v]);
            self.utility[v] = if inside {
                combine(&self.weights, geo, sem, v) * self.attenuation[v]
            } else {
                0.0
            };
        }
        Ok(())
    }
}
