//! Coarse yaw/pitch orientation bins.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrientationBin {
    pub yaw_index: usize,
    pub pitch_index: usize,
}

/// Yaw bins tile `[0, 360)`; pitch bins tile `[pitch_min, pitch_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub yaw_bins: usize,
    pub pitch_bins: usize,
    pub pitch_min: f64,
    pub pitch_max: f64,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            yaw_bins: 8,
            pitch_bins: 3,
            pitch_min: -60.0,
            pitch_max: 60.0,
        }
    }
}

impl BinSpec {
    pub fn new(yaw_bins: usize, pitch_bins: usize, pitch_min: f64, pitch_max: f64) -> Result<Self> {
        let s = Self {
            yaw_bins,
            pitch_bins,
            pitch_min,
            pitch_max,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.yaw_bins == 0 || self.pitch_bins == 0 {
            return Err(invalid("bin counts must be positive"));
        }
        if !(self.pitch_min.is_finite() && self.pitch_max.is_finite()) {
            return Err(invalid("pitch range must be finite"));
        }
        if !(-90.0 < self.pitch_min && self.pitch_min < self.pitch_max && self.pitch_max < 90.0) {
            return Err(invalid("pitch range must satisfy -90 < min < max < 90"));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.yaw_bins * self.pitch_bins
    }

    pub fn yaw_width(&self) -> f64 {
        360.0 / self.yaw_bins as f64
    }

    pub fn pitch_width(&self) -> f64 {
        (self.pitch_max - self.pitch_min) / self.pitch_bins as f64
    }

    /// Dense index `yaw_index * pitch_bins + pitch_index`.
    pub fn index(&self, bin: OrientationBin) -> usize {
        bin.yaw_index * self.pitch_bins + bin.pitch_index
    }

    pub fn from_index(&self, index: usize) -> OrientationBin {
        OrientationBin {
            yaw_index: index / self.pitch_bins,
            pitch_index: index % self.pitch_bins,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = OrientationBin> + '_ {
        (0..self.count()).map(|i| self.from_index(i))
    }

    /// Bin center `(yaw, pitch)` in degrees.
    pub fn center(&self, bin: OrientationBin) -> (f64, f64) {
        (
            (bin.yaw_index as f64 + 0.5) * self.yaw_width(),
            self.pitch_min + (bin.pitch_index as f64 + 0.5) * self.pitch_width(),
        )
    }

    /// Bin containing an orientation. Yaw wraps; pitch outside the range
    /// has no bin. The upper pitch limit belongs to the last bin.
    pub fn bin_of(&self, yaw_deg: f64, pitch_deg: f64) -> Option<OrientationBin> {
        if !(yaw_deg.is_finite() && pitch_deg.is_finite()) {
            return None;
        }
        if pitch_deg < self.pitch_min || pitch_deg > self.pitch_max {
            return None;
        }
        let yaw = yaw_deg.rem_euclid(360.0);
        let yaw_index = ((yaw / self.yaw_width()).floor() as usize).min(self.yaw_bins - 1);
        let pitch_index =
            (((pitch_deg - self.pitch_min) / self.pitch_width()).floor() as usize).min(self.pitch_bins - 1);
        Some(OrientationBin {
            yaw_index,
            pitch_index,
        })
    }
}
