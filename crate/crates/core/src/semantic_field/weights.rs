//! Soft region masks, the per-image weight map and semantic modulation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::{min_max_normalize, Image};

use super::region::{Category, GridCell, Priority, RegionSize, SemanticRegion};

/// Gaussian taper width as a fraction of the cell diagonal.
pub const TAPER_SIGMA_FRACTION: f64 = 0.10;
/// Core dilation as a fraction of the cell extent along each axis.
pub const DILATION_FRACTION: f64 = 0.05;
/// The taper is truncated to zero beyond this many standard deviations.
pub const TAPER_CUTOFF_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryWeights {
    pub occlusion: f64,
    pub geometric: f64,
    pub lighting: f64,
    pub boundary: f64,
    pub texture: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityWeights {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeWeights {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
}

/// Region weighting: `alpha` by category, `beta` by priority, `size` by
/// reported extent, and the modulation strength `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub alpha: CategoryWeights,
    pub beta: PriorityWeights,
    pub size: SizeWeights,
    pub lambda: f64,
}

impl Default for CoefficientTable {
    fn default() -> Self {
        Self {
            alpha: CategoryWeights {
                occlusion: 1.0,
                geometric: 1.0,
                lighting: 0.7,
                boundary: 0.7,
                texture: 0.4,
            },
            beta: PriorityWeights {
                high: 3.0,
                medium: 1.5,
                low: 0.5,
            },
            size: SizeWeights {
                small: 0.8,
                medium: 1.0,
                large: 1.2,
            },
            lambda: 1.0,
        }
    }
}

impl CoefficientTable {
    pub fn alpha(&self, c: Category) -> f64 {
        match c {
            Category::Occlusion => self.alpha.occlusion,
            Category::Geometric => self.alpha.geometric,
            Category::Lighting => self.alpha.lighting,
            Category::Boundary => self.alpha.boundary,
            Category::Texture => self.alpha.texture,
        }
    }

    pub fn beta(&self, p: Priority) -> f64 {
        match p {
            Priority::High => self.beta.high,
            Priority::Medium => self.beta.medium,
            Priority::Low => self.beta.low,
        }
    }

    pub fn size_factor(&self, s: RegionSize) -> f64 {
        match s {
            RegionSize::Small => self.size.small,
            RegionSize::Medium => self.size.medium,
            RegionSize::Large => self.size.large,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha.occlusion,
            self.alpha.geometric,
            self.alpha.lighting,
            self.alpha.boundary,
            self.alpha.texture,
            self.beta.high,
            self.beta.medium,
            self.beta.low,
            self.size.small,
            self.size.medium,
            self.size.large,
            self.lambda,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("coefficients must be finite and non-negative"));
        }
        if !(self.beta.high >= self.beta.medium && self.beta.medium >= self.beta.low) {
            return Err(invalid("priority coefficients must satisfy HIGH >= MEDIUM >= LOW"));
        }
        Ok(())
    }
}

/// Pixel-space rectangle of a grid cell: `(x0, y0, width, height)`.
pub fn cell_rect(cell: GridCell, width: usize, height: usize) -> (f64, f64, f64, f64) {
    let cw = width as f64 / 4.0;
    let ch = height as f64 / 3.0;
    (
        cell.horizontal.column() as f64 * cw,
        cell.vertical.row() as f64 * ch,
        cw,
        ch,
    )
}

/// Soft mask of a region: 1 on the size-scaled, slightly dilated cell core,
/// a truncated Gaussian taper outside it, and 0 far away.
pub fn region_to_mask(region: &SemanticRegion, width: usize, height: usize) -> Image<f64> {
    let (x0, y0, cw, ch) = cell_rect(region.cell, width, height);
    let (cx, cy) = (x0 + cw / 2.0, y0 + ch / 2.0);
    let scale = match region.size {
        RegionSize::Small => 0.8,
        RegionSize::Medium => 1.0,
        RegionSize::Large => 1.2,
    };
    let half_x = scale * cw / 2.0 + DILATION_FRACTION * cw;
    let half_y = scale * ch / 2.0 + DILATION_FRACTION * ch;
    let sigma = TAPER_SIGMA_FRACTION * (cw * cw + ch * ch).sqrt();
    let cutoff = TAPER_CUTOFF_SIGMAS * sigma;
    Image::from_fn(width, height, |u, v| {
        let dx = ((u as f64 + 0.5 - cx).abs() - half_x).max(0.0);
        let dy = ((v as f64 + 0.5 - cy).abs() - half_y).max(0.0);
        let d = dx.hypot(dy);
        if d == 0.0 {
            1.0
        } else if d > cutoff {
            0.0
        } else {
            (-d * d / (2.0 * sigma * sigma)).exp()
        }
    })
}

/// Per-image region weight `W(u)` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap(pub Image<f64>);

impl WeightMap {
    pub fn image(&self) -> &Image<f64> {
        &self.0
    }
}

/// `Σ α_cat · β_prio · s_size · M_k(u)` before normalization.
pub fn raw_weight_map(
    regions: &[SemanticRegion],
    table: &CoefficientTable,
    width: usize,
    height: usize,
) -> Image<f64> {
    let mut acc = Image::filled(width, height, 0.0);
    for region in regions {
        let w = table.alpha(region.category) * table.beta(region.priority) * table.size_factor(region.size);
        let mask = region_to_mask(region, width, height);
        for (a, m) in acc.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *a += w * m;
        }
    }
    acc
}

/// Aggregated and min–max normalized weight map; all zeros without regions.
pub fn aggregate_weight_map(
    regions: &[SemanticRegion],
    table: &CoefficientTable,
    width: usize,
    height: usize,
) -> Result<WeightMap> {
    table.validate()?;
    let raw = raw_weight_map(regions, table, width, height);
    let norm = min_max_normalize(raw.as_slice(), None);
    Ok(WeightMap(Image::from_vec(width, height, norm)?))
}

/// `Norm(σ · (1 + λ·W))` with per-image min–max normalization.
pub fn modulate(sigma: &Image<f64>, weights: &WeightMap, lambda: f64) -> Result<Image<f64>> {
    sigma.ensure_same_dims(weights.image())?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("lambda must be finite and non-negative"));
    }
    if sigma.as_slice().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(invalid("feature uncertainty must be finite and non-negative"));
    }
    let modulated: Vec<f64> = sigma
        .as_slice()
        .iter()
        .zip(weights.image().as_slice())
        .map(|(s, w)| s * (1.0 + lambda * w))
        .collect();
    Image::from_vec(sigma.width(), sigma.height(), min_max_normalize(&modulated, None))
}
