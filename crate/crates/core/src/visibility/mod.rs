//! Occlusion-aware visibility masks per (seed, orientation bin).

mod bins;
mod cache;
mod mask;
mod traverse;

pub use bins::{BinSpec, OrientationBin};
pub use cache::{inspect_cache_file, CacheFileSummary, CacheStats, MaskCache};
pub use mask::{
    exact_visibility, mc_directions, mc_visibility, mc_visibility_with, occlusion_violations, Scratch,
    VisibilityMask, VisibilityParams,
};
pub use traverse::{cone_direction, exact_ray_cells, first_hit, march, RayHit, ray_length_limit, sample_cone};
