//! Region reports, 2D semantic weighting and the lifted semantic field.

mod lift;
mod region;
mod weights;

pub use lift::{lift_to_3d, SemanticField};
pub use region::{
    format_region, format_report, parse_regions, parse_regions_bytes, Category, GridCell, Horizontal,
    ParseOutcome, Priority, RegionSize, SemanticRegion, Vertical,
};
pub use weights::{
    aggregate_weight_map, cell_rect, modulate, raw_weight_map, region_to_mask, CategoryWeights,
    CoefficientTable, PriorityWeights, SizeWeights, WeightMap, DILATION_FRACTION, TAPER_CUTOFF_SIGMAS,
    TAPER_SIGMA_FRACTION,
};
