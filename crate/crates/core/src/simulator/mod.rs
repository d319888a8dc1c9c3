//! Procedural evaluation environment: scenes, depth rendering, mock
//! region reports, baseline policies, episodes and coverage metrics.

mod coverage;
mod episode;
mod reconstruct;
mod render;
mod report;
mod scene;
mod views;

pub use coverage::{coverage, CoverageTracker};
pub use episode::{
    default_tau, planner_cache_inputs, run_episode, visibility_occupancy, EpisodeConfig, EpisodeResult, MetricsRow,
    Policy, SemanticUpdates, ViewRecord, ViewSource, VisibilitySource,
};
pub use reconstruct::{Reconstruction, UnknownSpace};
pub use render::{render_depth, DepthRender, DEPTH_JUMP, EDGE_PENALTY};
pub use report::{detect_regions, synth_semantic_report, GRAZING_COS};
pub use scene::{
    build_scene, object_grid, scene_grid, OccupancyScene, Regime, SceneSpec, Solid, OBJECT_PLACEMENT_RADIUS,
    ROOM_CAMERA_HEIGHT, ROOM_CEILING,
};
pub use views::{
    fibonacci_hemisphere, initial_views, planner_candidates, random_view, uniform_views, ELEVATION_RANGE,
    OBJECT_SEEDS, RANGE_STEP, RING_INSET, RING_PITCH, SCENE_SEED_STRIDE, SHELL_RADIUS, UNIFORM_RING_INSET,
};
