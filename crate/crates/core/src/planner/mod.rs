//! Greedy budgeted next-best-view selection.

mod scoring;
mod select;

pub use scoring::{
    compute_seed_key, distance_prior, instantiate_fan, pose_key, score_pose, Candidate, NmsRadii, SeedKey,
    SeedPosition, ViewPose,
};
pub use select::{Planner, PlannerConfig, TraceRecord};
