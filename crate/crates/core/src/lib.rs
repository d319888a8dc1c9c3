//! Next-best-view planning driven by fused geometric and semantic
//! uncertainty, with cached visibility masks and a synthetic simulator.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod image;
pub mod planner;
pub mod rng;
pub mod semantic_field;
pub mod simulator;
pub mod visibility;
pub mod voxel_field;

pub use error::{Error, Result};
