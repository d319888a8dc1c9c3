//! Versioned JSON run configuration. Every field except `regime` is
//! optional and falls back to the regime defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::semantic_field::{CategoryWeights, PriorityWeights, SizeWeights};
use crate::simulator::{EpisodeConfig, Regime, SemanticUpdates, UnknownSpace, VisibilitySource};
use crate::visibility::BinSpec;
use crate::voxel_field::UnobservedGeometry;

use super::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientOverrides {
    pub alpha: Option<CategoryWeights>,
    pub beta: Option<PriorityWeights>,
    pub size: Option<SizeWeights>,
}

/// On-disk configuration as written by users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub regime: Regime,
    pub rng_seed: Option<u64>,
    pub initial_views: Option<usize>,
    pub budget: Option<usize>,
    pub eta: Option<f64>,
    pub fov: Option<f64>,
    pub min_depth: Option<f64>,
    pub max_depth: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub w_g: Option<f64>,
    pub w_s: Option<f64>,
    pub image_width: Option<usize>,
    pub image_height: Option<usize>,
    pub r_pre: Option<u32>,
    pub bins: Option<BinSpec>,
    pub tau: Option<f64>,
    pub distance_prior: Option<bool>,
    pub visibility_source: Option<VisibilitySource>,
    pub unknown_space: Option<UnknownSpace>,
    pub semantic_updates: Option<SemanticUpdates>,
    pub unobserved: Option<UnobservedGeometry>,
    pub coefficients: Option<CoefficientOverrides>,
    pub complexity: Option<usize>,
    pub coverage_tolerance: Option<f64>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

impl ConfigFile {
    /// Applies the overrides on top of the regime defaults and validates.
    pub fn resolve(&self) -> Result<EpisodeConfig, CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let mut c = EpisodeConfig::defaults(self.regime);
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            rng_seed, initial_views, budget, eta, fov, min_depth, max_depth, gamma, lambda, w_g, w_s, image_width,
            image_height, r_pre, bins, distance_prior, visibility_source, unknown_space, semantic_updates, unobserved
        );
        c.tau = self.tau;
        c.complexity = self.complexity;
        c.coverage_tolerance = self.coverage_tolerance;
        if let Some(o) = &self.coefficients {
            if let Some(a) = o.alpha {
                c.coefficients.alpha = a;
            }
            if let Some(b) = o.beta {
                c.coefficients.beta = b;
            }
            if let Some(s) = o.size {
                c.coefficients.size = s;
            }
        }
        c.coefficients.lambda = c.lambda;
        if let Some(k) = c.complexity {
            let max = match c.regime {
                Regime::Object => 7,
                Regime::Scene => 10,
            };
            if !(1..=max).contains(&k) {
                return Err(CliError::Config(format!("complexity must lie in 1..={max}")));
            }
        }
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

/// Reads, parses and resolves a config file. A missing or unreadable file
/// is a usage error; bad contents are a validation error.
pub fn load_config(path: &Path) -> Result<EpisodeConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let file: ConfigFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    file.resolve()
}

/// Fully spelled-out default configuration for a regime.
pub fn default_config_json(regime: Regime) -> String {
    let c = EpisodeConfig::defaults(regime);
    let file = ConfigFile {
        version: CONFIG_VERSION,
        regime,
        rng_seed: Some(c.rng_seed),
        initial_views: Some(c.initial_views),
        budget: Some(c.budget),
        eta: Some(c.eta),
        fov: Some(c.fov),
        min_depth: Some(c.min_depth),
        max_depth: Some(c.max_depth),
        gamma: Some(c.gamma),
        lambda: Some(c.lambda),
        w_g: Some(c.w_g),
        w_s: Some(c.w_s),
        image_width: Some(c.image_width),
        image_height: Some(c.image_height),
        r_pre: Some(c.r_pre),
        bins: Some(c.bins),
        tau: None,
        distance_prior: Some(c.distance_prior),
        visibility_source: Some(c.visibility_source),
        unknown_space: Some(c.unknown_space),
        semantic_updates: Some(c.semantic_updates),
        unobserved: Some(c.unobserved),
        coefficients: Some(CoefficientOverrides {
            alpha: Some(c.coefficients.alpha),
            beta: Some(c.coefficients.beta),
            size: Some(c.coefficients.size),
        }),
        complexity: None,
        coverage_tolerance: None,
    };
    serde_json::to_string_pretty(&file).expect("config serializes") + "\n"
}
