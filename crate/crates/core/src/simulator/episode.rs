//! Episode execution: initial views, policy-driven acquisition, metrics.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{CameraIntrinsics, FrustumSpec, Pose};
use crate::planner::{NmsRadii, Planner, PlannerConfig, TraceRecord, ViewPose};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::semantic_field::{aggregate_weight_map, modulate, parse_regions, CoefficientTable, SemanticField};
use crate::visibility::{BinSpec, MaskCache, VisibilityParams};
use crate::voxel_field::{fuse, FusedField, FusionWeights, GeometricField, Occupancy, UnobservedGeometry};

use super::coverage::CoverageTracker;
use super::reconstruct::{Reconstruction, UnknownSpace};
use super::render::{render_depth, DepthRender};
use super::report::synth_semantic_report;
use super::scene::{OccupancyScene, Regime};
use super::views::{initial_views, planner_candidates, random_view, uniform_views};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "dual")]
    Dual,
    #[serde(rename = "geo-only")]
    GeoOnly,
    #[serde(rename = "sem-only")]
    SemOnly,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "uniform")]
    Uniform,
}

impl Policy {
    pub const ALL: [Policy; 5] = [Policy::Dual, Policy::GeoOnly, Policy::SemOnly, Policy::Random, Policy::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Dual => "dual",
            Policy::GeoOnly => "geo-only",
            Policy::SemOnly => "sem-only",
            Policy::Random => "random",
            Policy::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Policy> {
        Policy::ALL.into_iter().find(|p| p.name() == s)
    }

    fn uses_planner(self) -> bool {
        matches!(self, Policy::Dual | Policy::GeoOnly | Policy::SemOnly)
    }

    fn uses_semantics(self) -> bool {
        self != Policy::GeoOnly
    }
}

/// Geometry the visibility masks are cast against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilitySource {
    /// The agent's reconstruction after the initial views.
    #[default]
    Agent,
    GroundTruth,
}

/// When region reports are requested and the fields rebuilt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticUpdates {
    /// Once on the initial views; planning then only decays.
    #[default]
    Once,
    /// After every acquired view, keeping accumulated decay.
    PerView,
}

/// Fully resolved episode parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub regime: Regime,
    pub initial_views: usize,
    pub budget: usize,
    pub eta: f64,
    pub fov: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub w_g: f64,
    pub w_s: f64,
    pub rng_seed: u64,
    pub image_width: usize,
    pub image_height: usize,
    pub r_pre: u32,
    pub bins: BinSpec,
    /// Distance-prior scale; `None` uses half the workspace diagonal.
    pub tau: Option<f64>,
    pub distance_prior: bool,
    pub visibility_source: VisibilitySource,
    pub unknown_space: UnknownSpace,
    pub semantic_updates: SemanticUpdates,
    pub unobserved: UnobservedGeometry,
    pub coefficients: CoefficientTable,
    pub complexity: Option<usize>,
    /// Coverage tolerance; `None` uses 1.5 voxel sizes.
    pub coverage_tolerance: Option<f64>,
}

impl EpisodeConfig {
    pub fn defaults(regime: Regime) -> Self {
        let (initial_views, budget, gamma, w, h) = match regime {
            Regime::Object => (4, 25, 0.01, 64, 64),
            Regime::Scene => (15, 40, 0.005, 96, 96),
        };
        Self {
            regime,
            initial_views,
            budget,
            eta: 0.3,
            fov: 90.0,
            min_depth: 0.05,
            max_depth: 5.0,
            gamma,
            lambda: 1.0,
            w_g: 0.5,
            w_s: 0.5,
            rng_seed: 0,
            image_width: w,
            image_height: h,
            r_pre: 512,
            bins: BinSpec::default(),
            tau: None,
            distance_prior: true,
            visibility_source: VisibilitySource::Agent,
            unknown_space: UnknownSpace::Free,
            semantic_updates: SemanticUpdates::Once,
            unobserved: UnobservedGeometry::Sentinel,
            coefficients: CoefficientTable::default(),
            complexity: None,
            coverage_tolerance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_views == 0 || self.initial_views >= self.budget {
            return Err(invalid("need 0 < initial_views < budget"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid("eta must lie in (0, 1)"));
        }
        self.frustum()?;
        self.weights().validate()?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid("lambda must be finite and non-negative"));
        }
        if self.image_width < 4 || self.image_height < 3 {
            return Err(invalid("images must be at least 4x3 pixels"));
        }
        self.visibility_params(0)?;
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("tau must be positive and finite"));
            }
        }
        if let Some(t) = self.coverage_tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("coverage tolerance must be positive"));
            }
        }
        self.coefficients.validate()?;
        Ok(())
    }

    pub fn frustum(&self) -> Result<FrustumSpec> {
        FrustumSpec::new(self.fov, self.min_depth, self.max_depth)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::from_fov(self.image_width, self.image_height, self.fov)
    }

    pub fn weights(&self) -> FusionWeights {
        FusionWeights {
            w_g: self.w_g,
            w_s: self.w_s,
            gamma: self.gamma,
            unobserved: self.unobserved,
        }
    }

    pub fn visibility_params(&self, scene_seed: u64) -> Result<VisibilityParams> {
        let p = VisibilityParams {
            frustum: self.frustum()?,
            bins: self.bins,
            r_pre: self.r_pre,
            rng_seed: derive_seed(self.rng_seed, &[Stream::MonteCarlo as u64, scene_seed]),
        };
        p.validate()?;
        Ok(p)
    }

    fn policy_weights(&self, policy: Policy) -> FusionWeights {
        let mut w = self.weights();
        match policy {
            Policy::GeoOnly => w.w_s = 0.0,
            Policy::SemOnly => w.w_g = 0.0,
            _ => {}
        }
        w
    }
}

/// One metrics row: cumulative state after the `step`-th view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub coverage: f64,
    pub residual_total: f64,
    pub depth_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewSource {
    Initial,
    Planned,
}

/// One acquired view, as written to the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub step: usize,
    pub source: ViewSource,
    pub pose: ViewPose,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planner: Option<TraceRecord>,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub policy: Policy,
    pub metrics: Vec<MetricsRow>,
    pub views: Vec<ViewRecord>,
    /// Set when the planner ran out of candidates before the budget.
    pub truncated: bool,
    /// Rays cast by the mask cache during this episode.
    pub rays_cast: u64,
    pub cache: Option<Arc<MaskCache>>,
}

impl EpisodeResult {
    pub fn final_coverage(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.coverage)
    }

    pub fn planned_views(&self) -> usize {
        self.views.iter().filter(|v| v.source == ViewSource::Planned).count()
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("step,coverage,residual_total,depth_error\n");
        for m in &self.metrics {
            out.push_str(&format!("{},{},{},{}\n", m.step, m.coverage, m.residual_total, m.depth_error));
        }
        out
    }

    pub fn trace_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for v in &self.views {
            out.push_str(&serde_json::to_string(v)?);
            out.push('\n');
        }
        Ok(out)
    }
}

struct Sensor<'a> {
    scene: &'a OccupancyScene,
    intrinsics: CameraIntrinsics,
    frustum: FrustumSpec,
}

impl Sensor<'_> {
    fn capture(&self, view: &ViewPose) -> Result<(DepthRender, Pose)> {
        let pose = view.pose();
        Ok((render_depth(&pose, &self.intrinsics, &self.scene.occupancy, &self.frustum)?, pose))
    }
}

/// Per-frame semantic contribution: report → regions → weight map →
/// modulated feature uncertainty → lifted into the field.
fn deposit_semantics(
    sem: &mut SemanticField,
    render: &DepthRender,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    config: &EpisodeConfig,
) -> Result<()> {
    let report = synth_semantic_report(render);
    let parsed = parse_regions(&report);
    let weights = aggregate_weight_map(
        &parsed.regions,
        &config.coefficients,
        intrinsics.width,
        intrinsics.height,
    )?;
    let u_sem = modulate(&render.feature_uncertainty(), &weights, config.lambda)?;
    sem.deposit(&u_sem, &render.depth, pose, intrinsics)?;
    Ok(())
}

/// Visibility occupancy the planner's masks are cast against.
pub fn visibility_occupancy(
    config: &EpisodeConfig,
    scene: &OccupancyScene,
    reconstruction: &Reconstruction,
) -> Occupancy {
    match config.visibility_source {
        VisibilitySource::GroundTruth => scene.occupancy.clone(),
        VisibilitySource::Agent => reconstruction.occupancy(config.unknown_space),
    }
}

/// State after the initial views, shared by every policy.
struct Initial {
    frames: Vec<(DepthRender, Pose, ViewPose)>,
    geo: GeometricField,
    recon: Reconstruction,
    coverage: CoverageTracker,
    coverage_rows: Vec<(f64, f64)>,
}

fn run_initial(sensor: &Sensor, config: &EpisodeConfig, scene_seed: u64) -> Result<Initial> {
    let scene = sensor.scene;
    let grid = *scene.grid();
    let mut rng = stream_rng(config.rng_seed, Stream::InitialViews, &[scene_seed]);
    let views = initial_views(&mut rng, scene, config.initial_views);
    let tolerance = config.coverage_tolerance.unwrap_or(1.5 * grid.voxel_size);
    let mut init = Initial {
        frames: Vec::new(),
        geo: GeometricField::new(grid),
        recon: Reconstruction::new(grid),
        coverage: CoverageTracker::new(scene, tolerance),
        coverage_rows: Vec::new(),
    };
    for view in views {
        let (render, pose) = sensor.capture(&view)?;
        init.geo.splat_confidence(&render.depth, &render.confidence, &pose, &sensor.intrinsics)?;
        init.recon.integrate(&render, &pose, &sensor.intrinsics, &sensor.frustum);
        init.coverage.add_view(scene, &render, &pose, &sensor.intrinsics);
        init.coverage_rows.push((init.coverage.coverage(), init.coverage.depth_error()));
        init.frames.push((render, pose, view));
    }
    Ok(init)
}

/// Half the workspace diagonal, the default distance-prior scale.
pub fn default_tau(scene: &OccupancyScene) -> f64 {
    scene.grid().diagonal() / 2.0
}

/// Runs one episode. A `cache` built for the same visibility occupancy
/// and parameters is reused; otherwise a fresh one is created. The cache
/// used is returned in the result.
pub fn run_episode(
    config: &EpisodeConfig,
    policy: Policy,
    scene: &OccupancyScene,
    cache: Option<Arc<MaskCache>>,
) -> Result<EpisodeResult> {
    config.validate()?;
    if config.regime != scene.spec.regime {
        return Err(invalid("config regime does not match the scene"));
    }
    let scene_seed = scene.spec.seed;
    let sensor = Sensor {
        scene,
        intrinsics: config.intrinsics()?,
        frustum: config.frustum()?,
    };
    let grid = *scene.grid();
    let mut init = run_initial(&sensor, config, scene_seed)?;

    // fields from the initial views
    let weights = config.policy_weights(policy);
    let mut sem = SemanticField::zeros(grid);
    if policy.uses_semantics() {
        for (render, pose, _) in &init.frames {
            deposit_semantics(&mut sem, render, pose, &sensor.intrinsics, config)?;
        }
    }
    init.geo.mark_free(init.recon.seen_free())?;
    let mut field = fuse(&init.geo, &sem, weights)?;
    field.restrict(scene.workspace())?;
    let initial_total = field.total();

    let mut metrics: Vec<MetricsRow> = init
        .coverage_rows
        .iter()
        .enumerate()
        .map(|(i, &(coverage, depth_error))| MetricsRow {
            step: i + 1,
            coverage,
            residual_total: initial_total,
            depth_error,
        })
        .collect();
    let mut views: Vec<ViewRecord> = init
        .frames
        .iter()
        .enumerate()
        .map(|(i, (_, _, v))| ViewRecord {
            step: i + 1,
            source: ViewSource::Initial,
            pose: *v,
            planner: None,
        })
        .collect();

    let to_plan = config.budget - config.initial_views;
    let candidates = planner_candidates(scene);
    if candidates.is_empty() {
        return Err(Error::Generation("scene has no candidate seeds".into()));
    }
    let mut truncated = false;
    let mut rays_cast = 0;
    let mut used_cache = None;

    let acquire = |view: &ViewPose, init: &mut Initial| -> Result<(DepthRender, Pose)> {
        let (render, pose) = sensor.capture(view)?;
        init.coverage.add_view(scene, &render, &pose, &sensor.intrinsics);
        Ok((render, pose))
    };

    if policy.uses_planner() {
        let vis_params = config.visibility_params(scene_seed)?;
        let occupancy = visibility_occupancy(config, scene, &init.recon);
        let cache = match cache {
            Some(c) if c.params() == &vis_params && c.fingerprint() == occupancy.fingerprint() => c,
            _ => Arc::new(MaskCache::new(Arc::new(occupancy), vis_params)?),
        };
        let rays_before = cache.rays_cast();
        let tau = if config.distance_prior {
            config.tau.unwrap_or_else(|| default_tau(scene))
        } else {
            f64::INFINITY
        };
        let anchor = init.frames.last().map(|f| f.1.translation()).unwrap_or_else(|| scene.focus);
        let planner_config = PlannerConfig {
            eta: config.eta,
            tau,
            nms: NmsRadii::for_grid(grid.voxel_size, &config.bins),
            invalidation_radius: None,
        };
        let mut planner = Planner::new(cache.clone(), field, candidates, anchor, planner_config, to_plan)?;
        for _ in 0..to_plan {
            let Some(view) = planner.step()? else {
                truncated = true;
                break;
            };
            let (render, pose) = acquire(&view, &mut init)?;
            if config.semantic_updates == SemanticUpdates::PerView {
                init.geo.splat_confidence(&render.depth, &render.confidence, &pose, &sensor.intrinsics)?;
                init.recon.integrate(&render, &pose, &sensor.intrinsics, &sensor.frustum);
                init.geo.mark_free(init.recon.seen_free())?;
                if policy.uses_semantics() {
                    deposit_semantics(&mut sem, &render, &pose, &sensor.intrinsics, config)?;
                }
                planner.refresh(&init.geo, &sem)?;
            }
            let step = views.len() + 1;
            metrics.push(MetricsRow {
                step,
                coverage: init.coverage.coverage(),
                residual_total: planner.field().total(),
                depth_error: init.coverage.depth_error(),
            });
            views.push(ViewRecord {
                step,
                source: ViewSource::Planned,
                pose: view,
                planner: planner.trace().last().cloned(),
            });
        }
        rays_cast = cache.rays_cast() - rays_before;
        used_cache = Some(cache);
    } else {
        let mut field: FusedField = field;
        let planned: Vec<ViewPose> = match policy {
            Policy::Uniform => {
                let mut rng = stream_rng(config.rng_seed, Stream::InitialViews, &[scene_seed, 1]);
                uniform_views(scene, to_plan, rng.gen())
            }
            _ => {
                let mut rng = stream_rng(config.rng_seed, Stream::RandomPolicy, &[scene_seed]);
                (0..to_plan)
                    .map(|_| random_view(&mut rng, scene, &candidates, &config.bins))
                    .collect()
            }
        };
        for view in planned {
            acquire(&view, &mut init)?;
            field.apply_decay(&view.pose(), &sensor.frustum, config.eta)?;
            let step = views.len() + 1;
            metrics.push(MetricsRow {
                step,
                coverage: init.coverage.coverage(),
                residual_total: field.total(),
                depth_error: init.coverage.depth_error(),
            });
            views.push(ViewRecord {
                step,
                source: ViewSource::Planned,
                pose: view,
                planner: None,
            });
        }
    }
    Ok(EpisodeResult {
        policy,
        metrics,
        views,
        truncated,
        rays_cast,
        cache: used_cache,
    })
}

/// Visibility occupancy and parameters a planner episode would use, for
/// prewarming a persistent cache ahead of a run.
pub fn planner_cache_inputs(
    config: &EpisodeConfig,
    scene: &OccupancyScene,
) -> Result<(Occupancy, VisibilityParams, Vec<usize>)> {
    config.validate()?;
    let sensor = Sensor {
        scene,
        intrinsics: config.intrinsics()?,
        frustum: config.frustum()?,
    };
    let init = run_initial(&sensor, config, scene.spec.seed)?;
    let occupancy = visibility_occupancy(config, scene, &init.recon);
    let mut seeds: Vec<usize> = planner_candidates(scene)
        .iter()
        .flat_map(|c| c.positions.iter().map(|p| p.voxel))
        .filter(|&v| !occupancy.is_occupied(v))
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    Ok((occupancy, config.visibility_params(scene.spec.seed)?, seeds))
}
