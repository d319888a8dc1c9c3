//! Subcommand implementations.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::simulator::{
    build_scene, planner_cache_inputs, run_episode, EpisodeConfig, EpisodeResult, MetricsRow, OccupancyScene,
    Policy, SceneSpec, Solid,
};
use crate::visibility::{inspect_cache_file, MaskCache};
use crate::voxel_field::write_snapshot;

use super::config::ConfigFile;
use super::output::{ensure_dir, write_atomic, write_json, RunManifest};
use super::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn scene_for(config: &EpisodeConfig, seed: u64) -> Result<OccupancyScene, CliError> {
    build_scene(SceneSpec {
        regime: config.regime,
        seed,
        complexity: config.complexity,
    })
    .map_err(runtime)
}

/// Loads a persisted cache for this scene and config, or `None` when the
/// file does not exist yet.
fn load_cache(
    path: &Path,
    config: &EpisodeConfig,
    scene: &OccupancyScene,
) -> Result<Option<Arc<MaskCache>>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let (occupancy, params, _) = planner_cache_inputs(config, scene).map_err(runtime)?;
    let cache = MaskCache::load(path, Arc::new(occupancy), params)
        .map_err(|e| CliError::Runtime(format!("cache {}: {e}", path.display())))?;
    Ok(Some(Arc::new(cache)))
}

#[derive(Serialize)]
struct RunSummary {
    policy: &'static str,
    regime: crate::simulator::Regime,
    scene_seed: u64,
    rng_seed: u64,
    budget: usize,
    initial_views: usize,
    planned_views: usize,
    truncated: bool,
    initial_coverage: f64,
    final_coverage: f64,
    final_residual: f64,
    final_depth_error: f64,
    rays_cast: u64,
}

fn summarize(config: &EpisodeConfig, seed: u64, r: &EpisodeResult) -> RunSummary {
    let last = r.metrics.last().copied().unwrap_or(MetricsRow {
        step: 0,
        coverage: 0.0,
        residual_total: 0.0,
        depth_error: 0.0,
    });
    RunSummary {
        policy: r.policy.name(),
        regime: config.regime,
        scene_seed: seed,
        rng_seed: config.rng_seed,
        budget: config.budget,
        initial_views: config.initial_views,
        planned_views: r.planned_views(),
        truncated: r.truncated,
        initial_coverage: r.metrics.get(config.initial_views - 1).map_or(0.0, |m| m.coverage),
        final_coverage: last.coverage,
        final_residual: last.residual_total,
        final_depth_error: last.depth_error,
        rays_cast: r.rays_cast,
    }
}

pub fn cmd_run(
    config: &EpisodeConfig,
    policy: Policy,
    seed: u64,
    out: &Path,
    cache_path: Option<&Path>,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    RunManifest::new("run", config, vec![seed], vec![policy.name().into()], out).write(out)?;
    let scene = scene_for(config, seed)?;
    let planner = matches!(policy, Policy::Dual | Policy::GeoOnly | Policy::SemOnly);
    let cache = match cache_path {
        Some(p) if planner => load_cache(p, config, &scene)?,
        _ => None,
    };
    let result = run_episode(config, policy, &scene, cache).map_err(runtime)?;
    write_atomic(&out.join("metrics.csv"), result.metrics_csv().as_bytes())?;
    write_atomic(&out.join("trace.jsonl"), result.trace_jsonl().map_err(runtime)?.as_bytes())?;
    write_json(&out.join("summary.json"), &summarize(config, seed, &result))?;
    if let (Some(p), Some(c)) = (cache_path, &result.cache) {
        c.save(p).map_err(runtime)?;
    }
    Ok(())
}

/// One curve of a comparison: a policy's per-step statistics over seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub policy: String,
    pub coverage_mean: Vec<f64>,
    pub coverage_std: Vec<f64>,
    pub residual_mean: Vec<f64>,
    pub residual_std: Vec<f64>,
    /// `(scene seed, final coverage)` for every finished episode.
    pub final_coverage: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub seed: u64,
    pub policy: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub series: Vec<Series>,
    pub failed: Vec<Failure>,
    pub complete: bool,
}

/// Population mean and standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

type EpisodeRows = Result<Vec<MetricsRow>, String>;

/// Runs every policy on every seed. Planner policies on one scene share a
/// mask cache; scenes run in parallel.
pub fn run_grid(config: &EpisodeConfig, seeds: &[u64], policies: &[Policy]) -> Vec<Vec<EpisodeRows>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let scene = match scene_for(config, seed) {
                Ok(s) => s,
                Err(e) => return policies.iter().map(|_| Err(e.to_string())).collect(),
            };
            let mut cache = None;
            policies
                .iter()
                .map(|&p| match run_episode(config, p, &scene, cache.clone()) {
                    Ok(r) => {
                        if r.cache.is_some() {
                            cache = r.cache;
                        }
                        Ok(r.metrics)
                    }
                    Err(e) => Err(e.to_string()),
                })
                .collect()
        })
        .collect()
}

pub fn compare(config: &EpisodeConfig, seeds: &[u64], policies: &[Policy]) -> Comparison {
    let grid = run_grid(config, seeds, policies);
    let steps = config.budget;
    let mut failed = Vec::new();
    let mut series = Vec::new();
    for (k, p) in policies.iter().enumerate() {
        let mut runs: Vec<(u64, &Vec<MetricsRow>)> = Vec::new();
        for (i, &seed) in seeds.iter().enumerate() {
            match &grid[i][k] {
                Ok(m) if m.len() == steps => runs.push((seed, m)),
                Ok(m) => failed.push(Failure {
                    seed,
                    policy: p.name().into(),
                    error: format!("episode truncated after {} views", m.len()),
                }),
                Err(e) => failed.push(Failure {
                    seed,
                    policy: p.name().into(),
                    error: e.clone(),
                }),
            }
        }
        let mut s = Series {
            policy: p.name().into(),
            coverage_mean: Vec::with_capacity(steps),
            coverage_std: Vec::with_capacity(steps),
            residual_mean: Vec::with_capacity(steps),
            residual_std: Vec::with_capacity(steps),
            final_coverage: runs.iter().map(|(seed, m)| (*seed, m[steps - 1].coverage)).collect(),
        };
        for t in 0..steps {
            let cov: Vec<f64> = runs.iter().map(|(_, m)| m[t].coverage).collect();
            let res: Vec<f64> = runs.iter().map(|(_, m)| m[t].residual_total).collect();
            let (cm, cs) = mean_std(&cov);
            let (rm, rs) = mean_std(&res);
            s.coverage_mean.push(cm);
            s.coverage_std.push(cs);
            s.residual_mean.push(rm);
            s.residual_std.push(rs);
        }
        series.push(s);
    }
    Comparison {
        steps,
        seeds: seeds.to_vec(),
        complete: failed.is_empty(),
        series,
        failed,
    }
}

pub fn comparison_csv(c: &Comparison) -> String {
    let mut out = String::from("series,policy,step,coverage_mean,coverage_std,residual_mean,residual_std\n");
    for (k, s) in c.series.iter().enumerate() {
        for t in 0..c.steps {
            out.push_str(&format!(
                "{k},{},{},{},{},{},{}\n",
                s.policy,
                t + 1,
                s.coverage_mean[t],
                s.coverage_std[t],
                s.residual_mean[t],
                s.residual_std[t]
            ));
        }
    }
    out
}

pub fn cmd_compare(config: &EpisodeConfig, seeds: &[u64], policies: &[Policy], out: &Path) -> Result<(), CliError> {
    if policies.len() < 2 {
        return Err(CliError::Usage("compare needs at least two policies".into()));
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("compare needs at least one seed".into()));
    }
    ensure_dir(out)?;
    let names = policies.iter().map(|p| p.name().to_string()).collect();
    RunManifest::new("compare", config, seeds.to_vec(), names, out).write(out)?;
    let c = compare(config, seeds, policies);
    write_atomic(&out.join("comparison.csv"), comparison_csv(&c).as_bytes())?;
    write_json(&out.join("comparison.json"), &c)?;
    if c.complete {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{} episode(s) failed; see comparison.json", c.failed.len())))
    }
}

#[derive(Serialize)]
struct SweepPoint {
    value: serde_json::Value,
    mean_final_coverage: f64,
    final_coverage: Vec<(u64, f64)>,
    failed: Vec<Failure>,
}

/// Runs one policy over several values of a single top-level config key.
pub fn cmd_sweep(
    file: &ConfigFile,
    param: &str,
    values: &[serde_json::Value],
    seeds: &[u64],
    policy: Policy,
    out: &Path,
) -> Result<(), CliError> {
    if values.is_empty() || seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value and one seed".into()));
    }
    let base = serde_json::to_value(file).map_err(runtime)?;
    let mut configs = Vec::new();
    for v in values {
        let mut patched = base.clone();
        let obj = patched.as_object_mut().expect("config is an object");
        if !obj.contains_key(param) || param == "regime" || param == "version" {
            return Err(CliError::Usage(format!("cannot sweep over '{param}'")));
        }
        obj.insert(param.to_string(), v.clone());
        let f: ConfigFile =
            serde_json::from_value(patched).map_err(|e| CliError::Config(format!("{param} = {v}: {e}")))?;
        configs.push(f.resolve()?);
    }
    ensure_dir(out)?;
    RunManifest::new("sweep", &file.resolve()?, seeds.to_vec(), vec![policy.name().into()], out).write(out)?;
    let mut points = Vec::new();
    let mut csv = String::from("value,seed,final_coverage\n");
    for (v, config) in values.iter().zip(&configs) {
        let c = compare(config, seeds, &[policy]);
        let s = &c.series[0];
        for (seed, cov) in &s.final_coverage {
            csv.push_str(&format!("{v},{seed},{cov}\n"));
        }
        points.push(SweepPoint {
            value: v.clone(),
            mean_final_coverage: s.coverage_mean.last().copied().unwrap_or(0.0),
            final_coverage: s.final_coverage.clone(),
            failed: c.failed,
        });
    }
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    let failures: usize = points.iter().map(|p| p.failed.len()).sum();
    write_json(&out.join("sweep.json"), &points)?;
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} episode(s) failed; see sweep.json")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CacheReport {
    pub path: String,
    pub exists: bool,
    pub entries: usize,
    pub memory_bytes: usize,
    pub hits: u64,
    pub misses: u64,
    pub hit_rate: f64,
    pub rays_cast: u64,
}

pub fn cache_stats(path: &Path) -> Result<CacheReport, CliError> {
    let mut r = CacheReport {
        path: path.display().to_string(),
        exists: path.exists(),
        entries: 0,
        memory_bytes: 0,
        hits: 0,
        misses: 0,
        hit_rate: 1.0,
        rays_cast: 0,
    };
    if r.exists {
        let s = inspect_cache_file(path).map_err(|e| CliError::Runtime(format!("cache {}: {e}", path.display())))?;
        r.entries = s.entries;
        r.memory_bytes = s.entry_bytes;
        r.hits = s.hits;
        r.misses = s.misses;
        r.hit_rate = s.hit_rate();
        r.rays_cast = s.rays_cast;
    }
    Ok(r)
}

/// Builds every (seed, bin) mask a planner episode on this scene needs and
/// persists them, merging with an existing compatible file.
pub fn cache_prewarm(config: &EpisodeConfig, seed: u64, path: &Path) -> Result<CacheReport, CliError> {
    let scene = scene_for(config, seed)?;
    let cache = match load_cache(path, config, &scene)? {
        Some(c) => c,
        None => {
            let (occupancy, params, _) = planner_cache_inputs(config, &scene).map_err(runtime)?;
            Arc::new(MaskCache::new(Arc::new(occupancy), params).map_err(runtime)?)
        }
    };
    let (_, _, seeds) = planner_cache_inputs(config, &scene).map_err(runtime)?;
    cache.prewarm(&seeds).map_err(runtime)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    cache.save(path).map_err(runtime)?;
    cache_stats(path)
}

pub fn cache_clear(path: &Path) -> Result<bool, CliError> {
    match std::fs::remove_file(path) {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(CliError::Runtime(format!("removing {}: {e}", path.display()))),
    }
}

#[derive(Serialize)]
struct SceneSummary<'a> {
    spec: SceneSpec,
    origin: [f64; 3],
    voxel_size: f64,
    dims: [usize; 3],
    focus: [f64; 3],
    occupied_voxels: usize,
    surface_voxels: usize,
    solids: &'a [Solid],
}

pub fn cmd_scene(config: &EpisodeConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    RunManifest::new("scene", config, vec![seed], Vec::new(), out).write(out)?;
    let scene = scene_for(config, seed)?;
    let grid = *scene.grid();
    let summary = SceneSummary {
        spec: scene.spec,
        origin: grid.origin,
        voxel_size: grid.voxel_size,
        dims: grid.dims,
        focus: [scene.focus.x, scene.focus.y, scene.focus.z],
        occupied_voxels: scene.occupancy.count(),
        surface_voxels: scene.surface.iter().filter(|&&s| s).count(),
        solids: &scene.solids,
    };
    write_json(&out.join("scene.json"), &summary)?;
    let values: Vec<f64> = (0..grid.len())
        .map(|v| if scene.occupancy.is_occupied(v) { 1.0 } else { 0.0 })
        .collect();
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &grid, &values).map_err(runtime)?;
    write_atomic(&out.join("occupancy.snap"), &bytes)
}
