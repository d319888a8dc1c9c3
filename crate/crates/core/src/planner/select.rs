//! Lazy greedy view selection over the fused field.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{FrustumSpec, Vec3};
use crate::semantic_field::SemanticField;
use crate::visibility::{ray_length_limit, MaskCache, OrientationBin};
use crate::voxel_field::{FusedField, GeometricField};

use super::scoring::{compute_seed_key, distance_prior, instantiate_fan, pose_key, Candidate, NmsRadii, ViewPose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Frustum decay factor.
    pub eta: f64,
    /// Distance-prior length scale in meters; `f64::INFINITY` disables it.
    pub tau: f64,
    pub nms: NmsRadii,
    /// Seeds with a position within this distance of a committed view are
    /// re-keyed before they can be trusted again. `None` derives the
    /// smallest radius that covers every voxel the decay can touch.
    pub invalidation_radius: Option<f64>,
}

/// Record of one commitment, in the line-delimited trace format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub seed: usize,
    pub voxel: usize,
    pub bin: OrientationBin,
    pub pose: ViewPose,
    /// Heap key under which the commitment was popped (prior included).
    pub key: f64,
    /// Mask score of the committed pose.
    pub score: f64,
    /// Score times distance prior; equals `key`.
    pub objective: f64,
    /// Largest key left in the queue at commitment time.
    pub next_key: Option<f64>,
    pub total_before: f64,
    pub total_after: f64,
    pub decayed_voxels: usize,
}

#[derive(Clone, Copy, Debug)]
enum EntryKind {
    Bound,
    Exact { pose: ViewPose, voxel: usize, bin: OrientationBin, score: f64 },
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    key: f64,
    candidate: usize,
    stamp: u64,
    kind: EntryKind,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    /// Max-heap order: larger key first, then lower candidate index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.candidate.cmp(&self.candidate))
    }
}

/// Greedy budgeted planner state. Candidates are ordered by seed voxel
/// index, which is also the tie-break order.
pub struct Planner {
    cache: Arc<MaskCache>,
    field: FusedField,
    frustum: FrustumSpec,
    config: PlannerConfig,
    candidates: Vec<Candidate>,
    anchor: Vec3,
    heap: BinaryHeap<Entry>,
    last_invalidated: Vec<u64>,
    /// Candidates whose whole fan was suppressed; revived when invalidated.
    parked: Vec<bool>,
    epoch: u64,
    budget: usize,
    committed: Vec<ViewPose>,
    trace: Vec<TraceRecord>,
    evaluations: u64,
}

impl Planner {
    /// Builds every mask the candidates need and keys all seeds.
    /// Candidates without a usable position are dropped.
    pub fn new(
        cache: Arc<MaskCache>,
        field: FusedField,
        mut candidates: Vec<Candidate>,
        anchor: Vec3,
        config: PlannerConfig,
        budget: usize,
    ) -> Result<Self> {
        if !(config.eta > 0.0 && config.eta < 1.0) {
            return Err(invalid("eta must lie in (0, 1)"));
        }
        if !(config.tau > 0.0) {
            return Err(invalid("tau must be positive"));
        }
        if field.grid() != cache.occupancy().grid() {
            return Err(crate::error::Error::GridMismatch);
        }
        let grid = *field.grid();
        candidates.retain(|c| !c.positions.is_empty());
        for c in &candidates {
            if c.seed >= grid.len() || c.positions.iter().any(|p| p.voxel >= grid.len()) {
                return Err(invalid("candidate voxel outside the grid"));
            }
        }
        candidates.sort_by_key(|c| c.seed);
        candidates.dedup_by_key(|c| c.seed);
        let usable: Vec<usize> = {
            let occ = cache.occupancy();
            let mut v: Vec<usize> = candidates
                .iter()
                .flat_map(|c| c.positions.iter().map(|p| p.voxel))
                .filter(|&v| !occ.is_occupied(v))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        cache.prewarm(&usable)?;
        let frustum = cache.params().frustum;
        let mut planner = Self {
            last_invalidated: vec![0; candidates.len()],
            parked: vec![false; candidates.len()],
            cache,
            field,
            frustum,
            config,
            candidates,
            anchor,
            heap: BinaryHeap::new(),
            epoch: 0,
            budget,
            committed: Vec::new(),
            trace: Vec::new(),
            evaluations: 0,
        };
        planner.rekey_all()?;
        Ok(planner)
    }

    fn rekey_all(&mut self) -> Result<()> {
        let utility = self.field.utility();
        let keys: Vec<Option<f64>> = self
            .candidates
            .par_iter()
            .map(|c| Ok(compute_seed_key(&self.cache, utility, c, &self.anchor, self.config.tau)?.map(|k| k.key)))
            .collect::<Result<_>>()?;
        self.heap.clear();
        self.parked.iter_mut().for_each(|p| *p = false);
        for (i, k) in keys.into_iter().enumerate() {
            if let Some(key) = k {
                self.heap.push(Entry {
                    key,
                    candidate: i,
                    stamp: self.epoch,
                    kind: EntryKind::Bound,
                });
            }
        }
        Ok(())
    }

    pub fn field(&self) -> &FusedField {
        &self.field
    }

    pub fn cache(&self) -> &MaskCache {
        &self.cache
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn anchor(&self) -> Vec3 {
        self.anchor
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn committed(&self) -> &[ViewPose] {
        &self.committed
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn remaining_budget(&self) -> usize {
        self.budget - self.committed.len()
    }

    /// Number of fan evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn is_suppressed(&self, pose: &ViewPose) -> bool {
        self.committed.iter().any(|c| self.config.nms.suppresses(c, pose))
    }

    /// Planner objective of a pose: mask score times the distance prior.
    pub fn objective(&self, pose: &ViewPose) -> Result<f64> {
        let (voxel, bin) = pose_key(&self.cache, pose)?;
        let score = self.cache.get_or_build(voxel, bin)?.score(self.field.utility());
        let center = self.cache.occupancy().grid().center(voxel);
        Ok(score * distance_prior(&center, &self.anchor, self.config.tau))
    }

    /// Current fan of a candidate: the orientations around its top bin.
    pub fn current_fan(&self, candidate: usize) -> Result<Vec<ViewPose>> {
        let c = &self.candidates[candidate];
        match compute_seed_key(&self.cache, self.field.utility(), c, &self.anchor, self.config.tau)? {
            Some(k) => Ok(instantiate_fan(&self.cache, c, k.bin)),
            None => Ok(Vec::new()),
        }
    }

    fn invalidation_radius(&self) -> f64 {
        self.config.invalidation_radius.unwrap_or_else(|| {
            let grid = self.field.grid();
            let reach = ray_length_limit(grid, self.frustum.max_depth, self.frustum.cos_half_angle());
            let decay_reach = self.frustum.max_depth / self.frustum.cos_half_angle();
            reach + decay_reach + self.config.nms.position + grid.voxel_size * 3f64.sqrt()
        })
    }

    /// Best non-suppressed fan pose of a candidate under the current field.
    /// Ties: objective, then voxel, then bin, then fan order.
    fn evaluate(&mut self, candidate: usize) -> Result<Option<Entry>> {
        self.evaluations += 1;
        let utility = self.field.utility();
        let c = &self.candidates[candidate];
        let Some(k) = compute_seed_key(&self.cache, utility, c, &self.anchor, self.config.tau)? else {
            return Ok(None);
        };
        let bins = self.cache.params().bins;
        let grid = *self.field.grid();
        let mut best: Option<(f64, usize, usize, ViewPose, f64)> = None;
        for pose in instantiate_fan(&self.cache, c, k.bin) {
            if self.is_suppressed(&pose) {
                continue;
            }
            let (voxel, bin) = pose_key(&self.cache, &pose)?;
            if self.cache.occupancy().is_occupied(voxel) {
                continue;
            }
            let score = self.cache.get_or_build(voxel, bin)?.score(utility);
            let objective = score * distance_prior(&grid.center(voxel), &self.anchor, self.config.tau);
            let better = match &best {
                None => true,
                Some((o, v, b, _, _)) => {
                    objective > *o || (objective == *o && (voxel, bins.index(bin)) < (*v, *b))
                }
            };
            if better {
                best = Some((objective, voxel, bins.index(bin), pose, score));
            }
        }
        Ok(best.map(|(objective, voxel, bin, pose, score)| Entry {
            key: objective,
            candidate,
            stamp: self.epoch,
            kind: EntryKind::Exact {
                pose,
                voxel,
                bin: bins.from_index(bin),
                score,
            },
        }))
    }

    fn push_bound(&mut self, candidate: usize) -> Result<()> {
        let c = &self.candidates[candidate];
        if let Some(k) = compute_seed_key(&self.cache, self.field.utility(), c, &self.anchor, self.config.tau)? {
            self.heap.push(Entry {
                key: k.key,
                candidate,
                stamp: self.epoch,
                kind: EntryKind::Bound,
            });
        }
        Ok(())
    }

    fn evaluate_or_park(&mut self, candidate: usize) -> Result<()> {
        match self.evaluate(candidate)? {
            Some(e) => self.heap.push(e),
            None => self.parked[candidate] = true,
        }
        Ok(())
    }

    /// Commits the next view, or `None` when no candidate remains.
    pub fn step(&mut self) -> Result<Option<ViewPose>> {
        if self.remaining_budget() == 0 {
            return Ok(None);
        }
        while let Some(entry) = self.heap.pop() {
            let c = entry.candidate;
            let stale = entry.stamp < self.last_invalidated[c];
            match entry.kind {
                _ if stale => self.push_bound(c)?,
                EntryKind::Bound => self.evaluate_or_park(c)?,
                EntryKind::Exact { pose, voxel, bin, score } => {
                    if self.is_suppressed(&pose) {
                        self.evaluate_or_park(c)?;
                        continue;
                    }
                    self.commit(entry, c, pose, voxel, bin, score)?;
                    return Ok(Some(pose));
                }
            }
        }
        Ok(None)
    }

    fn commit(
        &mut self,
        entry: Entry,
        candidate: usize,
        pose: ViewPose,
        voxel: usize,
        bin: OrientationBin,
        score: f64,
    ) -> Result<()> {
        let next_key = self.heap.peek().map(|e| e.key);
        let total_before = self.field.total();
        let decayed_voxels = self.field.apply_decay(&pose.pose(), &self.frustum, self.config.eta)?;
        let total_after = self.field.total();
        self.committed.push(pose);
        self.epoch += 1;
        if self.config.tau.is_finite() {
            // the prior follows the camera, so any key may rise: old keys
            // are no longer upper bounds
            self.anchor = pose.position();
            self.last_invalidated.iter_mut().for_each(|s| *s = self.epoch);
            self.rekey_all()?;
        } else {
            let radius = self.invalidation_radius();
            let grid = *self.field.grid();
            let at = pose.position();
            for i in 0..self.candidates.len() {
                let near = self.candidates[i]
                    .positions
                    .iter()
                    .any(|p| (grid.center(p.voxel) - at).norm() <= radius);
                if !near {
                    continue;
                }
                self.last_invalidated[i] = self.epoch;
                if std::mem::take(&mut self.parked[i]) || i == candidate {
                    // the rest of the committed fan stays eligible, and a
                    // parked top bin may have moved off its suppressed fan
                    self.push_bound(i)?;
                }
            }
        }
        self.trace.push(TraceRecord {
            step: self.committed.len(),
            seed: self.candidates[candidate].seed,
            voxel,
            bin,
            pose,
            key: entry.key,
            score,
            objective: entry.key,
            next_key,
            total_before,
            total_after,
            decayed_voxels,
        });
        Ok(())
    }

    /// Commits up to `n` views in order. Fewer come back only when the
    /// candidates run out.
    pub fn select_next_views(&mut self, n: usize) -> Result<Vec<ViewPose>> {
        if n > self.remaining_budget() {
            return Err(invalid(format!(
                "requested {n} views with {} left in the budget",
                self.remaining_budget()
            )));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            match self.step()? {
                Some(p) => out.push(p),
                None => break,
            }
        }
        Ok(out)
    }

    /// Recombines updated source fields (keeping accumulated decay) and
    /// re-keys every seed, since utility may have grown.
    pub fn refresh(&mut self, geo: &GeometricField, sem: &SemanticField) -> Result<()> {
        self.field.refresh(geo, sem)?;
        self.epoch += 1;
        self.last_invalidated.iter_mut().for_each(|s| *s = self.epoch);
        self.rekey_all()
    }

    /// Trace as line-delimited JSON.
    pub fn trace_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.trace {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}
