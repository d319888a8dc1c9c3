//! Shared (seed, bin) mask cache with optional on-disk persistence.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::voxel_field::Occupancy;

use super::bins::OrientationBin;
use super::mask::{mc_visibility_with, Scratch, VisibilityMask, VisibilityParams};

const MAGIC: &[u8; 8] = b"NBVMASKS";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub memory_bytes: usize,
    pub hits: u64,
    pub misses: u64,
    pub rays_cast: u64,
}

impl CacheStats {
    /// Fraction of lookups served from the cache; 1 when nothing was looked up.
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            1.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

/// Masks keyed by `(seed, dense bin index)` over one fixed occupancy.
/// Concurrent callers always observe a single canonical mask per key.
pub struct MaskCache {
    occupancy: Arc<Occupancy>,
    fingerprint: u64,
    params: VisibilityParams,
    map: RwLock<HashMap<(usize, usize), Arc<VisibilityMask>>>,
    hits: AtomicU64,
    misses: AtomicU64,
    rays: AtomicU64,
}

impl std::fmt::Debug for MaskCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaskCache")
            .field("fingerprint", &self.fingerprint)
            .field("params", &self.params)
            .field("stats", &self.stats())
            .finish()
    }
}

impl MaskCache {
    pub fn new(occupancy: Arc<Occupancy>, params: VisibilityParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            fingerprint: occupancy.fingerprint(),
            occupancy,
            params,
            map: RwLock::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            rays: AtomicU64::new(0),
        })
    }

    pub fn occupancy(&self) -> &Occupancy {
        &self.occupancy
    }

    pub fn params(&self) -> &VisibilityParams {
        &self.params
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, seed: usize, bin: OrientationBin) -> bool {
        self.map.read().contains_key(&(seed, self.params.bins.index(bin)))
    }

    pub fn stats(&self) -> CacheStats {
        let map = self.map.read();
        CacheStats {
            entries: map.len(),
            memory_bytes: map.values().map(|m| m.heap_bytes() + std::mem::size_of::<VisibilityMask>()).sum(),
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            rays_cast: self.rays.load(Ordering::Relaxed),
        }
    }

    pub fn rays_cast(&self) -> u64 {
        self.rays.load(Ordering::Relaxed)
    }

    fn build(&self, seed: usize, bin: OrientationBin, scratch: &mut Scratch) -> Result<Arc<VisibilityMask>> {
        let mask = mc_visibility_with(&self.occupancy, seed, bin, &self.params, scratch)?;
        self.rays.fetch_add(self.params.r_pre as u64, Ordering::Relaxed);
        let key = (seed, self.params.bins.index(bin));
        Ok(self.map.write().entry(key).or_insert_with(|| Arc::new(mask)).clone())
    }

    /// Cached mask, or a freshly built one that becomes the canonical entry.
    pub fn get_or_build(&self, seed: usize, bin: OrientationBin) -> Result<Arc<VisibilityMask>> {
        let key = (seed, self.params.bins.index(bin));
        if let Some(m) = self.map.read().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(m.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let mut scratch = Scratch::new(self.occupancy.grid().len());
        self.build(seed, bin, &mut scratch)
    }

    /// Builds every missing (seed, bin) mask in parallel without touching
    /// the hit/miss counters. Returns the number of masks built.
    pub fn prewarm(&self, seeds: &[usize]) -> Result<usize> {
        let bins = self.params.bins;
        let missing: Vec<(usize, OrientationBin)> = {
            let map = self.map.read();
            seeds
                .iter()
                .flat_map(|&s| bins.all().map(move |b| (s, b)))
                .filter(|&(s, b)| !map.contains_key(&(s, bins.index(b))))
                .collect()
        };
        let n = self.occupancy.grid().len();
        missing
            .par_iter()
            .map_init(|| Scratch::new(n), |scratch, &(s, b)| self.build(s, b, scratch).map(|_| ()))
            .collect::<Result<Vec<()>>>()?;
        Ok(missing.len())
    }

    fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let params = serde_json::to_vec(&self.params)?;
        out.extend_from_slice(&(params.len() as u32).to_le_bytes());
        out.extend_from_slice(&params);
        out.extend_from_slice(&self.fingerprint.to_le_bytes());
        let stats = self.stats();
        for c in [stats.hits, stats.misses, stats.rays_cast] {
            out.extend_from_slice(&c.to_le_bytes());
        }
        let map = self.map.read();
        let mut keys: Vec<_> = map.keys().copied().collect();
        keys.sort_unstable();
        out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
        for key in &keys {
            out.extend_from_slice(&(key.0 as u64).to_le_bytes());
            out.extend_from_slice(&(key.1 as u32).to_le_bytes());
            out.extend_from_slice(&(map[key].len() as u32).to_le_bytes());
        }
        for key in &keys {
            let m = &map[key];
            for v in &m.voxels {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for c in &m.counts {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.encode()?)?;
        Ok(())
    }

    /// Writes atomically through a sibling temporary file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a persisted cache. The file must match `params` and the
    /// occupancy fingerprint; anything else is a format error.
    pub fn read_from<R: Read>(mut input: R, occupancy: Arc<Occupancy>, params: VisibilityParams) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let cache = Self::new(occupancy, params)?;
        let decoded = decode(&bytes)?;
        if decoded.params != params {
            return Err(Error::Format("cache parameters differ from the requested ones".into()));
        }
        if decoded.fingerprint != cache.fingerprint {
            return Err(Error::Format("cache was built for a different occupancy".into()));
        }
        let grid_len = cache.occupancy.grid().len();
        let bin_count = params.bins.count();
        {
            let mut map = cache.map.write();
            for ((seed, bin), voxels, counts) in decoded.masks {
                if seed >= grid_len
                    || bin >= bin_count
                    || voxels.iter().any(|&v| v as usize >= grid_len)
                    || voxels.windows(2).any(|w| w[0] >= w[1])
                    || counts.iter().any(|&c| c == 0 || c as u32 > params.r_pre)
                {
                    return Err(Error::Format("mask entry out of range".into()));
                }
                let mask = VisibilityMask {
                    seed,
                    bin: params.bins.from_index(bin),
                    r_pre: params.r_pre,
                    voxels,
                    counts,
                };
                map.insert((seed, bin), Arc::new(mask));
            }
        }
        cache.hits.store(decoded.counters[0], Ordering::Relaxed);
        cache.misses.store(decoded.counters[1], Ordering::Relaxed);
        cache.rays.store(decoded.counters[2], Ordering::Relaxed);
        Ok(cache)
    }

    pub fn load(path: &Path, occupancy: Arc<Occupancy>, params: VisibilityParams) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), occupancy, params)
    }
}

type RawMask = ((usize, usize), Vec<u32>, Vec<u16>);

struct Decoded {
    params: VisibilityParams,
    fingerprint: u64,
    counters: [u64; 3],
    masks: Vec<RawMask>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("cache file truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Header-only view of a persisted cache, for reporting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CacheFileSummary {
    pub params: VisibilityParams,
    pub fingerprint: u64,
    pub entries: usize,
    pub entry_bytes: usize,
    pub hits: u64,
    pub misses: u64,
    pub rays_cast: u64,
}

impl CacheFileSummary {
    pub fn hit_rate(&self) -> f64 {
        CacheStats {
            hits: self.hits,
            misses: self.misses,
            ..Default::default()
        }
        .hit_rate()
    }
}

/// Validates a persisted cache file and summarizes it without needing the
/// occupancy it was built for.
pub fn inspect_cache_file(path: &Path) -> Result<CacheFileSummary> {
    let bytes = std::fs::read(path)?;
    let d = decode(&bytes)?;
    Ok(CacheFileSummary {
        params: d.params,
        fingerprint: d.fingerprint,
        entries: d.masks.len(),
        entry_bytes: d.masks.iter().map(|(_, v, c)| v.len() * 4 + c.len() * 2).sum(),
        hits: d.counters[0],
        misses: d.counters[1],
        rays_cast: d.counters[2],
    })
}

fn decode(bytes: &[u8]) -> Result<Decoded> {
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(Error::Format("cache file too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("not a mask cache file".into()));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Format("cache checksum mismatch".into()));
    }
    let mut c = Cursor { bytes: body, pos: 8 };
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let plen = c.u32()? as usize;
    let params: VisibilityParams =
        serde_json::from_slice(c.take(plen)?).map_err(|e| Error::Format(format!("cache parameters: {e}")))?;
    let fingerprint = c.u64()?;
    let counters = [c.u64()?, c.u64()?, c.u64()?];
    let n = c.u64()? as usize;
    if n > body.len() / 16 {
        return Err(Error::Format("implausible entry count".into()));
    }
    let mut table = Vec::with_capacity(n);
    for _ in 0..n {
        let seed = c.u64()? as usize;
        let bin = c.u32()? as usize;
        let len = c.u32()? as usize;
        table.push(((seed, bin), len));
    }
    let mut masks = Vec::with_capacity(n);
    for (key, len) in table {
        let voxels = (0..len).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        let counts = (0..len).map(|_| c.u16()).collect::<Result<Vec<_>>>()?;
        masks.push((key, voxels, counts));
    }
    if c.pos != body.len() {
        return Err(Error::Format("trailing bytes in cache file".into()));
    }
    Ok(Decoded {
        params,
        fingerprint,
        counters,
        masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrustumSpec;
    use crate::visibility::BinSpec;
    use crate::voxel_field::VoxelGrid;

    fn cache() -> MaskCache {
        let g = VoxelGrid::new([0.0; 3], 0.1, [8, 8, 8]).unwrap();
        let mut occ = Occupancy::empty(g);
        occ.set(g.index([6, 4, 4]), true);
        let params = VisibilityParams {
            frustum: FrustumSpec::new(60.0, 0.05, 0.6).unwrap(),
            bins: BinSpec::new(4, 1, -30.0, 30.0).unwrap(),
            r_pre: 64,
            rng_seed: 3,
        };
        MaskCache::new(Arc::new(occ), params).unwrap()
    }

    #[test]
    fn second_lookup_is_a_hit() {
        let c = cache();
        let bin = c.params().bins.from_index(1);
        let a = c.get_or_build(10, bin).unwrap();
        let rays = c.rays_cast();
        let b = c.get_or_build(10, bin).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(c.rays_cast(), rays);
        let s = c.stats();
        assert_eq!((s.hits, s.misses, s.entries), (1, 1, 1));
    }

    #[test]
    fn prewarm_then_lookups_cast_nothing() {
        let c = cache();
        let seeds = [0, 9, 27];
        assert_eq!(c.prewarm(&seeds).unwrap(), 12);
        assert_eq!(c.prewarm(&seeds).unwrap(), 0);
        let rays = c.rays_cast();
        for &s in &seeds {
            for b in c.params().bins.all() {
                c.get_or_build(s, b).unwrap();
            }
        }
        assert_eq!(c.rays_cast(), rays);
        assert_eq!(c.stats().hit_rate(), 1.0);
    }

    #[test]
    fn persistence_round_trip_and_corruption() {
        let c = cache();
        c.prewarm(&[0, 9, 27]).unwrap();
        let mut bytes = Vec::new();
        c.write_to(&mut bytes).unwrap();
        let occ = c.occupancy.clone();
        let back = MaskCache::read_from(&bytes[..], occ.clone(), *c.params()).unwrap();
        assert_eq!(back.len(), c.len());
        for b in c.params().bins.all() {
            assert_eq!(*back.get_or_build(9, b).unwrap(), *c.get_or_build(9, b).unwrap());
        }
        let mut bad = bytes.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 1;
        assert!(matches!(MaskCache::read_from(&bad[..], occ.clone(), *c.params()), Err(Error::Format(_))));
        assert!(matches!(
            MaskCache::read_from(&bytes[..bytes.len() - 5], occ.clone(), *c.params()),
            Err(Error::Format(_))
        ));
        let mut other = *c.params();
        other.r_pre = 65;
        assert!(matches!(MaskCache::read_from(&bytes[..], occ, other), Err(Error::Format(_))));
        let mut occ2 = (*c.occupancy).clone();
        occ2.set(0, false);
        occ2.set(1, true);
        assert!(matches!(
            MaskCache::read_from(&bytes[..], Arc::new(occ2), *c.params()),
            Err(Error::Format(_))
        ));
    }
}
