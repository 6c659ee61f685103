//! Set-associative caches, LLC slicing, MSHRs and the per-core hierarchy.

mod hierarchy;
mod mshr;
mod slice;

pub use hierarchy::{CacheHierarchy, FillOutcome, PrivateEviction};
pub use mshr::{MshrEntry, MshrFile, MshrOutcome};
pub use slice::{nuca_latency, slice_of, RingLayout, SliceGeometry};

use std::collections::BTreeMap;

use crate::coherence::CoherenceState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheBlock {
    /// Full block number (address >> offset bits).
    pub tag: u64,
    pub state: CoherenceState,
    pub dirty: bool,
    /// Block contents; empty where the level does not hold values.
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit { latency: u64 },
    Miss,
}

/// One set-associative array with strict LRU replacement.
#[derive(Debug, Clone)]
pub struct Cache {
    pub name: String,
    pub latency: u64,
    sets: u64,
    ways: usize,
    offset_bits: u32,
    /// Low block-number bits consumed before the set index (slice bits).
    set_shift: u32,
    lines: Vec<Option<CacheBlock>>,
    /// Per way recency rank, 0 = most recent. A permutation of 0..ways in
    /// every set.
    lru: Vec<u32>,
    way_partition: Option<BTreeMap<usize, Vec<usize>>>,
}

impl Cache {
    pub fn new(name: impl Into<String>, sets: u64, ways: usize, offset_bits: u32, latency: u64) -> Self {
        let mut lru = Vec::with_capacity(sets as usize * ways);
        for _ in 0..sets {
            lru.extend(0..ways as u32);
        }
        Cache {
            name: name.into(),
            latency,
            sets,
            ways,
            offset_bits,
            set_shift: 0,
            lines: vec![None; sets as usize * ways],
            lru,
            way_partition: None,
        }
    }

    pub fn with_set_shift(mut self, shift: u32) -> Self {
        self.set_shift = shift;
        self
    }

    pub fn with_partition(mut self, partition: Option<BTreeMap<usize, Vec<usize>>>) -> Self {
        self.way_partition = partition;
        self
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn sets(&self) -> u64 {
        self.sets
    }

    pub fn block_of(&self, address: u64) -> u64 {
        address >> self.offset_bits
    }

    pub fn set_of(&self, address: u64) -> usize {
        ((self.block_of(address) >> self.set_shift) & (self.sets - 1)) as usize
    }

    fn way_of(&self, set: usize, tag: u64) -> Option<usize> {
        let base = set * self.ways;
        (0..self.ways).find(|&w| matches!(&self.lines[base + w], Some(b) if b.tag == tag))
    }

    /// Way currently holding `address`, if any.
    pub fn find_way(&self, address: u64) -> Option<usize> {
        self.way_of(self.set_of(address), self.block_of(address))
    }

    fn touch(&mut self, set: usize, way: usize) {
        let base = set * self.ways;
        let rank = self.lru[base + way];
        for w in 0..self.ways {
            if self.lru[base + w] < rank {
                self.lru[base + w] += 1;
            }
        }
        self.lru[base + way] = 0;
    }

    /// Hit refreshes LRU; miss leaves the set untouched.
    pub fn lookup(&mut self, address: u64) -> Lookup {
        let set = self.set_of(address);
        match self.way_of(set, self.block_of(address)) {
            Some(way) => {
                self.touch(set, way);
                Lookup::Hit { latency: self.latency }
            }
            None => Lookup::Miss,
        }
    }

    pub fn probe(&self, address: u64) -> Option<&CacheBlock> {
        let set = self.set_of(address);
        self.way_of(set, self.block_of(address))
            .and_then(|w| self.lines[set * self.ways + w].as_ref())
    }

    pub fn probe_mut(&mut self, address: u64) -> Option<&mut CacheBlock> {
        let set = self.set_of(address);
        let way = self.way_of(set, self.block_of(address))?;
        self.lines[set * self.ways + way].as_mut()
    }

    pub fn contains(&self, address: u64) -> bool {
        self.probe(address).is_some()
    }

    fn allowed_ways(&self, core: Option<usize>) -> Vec<usize> {
        match (&self.way_partition, core) {
            (Some(p), Some(c)) => match p.get(&c) {
                Some(ways) => ways.clone(),
                None => (0..self.ways).collect(),
            },
            _ => (0..self.ways).collect(),
        }
    }

    /// Victim way for a fill by `core`: an empty allowed way if there is
    /// one, else the least recent allowed way.
    pub fn victim_way(&self, address: u64, core: Option<usize>) -> usize {
        let set = self.set_of(address);
        let base = set * self.ways;
        let allowed = self.allowed_ways(core);
        if let Some(&w) = allowed.iter().find(|&&w| self.lines[base + w].is_none()) {
            return w;
        }
        *allowed
            .iter()
            .max_by_key(|&&w| self.lru[base + w])
            .expect("partition sets are non-empty")
    }

    /// Installs `block` for `address` and returns the evicted block, if a
    /// valid one was displaced. A block already present is overwritten in
    /// place.
    pub fn fill(&mut self, address: u64, block: CacheBlock, core: Option<usize>) -> Option<CacheBlock> {
        debug_assert_eq!(block.tag, self.block_of(address));
        let set = self.set_of(address);
        let way = match self.way_of(set, block.tag) {
            Some(w) => w,
            None => self.victim_way(address, core),
        };
        let victim = self.lines[set * self.ways + way].replace(block);
        self.touch(set, way);
        victim.filter(|v| v.tag != self.block_of(address))
    }

    pub fn invalidate(&mut self, address: u64) -> Option<CacheBlock> {
        let set = self.set_of(address);
        let way = self.way_of(set, self.block_of(address))?;
        self.lines[set * self.ways + way].take()
    }

    pub fn lru_ranks(&self, set: usize) -> &[u32] {
        &self.lru[set * self.ways..(set + 1) * self.ways]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &CacheBlock> {
        self.lines.iter().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(cache: &Cache, addr: u64) -> CacheBlock {
        CacheBlock {
            tag: cache.block_of(addr),
            state: CoherenceState::Shared,
            dirty: false,
            data: Vec::new(),
        }
    }

    fn fill(cache: &mut Cache, addr: u64, core: Option<usize>) -> Option<CacheBlock> {
        let b = block(cache, addr);
        cache.fill(addr, b, core)
    }

    #[test]
    fn cold_miss_then_hit() {
        let mut c = Cache::new("L1", 64, 2, 6, 4);
        assert_eq!(c.lookup(0x40), Lookup::Miss);
        fill(&mut c, 0x40, None);
        assert_eq!(c.lookup(0x40), Lookup::Hit { latency: 4 });
    }

    #[test]
    fn lru_evicts_oldest() {
        // 64 sets of 64 B: stride 4096 maps to the same set
        let mut c = Cache::new("L1", 64, 2, 6, 4);
        let (a, b, x) = (0x0, 0x1000, 0x2000);
        fill(&mut c, a, None);
        fill(&mut c, b, None);
        let victim = fill(&mut c, x, None).unwrap();
        assert_eq!(victim.tag, c.block_of(a));
        assert_eq!(c.lookup(a), Lookup::Miss);
        assert!(matches!(c.lookup(b), Lookup::Hit { .. }));
    }

    #[test]
    fn hit_refreshes_recency() {
        let mut c = Cache::new("L1", 64, 2, 6, 4);
        fill(&mut c, 0x0, None);
        fill(&mut c, 0x1000, None);
        c.lookup(0x0);
        let victim = fill(&mut c, 0x2000, None).unwrap();
        assert_eq!(victim.tag, c.block_of(0x1000));
    }

    #[test]
    fn miss_leaves_lru_unchanged() {
        let mut c = Cache::new("L1", 4, 4, 6, 4);
        fill(&mut c, 0x0, None);
        let before = c.lru_ranks(0).to_vec();
        c.lookup(0x100);
        assert_eq!(c.lru_ranks(0), &before[..]);
    }

    #[test]
    fn partitioned_core_never_leaves_its_ways() {
        let mut part = BTreeMap::new();
        part.insert(0usize, vec![0usize, 1]);
        let mut c = Cache::new("LLC", 1, 4, 6, 30).with_partition(Some(part));
        // another core populates all four ways first
        for i in 0..4u64 {
            fill(&mut c, i * 64, Some(1));
        }
        let protected: Vec<u64> = (2..4).map(|w| c.lines[w].as_ref().unwrap().tag).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let addr = rng.gen_range(100..10_000u64) * 64;
            let way = c.find_way(addr).unwrap_or_else(|| c.victim_way(addr, Some(0)));
            assert!(way < 2, "victim way {way}");
            fill(&mut c, addr, Some(0));
        }
        let now: Vec<u64> = (2..4).map(|w| c.lines[w].as_ref().unwrap().tag).collect();
        assert_eq!(protected, now);
    }

    #[test]
    fn lru_ranks_stay_a_permutation() {
        let mut c = Cache::new("L1", 2, 4, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let addr = rng.gen_range(0..64u64) * 64;
            match rng.gen_range(0..3) {
                0 => {
                    fill(&mut c, addr, None);
                }
                1 => {
                    c.lookup(addr);
                }
                _ => {
                    c.invalidate(addr);
                }
            }
            for set in 0..2 {
                let mut r = c.lru_ranks(set).to_vec();
                r.sort_unstable();
                assert_eq!(r, vec![0, 1, 2, 3]);
            }
        }
    }
}
