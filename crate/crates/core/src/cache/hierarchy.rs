use crate::coherence::CoherenceState;
use crate::config::{InclusionPolicy, Interconnect, SystemConfig};

use super::{nuca_latency, slice_of, Cache, CacheBlock, MshrFile, RingLayout, SliceGeometry};

/// A block leaving a core's private hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateEviction {
    pub core: usize,
    pub address: u64,
    pub state: CoherenceState,
    pub dirty: bool,
    pub data: Vec<u8>,
}

/// Result of installing a block in the LLC.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FillOutcome {
    /// Block address displaced from the LLC.
    pub victim: Option<u64>,
    /// Dirty victim data bound for memory.
    pub writeback: Option<(u64, Vec<u8>)>,
    /// Cores whose private copies of the victim were invalidated.
    pub back_invalidations: Vec<usize>,
}

/// Private levels per core (upper levels are subsets of the last private
/// level) plus the sliced shared LLC.
///
/// Coherence state and block data for a core live in its last private
/// level; upper levels only hold tags.
#[derive(Debug, Clone)]
pub struct CacheHierarchy {
    private: Vec<Vec<Cache>>,
    slices: Vec<Cache>,
    mshrs: Vec<MshrFile>,
    pub inclusion: InclusionPolicy,
    pub geometry: SliceGeometry,
    pub llc_latency: u64,
    interconnect: Interconnect,
    ring: RingLayout,
    block_size: u64,
}

impl CacheHierarchy {
    pub fn new(cfg: &SystemConfig) -> Self {
        let offset_bits = cfg.derived.offset_bits;
        let private = (0..cfg.core_count)
            .map(|_| {
                cfg.private_levels()
                    .iter()
                    .map(|l| {
                        Cache::new(
                            l.name.clone(),
                            l.sets(),
                            l.associativity as usize,
                            offset_bits,
                            l.latency_cycles,
                        )
                    })
                    .collect()
            })
            .collect();
        let llc = cfg.llc();
        let slice_count = llc.slice_count as usize;
        let slice_bits = llc.slice_count.trailing_zeros();
        let slices = (0..slice_count)
            .map(|s| {
                Cache::new(
                    format!("{}.{s}", llc.name),
                    llc.sets() / llc.slice_count,
                    llc.associativity as usize,
                    offset_bits,
                    llc.latency_cycles,
                )
                .with_set_shift(slice_bits)
                .with_partition(llc.way_partition.clone())
            })
            .collect();
        let hop = match cfg.interconnect {
            Interconnect::Ring { hop_latency } => hop_latency,
            Interconnect::Bus { .. } => 0,
        };
        CacheHierarchy {
            private,
            slices,
            mshrs: (0..slice_count).map(|_| MshrFile::new(llc.mshr_per_slice)).collect(),
            inclusion: llc.inclusion,
            geometry: SliceGeometry {
                offset_bits,
                slice_bits,
                decoder: llc.slice_decoder,
            },
            llc_latency: llc.latency_cycles,
            interconnect: cfg.interconnect,
            ring: RingLayout::tiled(cfg.core_count, slice_count, hop),
            block_size: cfg.block_size(),
        }
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    pub fn block_address(&self, address: u64) -> u64 {
        address & !(self.block_size - 1)
    }

    pub fn cores(&self) -> usize {
        self.private.len()
    }

    pub fn private_level_count(&self) -> usize {
        self.private.first().map_or(0, Vec::len)
    }

    pub fn private_level(&self, core: usize, level: usize) -> &Cache {
        &self.private[core][level]
    }

    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }

    pub fn slice(&self, slice: usize) -> &Cache {
        &self.slices[slice]
    }

    pub fn slice_for(&self, address: u64) -> usize {
        slice_of(address, &self.geometry)
    }

    pub fn llc_latency_from(&self, core: usize, address: u64) -> u64 {
        nuca_latency(
            core,
            self.slice_for(address),
            self.llc_latency,
            &self.interconnect,
            &self.ring,
        )
    }

    pub fn mshr(&mut self, slice: usize) -> &mut MshrFile {
        &mut self.mshrs[slice]
    }

    pub fn mshr_ref(&self, slice: usize) -> &MshrFile {
        &self.mshrs[slice]
    }

    // ---- private side ----

    /// Walks the private levels. Returns the index of the first level that
    /// hits (refreshing LRU and installing tags in the levels above) and
    /// the latency spent, or `None` with the latency of missing everywhere.
    pub fn private_lookup(&mut self, core: usize, address: u64) -> (Option<usize>, u64) {
        let levels = &mut self.private[core];
        let mut latency = 0;
        for idx in 0..levels.len() {
            latency += levels[idx].latency;
            if matches!(levels[idx].lookup(address), super::Lookup::Hit { .. }) {
                let state = levels[idx].probe(address).map(|b| b.state);
                for upper in levels[..idx].iter_mut() {
                    let tag = upper.block_of(address);
                    upper.fill(
                        address,
                        CacheBlock {
                            tag,
                            state: state.unwrap_or(CoherenceState::Shared),
                            dirty: false,
                            data: Vec::new(),
                        },
                        Some(core),
                    );
                }
                return (Some(idx), latency);
            }
        }
        (None, latency)
    }

    pub fn private_state(&self, core: usize, address: u64) -> CoherenceState {
        self.private[core]
            .last()
            .and_then(|c| c.probe(address))
            .map_or(CoherenceState::Invalid, |b| b.state)
    }

    pub fn private_dirty(&self, core: usize, address: u64) -> bool {
        self.private[core]
            .last()
            .and_then(|c| c.probe(address))
            .is_some_and(|b| b.dirty)
    }

    /// Updates state (and dirtiness) on every private level holding the
    /// block. Setting `Invalid` removes it.
    pub fn set_private_state(&mut self, core: usize, address: u64, state: CoherenceState) {
        if state == CoherenceState::Invalid {
            self.invalidate_private(core, address);
            return;
        }
        for level in self.private[core].iter_mut() {
            if let Some(b) = level.probe_mut(address) {
                b.state = state;
                if state != CoherenceState::Modified {
                    b.dirty = false;
                }
            }
        }
    }

    pub fn mark_dirty(&mut self, core: usize, address: u64) {
        if let Some(b) = self.private[core].last_mut().and_then(|c| c.probe_mut(address)) {
            debug_assert_eq!(b.state, CoherenceState::Modified);
            b.dirty = true;
        }
    }

    pub fn private_data(&self, core: usize, address: u64) -> Option<&[u8]> {
        self.private[core]
            .last()
            .and_then(|c| c.probe(address))
            .map(|b| b.data.as_slice())
    }

    pub fn private_data_mut(&mut self, core: usize, address: u64) -> Option<&mut Vec<u8>> {
        self.private[core]
            .last_mut()
            .and_then(|c| c.probe_mut(address))
            .map(|b| &mut b.data)
    }

    /// Installs a block in all private levels of `core`. Blocks displaced
    /// from the last private level are removed from the levels above and
    /// returned.
    pub fn fill_private(
        &mut self,
        core: usize,
        address: u64,
        state: CoherenceState,
        data: Vec<u8>,
    ) -> Vec<PrivateEviction> {
        let mut evicted = Vec::new();
        let levels = &mut self.private[core];
        let Some((last, upper)) = levels.split_last_mut() else {
            return evicted;
        };
        let tag = last.block_of(address);
        let victim = last.fill(
            address,
            CacheBlock {
                tag,
                state,
                dirty: false,
                data,
            },
            Some(core),
        );
        if let Some(v) = victim {
            let vaddr = v.tag << self.geometry.offset_bits;
            for u in upper.iter_mut() {
                u.invalidate(vaddr);
            }
            evicted.push(PrivateEviction {
                core,
                address: vaddr,
                state: v.state,
                dirty: v.dirty,
                data: v.data,
            });
        }
        for u in upper.iter_mut() {
            // upper-level victims stay in the last level
            u.fill(
                address,
                CacheBlock {
                    tag,
                    state,
                    dirty: false,
                    data: Vec::new(),
                },
                Some(core),
            );
        }
        evicted
    }

    pub fn invalidate_private(&mut self, core: usize, address: u64) -> Option<PrivateEviction> {
        let levels = &mut self.private[core];
        let (last, upper) = levels.split_last_mut()?;
        for u in upper.iter_mut() {
            u.invalidate(address);
        }
        last.invalidate(address).map(|b| PrivateEviction {
            core,
            address: self.block_address_of(address),
            state: b.state,
            dirty: b.dirty,
            data: b.data,
        })
    }

    fn block_address_of(&self, address: u64) -> u64 {
        address & !(self.block_size - 1)
    }

    /// Cores with a private copy of the block.
    pub fn holders(&self, address: u64) -> Vec<usize> {
        (0..self.private.len())
            .filter(|&c| self.private_state(c, address) != CoherenceState::Invalid)
            .collect()
    }

    pub fn private_blocks(&self, core: usize, level: usize) -> impl Iterator<Item = u64> + '_ {
        let shift = self.geometry.offset_bits;
        self.private[core][level].blocks().map(move |b| b.tag << shift)
    }

    // ---- shared side ----

    pub fn llc_contains(&self, address: u64) -> bool {
        self.slices[self.slice_for(address)].contains(address)
    }

    pub fn llc_lookup(&mut self, address: u64) -> bool {
        let s = self.slice_for(address);
        matches!(self.slices[s].lookup(address), super::Lookup::Hit { .. })
    }

    pub fn llc_data(&self, address: u64) -> Option<&[u8]> {
        self.slices[self.slice_for(address)]
            .probe(address)
            .map(|b| b.data.as_slice())
    }

    /// Overwrites LLC contents for a block already present.
    pub fn llc_write(&mut self, address: u64, data: &[u8]) -> bool {
        let s = self.slice_for(address);
        match self.slices[s].probe_mut(address) {
            Some(b) => {
                b.data.copy_from_slice(data);
                b.dirty = true;
                b.state = CoherenceState::Modified;
                true
            }
            None => false,
        }
    }

    /// Installs a block in its LLC slice, choosing the victim among the
    /// requesting core's allowed ways. An inclusive LLC also removes the
    /// victim from every private hierarchy; modified private data is folded
    /// into the writeback.
    pub fn fill_and_evict(&mut self, address: u64, core: Option<usize>, data: Vec<u8>, dirty: bool) -> FillOutcome {
        let s = self.slice_for(address);
        let slice = &mut self.slices[s];
        let tag = slice.block_of(address);
        let victim = slice.fill(
            address,
            CacheBlock {
                tag,
                state: if dirty {
                    CoherenceState::Modified
                } else {
                    CoherenceState::Shared
                },
                dirty,
                data,
            },
            core,
        );
        let Some(victim) = victim else {
            return FillOutcome::default();
        };
        let vaddr = victim.tag << self.geometry.offset_bits;
        let mut out = FillOutcome {
            victim: Some(vaddr),
            ..FillOutcome::default()
        };
        let mut data = victim.data;
        let mut dirty = victim.dirty;
        if self.inclusion == InclusionPolicy::Inclusive {
            for c in 0..self.private.len() {
                if let Some(ev) = self.invalidate_private(c, vaddr) {
                    if ev.dirty {
                        data = ev.data;
                        dirty = true;
                    }
                    out.back_invalidations.push(c);
                }
            }
        }
        if dirty {
            out.writeback = Some((vaddr, data));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, CacheConfig};

    fn small(inclusion: InclusionPolicy) -> CacheHierarchy {
        let mut cfg = SystemConfig::with_cores(2);
        cfg.cache_levels = vec![
            CacheConfig::private("L1D", 1024, 2, 4),
            CacheConfig::private("L2", 4096, 4, 12),
            CacheConfig::shared_llc(8192, 2, 30, 2),
        ];
        cfg.cache_levels[2].inclusion = inclusion;
        CacheHierarchy::new(&validate_config(cfg).unwrap())
    }

    /// Fills the two LLC ways of set 0 in slice 0 with blocks the given
    /// core holds privately, then forces an eviction.
    fn evict_block_held_by_core1(h: &mut CacheHierarchy) -> FillOutcome {
        // slice 0 has 32 sets; with one slice bit the set stride is 64*2*32
        let stride = 64 * 2 * 32;
        let a = 0;
        h.fill_and_evict(a, Some(1), vec![0; 64], false);
        h.fill_private(1, a, CoherenceState::Shared, vec![0; 64]);
        h.fill_and_evict(stride, Some(0), vec![0; 64], false);
        h.fill_and_evict(2 * stride, Some(0), vec![0; 64], false)
    }

    #[test]
    fn inclusive_eviction_back_invalidates_holder() {
        let mut h = small(InclusionPolicy::Inclusive);
        let out = evict_block_held_by_core1(&mut h);
        assert_eq!(out.victim, Some(0));
        assert_eq!(out.back_invalidations, vec![1]);
        assert_eq!(h.private_state(1, 0), CoherenceState::Invalid);
        assert!(!h.private_level(1, 0).contains(0));
    }

    #[test]
    fn non_inclusive_eviction_spares_private_copy() {
        let mut h = small(InclusionPolicy::NonInclusive);
        let out = evict_block_held_by_core1(&mut h);
        assert_eq!(out.victim, Some(0));
        assert!(out.back_invalidations.is_empty());
        assert_eq!(h.private_state(1, 0), CoherenceState::Shared);
    }

    #[test]
    fn modified_private_data_rides_the_writeback() {
        let mut h = small(InclusionPolicy::Inclusive);
        let stride = 64 * 2 * 32;
        h.fill_and_evict(0, Some(1), vec![0; 64], false);
        h.fill_private(1, 0, CoherenceState::Modified, vec![7; 64]);
        h.mark_dirty(1, 0);
        h.fill_and_evict(stride, Some(0), vec![0; 64], false);
        let out = h.fill_and_evict(2 * stride, Some(0), vec![0; 64], false);
        assert_eq!(out.writeback, Some((0, vec![7; 64])));
    }

    #[test]
    fn private_levels_stay_nested() {
        let mut h = small(InclusionPolicy::Inclusive);
        for i in 0..200u64 {
            let addr = i * 64 * 3;
            if h.private_lookup(0, addr).0.is_none() {
                h.fill_private(0, addr, CoherenceState::Shared, vec![0; 64]);
            }
            let l2: Vec<u64> = h.private_blocks(0, 1).collect();
            for b in h.private_blocks(0, 0) {
                assert!(l2.contains(&b));
            }
        }
    }

    #[test]
    fn l2_hit_refills_l1() {
        let mut h = small(InclusionPolicy::Inclusive);
        h.fill_private(0, 0x40, CoherenceState::Shared, vec![0; 64]);
        assert_eq!(h.private_lookup(0, 0x40), (Some(0), 4));
        h.private[0][0].invalidate(0x40);
        assert_eq!(h.private_lookup(0, 0x40), (Some(1), 16));
        assert_eq!(h.private_lookup(0, 0x40), (Some(0), 4));
        assert_eq!(h.private_lookup(0, 0x4000), (None, 16));
    }
}
