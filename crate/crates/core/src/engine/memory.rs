use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheHierarchy, PrivateEviction};
use crate::coherence::{
    core_request, evict, swmr_holds, Access, CoherenceMessage, CoherenceState, DataSource, DirectoryEntry,
};
use crate::config::{CoherenceConfig, SystemConfig, Transport};
use crate::core_model::{size_mask, MemAccess};
use crate::dram::{Completion, DramController, DramError, RequestKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub hits: u64,
    pub misses: u64,
    /// Misses that allocated a line.
    pub fills: u64,
}

impl LevelCounts {
    pub fn accesses(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn add(&mut self, other: &LevelCounts) {
        self.hits += other.hits;
        self.misses += other.misses;
        self.fills += other.fills;
    }
}

/// Counters charged to the thread that caused them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccessCounters {
    /// Private levels in order, then the LLC.
    pub levels: Vec<LevelCounts>,
    pub messages: u64,
}

impl AccessCounters {
    pub fn new(levels: usize) -> Self {
        AccessCounters {
            levels: vec![LevelCounts::default(); levels],
            messages: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryCounters {
    pub messages_by_kind: BTreeMap<String, u64>,
    pub messages: u64,
    /// Private copies removed by coherence invalidations.
    pub invalidations: u64,
    pub back_invalidations: u64,
    pub mshr_merges: u64,
    pub mshr_stalls: u64,
    pub memory_writebacks: u64,
    pub swmr_violations: u64,
    pub value_mismatches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessResult {
    Done {
        at: u64,
        value: Option<u64>,
    },
    /// Waiting for memory request `id`; `at` is known once it is scheduled.
    WaitDram {
        id: u64,
        value: Option<u64>,
    },
    /// MSHRs full; nothing changed.
    Retry,
}

/// Caches, coherence, DRAM and the flat value oracle behind all cores.
pub struct MemorySystem {
    coherence: CoherenceConfig,
    cores: usize,
    pub hier: CacheHierarchy,
    pub dram: DramController,
    directory: HashMap<u64, DirectoryEntry>,
    backing: HashMap<u64, Vec<u8>>,
    bus_free: u64,
    oracle: Option<HashMap<u64, u8>>,
    /// Outstanding fills: memory request id to (slice, block).
    fills: BTreeMap<u64, (usize, u64)>,
    /// Completion cycle of scheduled fills still holding an MSHR.
    fill_finish: BTreeMap<u64, u64>,
    message_log: Option<String>,
    pub counters: MemoryCounters,
    private_levels: usize,
}

fn read_value(data: &[u8], offset: usize, size: u64) -> u64 {
    let mut v = 0u64;
    for i in 0..size as usize {
        v |= (data[offset + i] as u64) << (8 * i);
    }
    v & size_mask(size)
}

fn write_value(data: &mut [u8], offset: usize, size: u64, value: u64) {
    for i in 0..size as usize {
        data[offset + i] = (value >> (8 * i)) as u8;
    }
}

impl MemorySystem {
    pub fn new(cfg: &SystemConfig, value_tracking: bool, record_messages: bool) -> Self {
        let hier = CacheHierarchy::new(cfg);
        MemorySystem {
            coherence: cfg.coherence.clone(),
            cores: cfg.core_count,
            private_levels: hier.private_level_count(),
            dram: DramController::new(&cfg.dram, cfg.block_size()),
            hier,
            directory: HashMap::new(),
            backing: HashMap::new(),
            bus_free: 0,
            oracle: value_tracking.then(HashMap::new),
            fills: BTreeMap::new(),
            fill_finish: BTreeMap::new(),
            message_log: record_messages.then(String::new),
            counters: MemoryCounters::default(),
        }
    }

    /// Private levels plus the LLC.
    pub fn level_count(&self) -> usize {
        self.private_levels + 1
    }

    pub fn message_log(&self) -> Option<&str> {
        self.message_log.as_deref()
    }

    pub fn has_outstanding_fills(&self) -> bool {
        !self.fills.is_empty()
    }

    fn block_size(&self) -> u64 {
        self.hier.block_size()
    }

    fn backing_block(&self, block: u64) -> Vec<u8> {
        self.backing
            .get(&block)
            .cloned()
            .unwrap_or_else(|| vec![0; self.block_size() as usize])
    }

    fn record_messages(&mut self, now: u64, msgs: &[CoherenceMessage], tc: &mut AccessCounters) {
        for m in msgs {
            *self
                .counters
                .messages_by_kind
                .entry(m.kind.name().to_string())
                .or_default() += 1;
            if let Some(log) = self.message_log.as_mut() {
                let _ = writeln!(log, "{now} {} {:#x} {} {}", m.kind.name(), m.block, m.src, m.dst);
            }
        }
        self.counters.messages += msgs.len() as u64;
        tc.messages += msgs.len() as u64;
    }

    fn states(&self, block: u64) -> Vec<CoherenceState> {
        (0..self.cores).map(|c| self.hier.private_state(c, block)).collect()
    }

    fn sync_directory(&mut self, block: u64) {
        if self.coherence.transport != Transport::Directory {
            return;
        }
        match DirectoryEntry::from_states(block, &self.states(block)) {
            Some(e) => {
                self.directory.insert(block, e);
            }
            None => {
                self.directory.remove(&block);
            }
        }
    }

    fn memory_write(&mut self, block: u64, data: Vec<u8>, thread: usize, now: u64) -> Result<(), DramError> {
        self.dram.enqueue(block, thread, RequestKind::Write, now)?;
        self.backing.insert(block, data);
        self.counters.memory_writebacks += 1;
        Ok(())
    }

    /// Installs a block in the LLC and deals with whatever it displaces.
    fn llc_fill(
        &mut self,
        block: u64,
        core: usize,
        data: Vec<u8>,
        dirty: bool,
        thread: usize,
        now: u64,
    ) -> Result<(), DramError> {
        let out = self.hier.fill_and_evict(block, Some(core), data, dirty);
        if let Some(victim) = out.victim {
            self.counters.back_invalidations += out.back_invalidations.len() as u64;
            if let Some((addr, bytes)) = out.writeback {
                self.memory_write(addr, bytes, thread, now)?;
            }
            if !out.back_invalidations.is_empty() {
                self.sync_directory(victim);
            }
        }
        Ok(())
    }

    fn llc_writeback(
        &mut self,
        block: u64,
        data: Vec<u8>,
        core: usize,
        thread: usize,
        now: u64,
    ) -> Result<(), DramError> {
        if !self.hier.llc_write(block, &data) {
            self.llc_fill(block, core, data, true, thread, now)?;
        }
        Ok(())
    }

    fn handle_private_evictions(
        &mut self,
        evictions: Vec<PrivateEviction>,
        thread: usize,
        now: u64,
        tc: &mut AccessCounters,
    ) -> Result<(), DramError> {
        for ev in evictions {
            if ev.state == CoherenceState::Modified || ev.dirty {
                let msgs = evict(ev.core, ev.address, CoherenceState::Modified);
                self.record_messages(now, &msgs, tc);
                self.llc_writeback(ev.address, ev.data, ev.core, thread, now)?;
            }
            self.sync_directory(ev.address);
        }
        Ok(())
    }

    fn check_block(&mut self, block: u64) {
        let states = self.states(block);
        if !swmr_holds(&states) {
            self.counters.swmr_violations += 1;
        }
        let Some(oracle) = self.oracle.as_ref() else { return };
        for (c, s) in states.iter().enumerate() {
            if !s.is_valid() {
                continue;
            }
            let Some(data) = self.hier.private_data(c, block) else {
                continue;
            };
            let bad = data
                .iter()
                .enumerate()
                .any(|(i, b)| oracle.get(&(block + i as u64)).copied().unwrap_or(0) != *b);
            if bad {
                self.counters.value_mismatches += 1;
            }
        }
    }

    fn oracle_write(&mut self, address: u64, size: u64, value: u64) {
        if let Some(o) = self.oracle.as_mut() {
            for i in 0..size {
                o.insert(address + i, (value >> (8 * i)) as u8);
            }
        }
    }

    fn oracle_check(&mut self, address: u64, size: u64, value: u64) {
        if let Some(o) = self.oracle.as_ref() {
            let mut expect = 0u64;
            for i in 0..size {
                expect |= (o.get(&(address + i)).copied().unwrap_or(0) as u64) << (8 * i);
            }
            if expect != value {
                self.counters.value_mismatches += 1;
            }
        }
    }

    /// Performs the read or write on the requester's now-permitted copy.
    fn perform(&mut self, core: usize, access: MemAccess) -> Option<u64> {
        let bs = self.block_size();
        match access {
            MemAccess::Read { address, size } => {
                let block = address & !(bs - 1);
                let data = self.hier.private_data(core, block).expect("permitted copy");
                let value = read_value(data, (address - block) as usize, size);
                self.oracle_check(address, size, value);
                Some(value)
            }
            MemAccess::Write { address, size, value } => {
                let block = address & !(bs - 1);
                let data = self.hier.private_data_mut(core, block).expect("permitted copy");
                write_value(data, (address - block) as usize, size, value);
                self.hier.mark_dirty(core, block);
                self.oracle_write(address, size, value);
                None
            }
        }
    }

    /// One demand access (or store-buffer drain) from `core` at `now`.
    pub fn access(
        &mut self,
        core: usize,
        thread: usize,
        access: MemAccess,
        now: u64,
        tc: &mut AccessCounters,
    ) -> Result<AccessResult, DramError> {
        let (address, kind) = match access {
            MemAccess::Read { address, .. } => (address, Access::Read),
            MemAccess::Write { address, .. } => (address, Access::Write),
        };
        let block = self.hier.block_address(address);
        let (hit_level, private_latency) = self.hier.private_lookup(core, block);
        let state = self.hier.private_state(core, block);
        let permitted = match kind {
            Access::Read => state.is_valid(),
            Access::Write => state.is_owner(),
        };
        let record_private = |tc: &mut AccessCounters, levels: usize| {
            for (i, lc) in tc.levels.iter_mut().take(levels).enumerate() {
                match hit_level {
                    Some(h) if i == h => lc.hits += 1,
                    Some(h) if i > h => {}
                    _ => {
                        lc.misses += 1;
                        lc.fills += 1;
                    }
                }
            }
        };

        if permitted {
            record_private(tc, self.private_levels);
            if state == CoherenceState::Exclusive && kind == Access::Write {
                self.hier.set_private_state(core, block, CoherenceState::Modified);
            }
            let value = self.perform(core, access);
            return Ok(AccessResult::Done {
                at: now + private_latency,
                value,
            });
        }

        let states = self.states(block);
        let entry = self.directory.get(&block).copied();
        let txn = core_request(
            self.coherence.protocol,
            self.coherence.transport,
            core,
            kind,
            block,
            &states,
            entry.as_ref(),
        );

        let slice = self.hier.slice_for(block);
        let pending = self.hier.mshr_ref(slice).find(block).and_then(|e| e.fill_id);
        let from_llc = txn.data_source == DataSource::Llc;
        let llc_hit = from_llc && pending.is_none() && self.hier.llc_contains(block);
        let needs_dram = from_llc && pending.is_none() && !llc_hit;
        if needs_dram && self.hier.mshr_ref(slice).is_full() {
            self.counters.mshr_stalls += 1;
            return Ok(AccessResult::Retry);
        }

        record_private(tc, self.private_levels);
        if from_llc {
            let llc = &mut tc.levels[self.private_levels];
            if llc_hit {
                llc.hits += 1;
                self.hier.llc_lookup(block);
            } else {
                llc.misses += 1;
                if needs_dram {
                    llc.fills += 1;
                }
            }
        }

        // latency to the point where data (or permission) is available
        let mut t = now + private_latency;
        let llc_latency = self.hier.llc_latency_from(core, block);
        match self.coherence.transport {
            Transport::Directory => t += llc_latency,
            Transport::Snoopy => {
                let start = t.max(self.bus_free);
                self.bus_free = start + self.coherence.bus_occupancy_cycles;
                t = self.bus_free;
                if from_llc {
                    t += llc_latency;
                }
            }
        }
        if txn.involved_remote() {
            t += self.coherence.cache_to_cache_cycles;
        }

        self.record_messages(now, &txn.messages, tc);
        self.counters.invalidations += txn.invalidated.len() as u64;

        let data = match txn.data_source {
            DataSource::Core(o) => Some(self.hier.private_data(o, block).expect("owner copy").to_vec()),
            DataSource::Llc => Some(match self.hier.llc_data(block) {
                Some(d) => d.to_vec(),
                None => self.backing_block(block),
            }),
            DataSource::Local => None,
        };
        if let Some(o) = txn.owner_writeback {
            let d = self.hier.private_data(o, block).expect("owner copy").to_vec();
            self.llc_writeback(block, d, core, thread, now)?;
        }
        for (c, (&before, &after)) in states.iter().zip(&txn.final_states).enumerate() {
            if c == core || before == after {
                continue;
            }
            if after == CoherenceState::Invalid {
                self.hier.invalidate_private(c, block);
            } else {
                self.hier.set_private_state(c, block, after);
            }
        }

        let mut fill_id = pending;
        if needs_dram {
            let id = self.dram.enqueue(block, thread, RequestKind::Read, t)?;
            self.hier.mshr(slice).allocate(block, core);
            self.hier.mshr(slice).set_fill_id(block, id);
            self.fills.insert(id, (slice, block));
            fill_id = Some(id);
            let bytes = data.clone().expect("llc data");
            self.llc_fill(block, core, bytes, false, thread, now)?;
        } else if from_llc && pending.is_some() {
            self.hier.mshr(slice).allocate(block, core);
            self.counters.mshr_merges += 1;
        }

        let new_state = txn.final_states[core];
        if state == CoherenceState::Invalid {
            let evictions = self.hier.fill_private(core, block, new_state, data.expect("fill data"));
            self.handle_private_evictions(evictions, thread, now, tc)?;
        } else {
            self.hier.set_private_state(core, block, new_state);
        }
        let value = self.perform(core, access);
        self.sync_directory(block);
        self.check_block(block);

        Ok(match fill_id.filter(|_| from_llc) {
            Some(id) => match self.fill_finish.get(&id) {
                Some(&finish) => AccessResult::Done {
                    at: finish.max(t),
                    value,
                },
                None => AccessResult::WaitDram { id, value },
            },
            None => AccessResult::Done { at: t, value },
        })
    }

    /// Advances DRAM one cycle and returns scheduled completions.
    pub fn tick_dram(&mut self, now: u64) -> Vec<Completion> {
        let done = self.dram.tick(now);
        for d in &done {
            if self.fills.contains_key(&d.id) {
                self.fill_finish.insert(d.id, d.finish);
            }
        }
        done
    }

    /// Frees MSHRs whose fills have completed by `now`.
    pub fn retire_fills(&mut self, now: u64) {
        let finished: Vec<u64> = self
            .fill_finish
            .iter()
            .filter(|(_, &f)| f <= now)
            .map(|(&id, _)| id)
            .collect();
        for id in finished {
            self.fill_finish.remove(&id);
            if let Some((slice, block)) = self.fills.remove(&id) {
                self.hier.mshr(slice).release(block);
            }
        }
    }

    /// Earliest pending MSHR release after `now`.
    pub fn next_fill_release(&self, now: u64) -> Option<u64> {
        self.fill_finish.values().copied().filter(|&f| f > now).min()
    }

    /// Coherent memory image: modified private copies, then the LLC, then
    /// memory.
    pub fn final_image(&self) -> BTreeMap<u64, Vec<u8>> {
        let mut blocks: Vec<u64> = self.backing.keys().copied().collect();
        for s in 0..self.hier.slice_count() {
            blocks.extend(
                self.hier
                    .slice(s)
                    .blocks()
                    .map(|b| b.tag << self.hier.geometry.offset_bits),
            );
        }
        let last = self.private_levels.saturating_sub(1);
        for c in 0..self.cores {
            if self.private_levels > 0 {
                blocks.extend(self.hier.private_blocks(c, last));
            }
        }
        blocks.sort_unstable();
        blocks.dedup();
        blocks
            .into_iter()
            .map(|b| {
                let owner = (0..self.cores).find(|&c| self.hier.private_state(c, b) == CoherenceState::Modified);
                let data = match owner {
                    Some(c) => self.hier.private_data(c, b).expect("owner copy").to_vec(),
                    None => match self.hier.llc_data(b) {
                        Some(d) => d.to_vec(),
                        None => self.backing_block(b),
                    },
                };
                (b, data)
            })
            .collect()
    }

    /// Compares the final image with the oracle; returns mismatching bytes.
    pub fn audit_final_image(&self) -> u64 {
        let Some(oracle) = self.oracle.as_ref() else { return 0 };
        let image = self.final_image();
        let bs = self.block_size();
        let mut bad = 0;
        for (&addr, &byte) in oracle {
            let block = addr & !(bs - 1);
            let actual = image.get(&block).map_or(0, |d| d[(addr - block) as usize]);
            if actual != byte {
                bad += 1;
            }
        }
        bad
    }
}

/// Reads `size` bytes at `address` from a memory image.
pub fn image_value(image: &BTreeMap<u64, Vec<u8>>, block_size: u64, address: u64, size: u64) -> u64 {
    let block = address & !(block_size - 1);
    image
        .get(&block)
        .map_or(0, |d| read_value(d, (address - block) as usize, size))
}
