//! In-order blocking core: event issue, the store buffer, and DVFS power.

mod dvfs;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use dvfs::{
    dynamic_power, governor_select, DvfsParams, FrequencySteps, GovernorPolicy, PowerError, ONDEMAND_DOWN, ONDEMAND_UP,
};

use crate::trace::TraceOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConsistencyMode {
    Sc,
    Tso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreBufferEntry {
    pub address: u64,
    pub size: u64,
    pub value: u64,
    pub enqueue_cycle: u64,
}

impl StoreBufferEntry {
    fn covers(&self, address: u64, size: u64) -> bool {
        self.address <= address && address + size <= self.address + self.size
    }

    fn overlaps(&self, address: u64, size: u64) -> bool {
        self.address < address + size && address < self.address + self.size
    }

    fn extract(&self, address: u64, size: u64) -> u64 {
        let shift = (address - self.address) * 8;
        (self.value >> shift) & size_mask(size)
    }
}

pub(crate) fn size_mask(size: u64) -> u64 {
    if size >= 8 {
        u64::MAX
    } else {
        (1u64 << (size * 8)) - 1
    }
}

/// A write leaving the store buffer (or issued directly when the buffer is
/// disabled).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteRequest {
    pub cycle: u64,
    pub address: u64,
    pub size: u64,
    pub value: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemAccess {
    Read { address: u64, size: u64 },
    Write { address: u64, size: u64, value: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StallReason {
    /// SC load, or a TSO load partially overlapping a buffered store.
    LoadWaitsForDrain,
    StoreBufferFull,
    FenceWaitsForDrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueOutcome {
    /// Compute: the core is busy for this many core cycles.
    Local {
        cycles: u64,
    },
    /// Load satisfied from the store buffer; no cache access.
    Forwarded {
        value: u64,
    },
    /// The event needs the memory hierarchy.
    Request(MemAccess),
    /// Store accepted into the store buffer.
    Buffered,
    FenceComplete,
    /// Not accepted; retry later with the same event.
    Stall(StallReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreStats {
    pub instructions: u64,
    pub busy_cycles: u64,
    pub stall_cycles: u64,
}

#[derive(Debug, Clone)]
pub struct CoreState {
    pub core_id: usize,
    pub mode: ConsistencyMode,
    pub current_frequency: f64,
    depth: usize,
    store_buffer: VecDeque<StoreBufferEntry>,
    pub stats: CoreStats,
}

impl CoreState {
    pub fn new(core_id: usize, mode: ConsistencyMode, depth: usize, frequency: f64) -> Self {
        CoreState {
            core_id,
            mode,
            current_frequency: frequency,
            depth,
            store_buffer: VecDeque::with_capacity(depth),
            stats: CoreStats::default(),
        }
    }

    pub fn store_buffer_depth(&self) -> usize {
        self.depth
    }

    pub fn buffered(&self) -> usize {
        self.store_buffer.len()
    }

    pub fn store_buffer(&self) -> impl Iterator<Item = &StoreBufferEntry> {
        self.store_buffer.iter()
    }

    /// Tries to issue one trace event at `now`. Accepted events count as
    /// retired instructions; a [`IssueOutcome::Stall`] leaves all state
    /// untouched.
    pub fn issue_event(&mut self, op: &TraceOp, now: u64) -> IssueOutcome {
        let outcome = match *op {
            TraceOp::Compute { cycles } => IssueOutcome::Local { cycles },
            TraceOp::Load { address, size } => self.issue_load(address, size),
            TraceOp::Store { address, size, value } => {
                if self.depth == 0 {
                    IssueOutcome::Request(MemAccess::Write { address, size, value })
                } else if self.store_buffer.len() >= self.depth {
                    IssueOutcome::Stall(StallReason::StoreBufferFull)
                } else {
                    self.store_buffer.push_back(StoreBufferEntry {
                        address,
                        size,
                        value,
                        enqueue_cycle: now,
                    });
                    IssueOutcome::Buffered
                }
            }
            TraceOp::Fence => {
                if self.store_buffer.is_empty() {
                    IssueOutcome::FenceComplete
                } else {
                    IssueOutcome::Stall(StallReason::FenceWaitsForDrain)
                }
            }
        };
        if !matches!(outcome, IssueOutcome::Stall(_)) {
            self.stats.instructions += 1;
        }
        outcome
    }

    fn issue_load(&self, address: u64, size: u64) -> IssueOutcome {
        if self.store_buffer.is_empty() {
            return IssueOutcome::Request(MemAccess::Read { address, size });
        }
        match self.mode {
            ConsistencyMode::Sc => IssueOutcome::Stall(StallReason::LoadWaitsForDrain),
            ConsistencyMode::Tso => {
                // youngest overlapping store decides
                match self.store_buffer.iter().rev().find(|e| e.overlaps(address, size)) {
                    Some(e) if e.covers(address, size) => IssueOutcome::Forwarded {
                        value: e.extract(address, size),
                    },
                    Some(_) => IssueOutcome::Stall(StallReason::LoadWaitsForDrain),
                    None => IssueOutcome::Request(MemAccess::Read { address, size }),
                }
            }
        }
    }

    /// Removes the oldest buffered store, if any, as a write issued at `now`.
    pub fn pop_drain(&mut self, now: u64) -> Option<WriteRequest> {
        self.store_buffer.pop_front().map(|e| WriteRequest {
            cycle: now,
            address: e.address,
            size: e.size,
            value: e.value,
        })
    }
}

/// Drains the whole buffer through a free L1 port starting at `start`: one
/// entry per cycle, oldest first.
pub fn drain_store_buffer(core: &mut CoreState, start: u64) -> Vec<WriteRequest> {
    let mut out = Vec::with_capacity(core.buffered());
    let mut cycle = start;
    while let Some(w) = core.pop_drain(cycle) {
        out.push(w);
        cycle += 1;
    }
    out
}
