use std::collections::{BTreeMap, VecDeque};

use crate::config::OsConfig;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedEvent {
    /// `to` takes the core; it may issue from `ready_at`.
    SwitchIn {
        core: usize,
        from: Option<usize>,
        to: usize,
        ready_at: u64,
    },
    /// `thread` finished and left the core.
    Retire { core: usize, thread: usize },
}

/// Per-core round-robin run queues with static placement.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    pub run_queues: Vec<VecDeque<usize>>,
    pub current: Vec<Option<usize>>,
    /// Cycle the current thread's quantum started (after its switch-in).
    pub quantum_start: Vec<u64>,
    /// The current thread may issue from this cycle.
    pub ready_at: Vec<u64>,
    pub quantum: u64,
    pub switch_cost: u64,
    pub switches: u64,
    pub placement: BTreeMap<usize, usize>,
    /// Whether any thread has run on the core yet.
    used: Vec<bool>,
}

impl SchedulerState {
    /// Places each thread on the least-loaded core its affinity allows;
    /// ties go to the lowest core id.
    pub fn new(core_count: usize, os: &OsConfig, threads: &[usize]) -> Result<Self, EngineError> {
        let mut run_queues = vec![VecDeque::new(); core_count];
        let mut placement = BTreeMap::new();
        for &t in threads {
            let allowed: Vec<usize> = match os.affinity.get(&t) {
                Some(cores) => cores.iter().copied().filter(|&c| c < core_count).collect(),
                None => (0..core_count).collect(),
            };
            let core = allowed
                .iter()
                .copied()
                .min_by_key(|&c| (run_queues[c].len(), c))
                .ok_or(EngineError::UnschedulableThread { thread: t })?;
            run_queues[core].push_back(t);
            placement.insert(t, core);
        }
        Ok(SchedulerState {
            run_queues,
            current: vec![None; core_count],
            quantum_start: vec![0; core_count],
            ready_at: vec![0; core_count],
            quantum: os.quantum_cycles.max(1),
            switch_cost: os.context_switch_cycles,
            switches: 0,
            placement,
            used: vec![false; core_count],
        })
    }

    /// Earliest cycle after `now` at which a quantum expires on a core with
    /// waiting threads.
    pub fn next_preemption(&self, now: u64) -> Option<u64> {
        (0..self.current.len())
            .filter(|&c| self.current[c].is_some() && !self.run_queues[c].is_empty())
            .map(|c| self.quantum_start[c] + self.quantum)
            .filter(|&t| t > now)
            .min()
    }

    fn switch_in(&mut self, core: usize, from: Option<usize>, now: u64, events: &mut Vec<SchedEvent>) {
        let Some(next) = self.run_queues[core].pop_front() else {
            return;
        };
        let cost = if self.used[core] { self.switch_cost } else { 0 };
        if self.used[core] {
            self.switches += 1;
        }
        self.used[core] = true;
        self.current[core] = Some(next);
        self.ready_at[core] = now + cost;
        self.quantum_start[core] = now + cost;
        events.push(SchedEvent::SwitchIn {
            core,
            from,
            to: next,
            ready_at: now + cost,
        });
    }
}

/// One scheduling step at `now`. `quiescent(core)` reports that the core
/// has no operation or store in flight; `finished(thread)` that the thread
/// has consumed its trace. Preemption happens only on quiescent cores.
pub fn os_schedule_tick(
    state: &mut SchedulerState,
    now: u64,
    quiescent: impl Fn(usize) -> bool,
    finished: impl Fn(usize) -> bool,
) -> Vec<SchedEvent> {
    let mut events = Vec::new();
    for core in 0..state.current.len() {
        if let Some(t) = state.current[core] {
            if now < state.ready_at[core] || !quiescent(core) {
                continue;
            }
            if finished(t) {
                state.current[core] = None;
                events.push(SchedEvent::Retire { core, thread: t });
                state.switch_in(core, Some(t), now, &mut events);
            } else if now >= state.quantum_start[core] + state.quantum && !state.run_queues[core].is_empty() {
                state.run_queues[core].push_back(t);
                state.switch_in(core, Some(t), now, &mut events);
            }
        } else {
            state.switch_in(core, None, now, &mut events);
        }
    }
    events
}
