//! Cycle-driven simulation kernel: cores, caches, coherence and DRAM
//! advanced in a fixed order each reference cycle, plus the OS scheduler.

mod experiment;
mod litmus;
mod memory;
mod os;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use experiment::{run_experiment, ExperimentError, ExperimentReport};
pub use litmus::{litmus_layout, litmus_trace, run_litmus};
pub use memory::{image_value, AccessCounters, AccessResult, LevelCounts, MemoryCounters, MemorySystem};
pub use os::{os_schedule_tick, SchedEvent, SchedulerState};

use crate::config::SystemConfig;
use crate::core_model::{dynamic_power, governor_select, CoreState, FrequencySteps, IssueOutcome, PowerError};
use crate::dram::{DramError, DramStats};
use crate::trace::{TraceEvent, TraceOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("trace references thread {thread}, but at most {max} threads are configured")]
    UnknownThread { thread: usize, max: usize },
    #[error("no progress for the deadlock window; stopped at cycle {cycle}")]
    DeadlockDetected { cycle: u64 },
    #[error("thread {thread} has no configured core in its affinity set")]
    UnschedulableThread { thread: usize },
    #[error(transparent)]
    Dram(#[from] DramError),
    #[error(transparent)]
    Power(#[from] PowerError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub record_messages: bool,
    pub record_events: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub name: String,
    pub hits: u64,
    pub misses: u64,
    pub fills: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThreadStats {
    pub thread: usize,
    pub app: usize,
    pub core: usize,
    pub instructions: u64,
    /// Cycle at which the thread's last operation completed.
    pub cycles: u64,
    /// Cycles spent occupying a core.
    pub active_cycles: u64,
    pub stall_cycles: u64,
    /// Private levels in order, then the LLC.
    pub levels: Vec<LevelCounts>,
    pub messages: u64,
    pub dram_row_hits: u64,
    pub dram_row_misses: u64,
    pub energy_joules: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AppStats {
    pub app: usize,
    pub threads: usize,
    pub instructions: u64,
    /// Completion cycle of the app's last thread.
    pub cycles: u64,
    pub stall_cycles: u64,
    pub levels: Vec<LevelCounts>,
    pub messages: u64,
    pub dram_row_hits: u64,
    pub dram_row_misses: u64,
    pub energy_joules: f64,
}

impl AppStats {
    pub fn ipc(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.instructions as f64 / self.cycles as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub cycles: u64,
    pub instructions: u64,
    pub threads: Vec<ThreadStats>,
    pub apps: Vec<AppStats>,
    pub levels: Vec<LevelSummary>,
    pub messages: u64,
    pub messages_by_kind: BTreeMap<String, u64>,
    pub invalidations: u64,
    pub back_invalidations: u64,
    pub context_switches: u64,
    pub mshr_merges: u64,
    pub mshr_stalls: u64,
    pub memory_writebacks: u64,
    pub swmr_violations: u64,
    pub value_mismatches: u64,
    pub energy_joules: f64,
    pub dram: DramStats,
}

impl RunStats {
    pub fn ipc(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.instructions as f64 / self.cycles as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: RunStats,
    /// `cycle kind 0xblock src dst` per coherence message.
    pub messages: Option<String>,
    /// `cycle channel bank CMD row[/col]` per DRAM command.
    pub commands: String,
    /// `cycle component event` lines.
    pub events: Option<String>,
    /// Values returned to each thread's loads, in program order.
    pub load_values: BTreeMap<usize, Vec<u64>>,
    /// Coherent final memory contents by block address.
    pub image: BTreeMap<u64, Vec<u8>>,
    pub block_size: u64,
}

impl RunOutput {
    pub fn read_memory(&self, address: u64, size: u64) -> u64 {
        image_value(&self.image, self.block_size, address, size)
    }
}

/// Lines of an event log whose cycle is lower than the line before.
pub fn audit_event_log(log: &str) -> Vec<usize> {
    let mut last = 0u64;
    let mut bad = Vec::new();
    for (i, line) in log.lines().enumerate() {
        let cycle = line.split_whitespace().next().and_then(|c| c.parse::<u64>().ok());
        match cycle {
            Some(c) if c >= last => last = c,
            _ => bad.push(i + 1),
        }
    }
    bad
}

struct Thread {
    id: usize,
    app: usize,
    ops: Vec<TraceOp>,
    pc: usize,
    finished_at: Option<u64>,
    core: usize,
    instructions: u64,
    active_cycles: u64,
    stall_cycles: u64,
    energy: f64,
    counters: AccessCounters,
    loads: Vec<u64>,
}

struct CoreRt {
    state: CoreState,
    steps: FrequencySteps,
    freq_idx: usize,
    issue_gap: u64,
    busy_until: u64,
    stall_until: u64,
    wait: Option<u64>,
    next_issue: u64,
    drain_until: u64,
    drain_wait: Option<u64>,
    stalled: bool,
    active_in_interval: u64,
    energy: f64,
}

impl CoreRt {
    fn frequency(&self) -> f64 {
        self.steps.get(self.freq_idx)
    }

    fn quiescent(&self, now: u64) -> bool {
        self.wait.is_none()
            && self.busy_until <= now
            && self.state.buffered() == 0
            && self.drain_wait.is_none()
            && self.drain_until <= now
    }
}

fn scaled(cycles: u64, reference: f64, frequency: f64) -> u64 {
    (cycles as f64 * reference / frequency).ceil().max(1.0) as u64
}

/// Splits app traces into per-thread programs with global thread ids.
fn build_threads(config: &SystemConfig, apps: &[Vec<TraceEvent>]) -> Result<Vec<Thread>, EngineError> {
    let levels = config.cache_levels.len();
    let mut threads: BTreeMap<usize, Thread> = BTreeMap::new();
    let mut offset = 0;
    for (app, events) in apps.iter().enumerate() {
        let width = events.iter().map(|e| e.thread + 1).max().unwrap_or(0);
        for e in events {
            let id = offset + e.thread;
            if id >= config.os.max_threads {
                return Err(EngineError::UnknownThread {
                    thread: id,
                    max: config.os.max_threads,
                });
            }
            threads
                .entry(id)
                .or_insert_with(|| Thread {
                    id,
                    app,
                    ops: Vec::new(),
                    pc: 0,
                    finished_at: None,
                    core: 0,
                    instructions: 0,
                    active_cycles: 0,
                    stall_cycles: 0,
                    energy: 0.0,
                    counters: AccessCounters::new(levels),
                    loads: Vec::new(),
                })
                .ops
                .push(e.op);
        }
        offset += width;
    }
    Ok(threads.into_values().collect())
}

pub fn run(config: &SystemConfig, apps: &[Vec<TraceEvent>], seed: u64) -> Result<RunStats, EngineError> {
    run_with(config, apps, seed, RunOptions::default()).map(|o| o.stats)
}

/// Runs the traces to completion. Each entry of `apps` is one application;
/// its thread ids are local and are offset past the previous app's.
pub fn run_with(
    config: &SystemConfig,
    apps: &[Vec<TraceEvent>],
    seed: u64,
    options: RunOptions,
) -> Result<RunOutput, EngineError> {
    let mut threads = build_threads(config, apps)?;
    let index: BTreeMap<usize, usize> = threads.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let ids: Vec<usize> = threads.iter().map(|t| t.id).collect();
    let mut sched = SchedulerState::new(config.core_count, &config.os, &ids)?;
    for t in threads.iter_mut() {
        t.core = sched.placement[&t.id];
    }
    let mut mem = MemorySystem::new(config, config.engine.value_tracking, options.record_messages);
    let reference = config
        .engine
        .reference_frequency_hz
        .unwrap_or_else(|| config.per_core.iter().map(|c| c.base_frequency_hz).fold(0.0, f64::max));
    let mut cores: Vec<CoreRt> = config
        .per_core
        .iter()
        .enumerate()
        .map(|(id, cc)| {
            let steps = FrequencySteps::new(cc.dvfs.frequency_steps())
                .unwrap_or_else(|_| FrequencySteps::new(vec![cc.base_frequency_hz]).expect("positive base frequency"));
            let freq_idx = (0..steps.len())
                .find(|&i| steps.get(i) >= cc.base_frequency_hz)
                .unwrap_or(steps.max_index());
            CoreRt {
                state: CoreState::new(id, cc.consistency_mode, cc.store_buffer_depth, steps.get(freq_idx)),
                issue_gap: 1,
                steps,
                freq_idx,
                busy_until: 0,
                stall_until: 0,
                wait: None,
                next_issue: 0,
                drain_until: 0,
                drain_wait: None,
                stalled: false,
                active_in_interval: 0,
                energy: 0.0,
            }
        })
        .collect();
    let l1_latency = if mem.hier.private_level_count() > 0 {
        mem.hier.private_level(0, 0).latency
    } else {
        0
    };
    let interval = config.engine.governor_interval_cycles.max(1);
    let mut events = options.record_events.then(String::new);
    let mut now = 0u64;
    let mut last_progress = 0u64;
    let mut next_governor = 0u64;
    let mut last_governor = 0u64;
    let mut retired = 0usize;

    while retired < threads.len() {
        mem.retire_fills(now);
        let mut progress = false;

        if now >= next_governor {
            let elapsed = (now - last_governor).max(1);
            for (c, core) in cores.iter_mut().enumerate() {
                let util = if now == 0 {
                    1.0
                } else {
                    core.active_in_interval as f64 / elapsed as f64
                };
                let idx = governor_select(config.engine.governor, util, core.freq_idx, &core.steps);
                if idx != core.freq_idx || now == 0 {
                    core.freq_idx = idx;
                    core.state.current_frequency = core.frequency();
                    if let Some(log) = events.as_mut() {
                        let _ = writeln!(log, "{now} core{c} frequency {}", core.frequency());
                    }
                }
                core.issue_gap = scaled(1, reference, core.frequency());
                core.active_in_interval = 0;
            }
            last_governor = now;
            next_governor = (now / interval + 1) * interval;
        }

        for core in &cores {
            if core.busy_until == now || core.drain_until == now {
                progress = true;
            }
        }

        let sched_events = os_schedule_tick(
            &mut sched,
            now,
            |c| cores[c].quiescent(now),
            |t| threads[index[&t]].pc >= threads[index[&t]].ops.len(),
        );
        for e in sched_events {
            progress = true;
            match e {
                SchedEvent::Retire { core, thread } => {
                    threads[index[&thread]].finished_at = Some(now);
                    retired += 1;
                    if let Some(log) = events.as_mut() {
                        let _ = writeln!(log, "{now} os core{core} retire T{thread}");
                    }
                }
                SchedEvent::SwitchIn {
                    core,
                    from,
                    to,
                    ready_at,
                } => {
                    threads[index[&to]].core = core;
                    if let Some(log) = events.as_mut() {
                        let from = from.map_or("-".to_string(), |f| format!("T{f}"));
                        let _ = writeln!(log, "{now} os core{core} switch {from} T{to} ready {ready_at}");
                    }
                }
            }
        }
        if retired == threads.len() {
            break;
        }

        // cores issue in id order
        for (c, core) in cores.iter_mut().enumerate() {
            core.stalled = false;
            let Some(tid) = sched.current[c] else { continue };
            if now < sched.ready_at[c] || core.wait.is_some() || now < core.busy_until || now < core.next_issue {
                continue;
            }
            let th = &mut threads[index[&tid]];
            let Some(&op) = th.ops.get(th.pc) else { continue };
            if op == TraceOp::Fence && (core.drain_wait.is_some() || core.drain_until > now) {
                core.stalled = true;
                continue;
            }
            let outcome = core.state.issue_event(&op, now);
            match outcome {
                IssueOutcome::Stall(_) => {
                    core.stalled = true;
                    continue;
                }
                IssueOutcome::Local { cycles } => {
                    core.busy_until = now + scaled(cycles, reference, core.frequency());
                }
                IssueOutcome::Forwarded { value } => {
                    th.loads.push(value);
                    core.busy_until = now + 1;
                }
                IssueOutcome::Buffered | IssueOutcome::FenceComplete => core.busy_until = now + 1,
                IssueOutcome::Request(access) => match mem.access(c, tid, access, now, &mut th.counters)? {
                    AccessResult::Retry => {
                        core.state.stats.instructions -= 1;
                        core.stalled = true;
                        continue;
                    }
                    AccessResult::Done { at, value } => {
                        th.loads.extend(value);
                        core.busy_until = at;
                        if at - now > l1_latency {
                            core.stall_until = at;
                        }
                    }
                    AccessResult::WaitDram { id, value } => {
                        th.loads.extend(value);
                        core.wait = Some(id);
                    }
                },
            }
            th.pc += 1;
            th.instructions += 1;
            core.next_issue = now + core.issue_gap;
            progress = true;
            if let Some(log) = events.as_mut() {
                let _ = writeln!(log, "{now} core{c} issue {}", TraceEvent { thread: tid, op });
            }
        }

        // one store-buffer drain per core
        for (c, core) in cores.iter_mut().enumerate() {
            if core.drain_wait.is_some() || core.drain_until > now || core.state.buffered() == 0 {
                continue;
            }
            let Some(tid) = sched.current[c] else { continue };
            let entry = *core.state.store_buffer().next().expect("non-empty buffer");
            if entry.enqueue_cycle >= now {
                continue;
            }
            let access = crate::core_model::MemAccess::Write {
                address: entry.address,
                size: entry.size,
                value: entry.value,
            };
            let th = &mut threads[index[&tid]];
            match mem.access(c, tid, access, now, &mut th.counters)? {
                AccessResult::Retry => continue,
                AccessResult::Done { at, .. } => core.drain_until = at,
                AccessResult::WaitDram { id, .. } => core.drain_wait = Some(id),
            }
            core.state.pop_drain(now);
            progress = true;
            if let Some(log) = events.as_mut() {
                let _ = writeln!(log, "{now} core{c} drain {:#x}", entry.address);
            }
        }

        for done in mem.tick_dram(now) {
            progress = true;
            for core in cores.iter_mut() {
                if core.wait == Some(done.id) {
                    core.wait = None;
                    core.busy_until = done.finish;
                    core.stall_until = done.finish;
                }
                if core.drain_wait == Some(done.id) {
                    core.drain_wait = None;
                    core.drain_until = done.finish;
                }
            }
            if let Some(log) = events.as_mut() {
                let _ = writeln!(
                    log,
                    "{now} dram schedule req{} T{} finish {}",
                    done.id, done.thread, done.finish
                );
            }
        }

        if progress {
            last_progress = now;
        }

        // next cycle at which anything can change
        let mut next = u64::MAX;
        let mut consider = |t: u64| {
            if t > now {
                next = next.min(t);
            }
        };
        for (c, core) in cores.iter().enumerate() {
            consider(core.busy_until);
            consider(core.stall_until);
            consider(core.drain_until);
            consider(sched.ready_at[c]);
            let Some(tid) = sched.current[c] else { continue };
            let th = &threads[index[&tid]];
            let drain_idle = core.drain_wait.is_none() && core.drain_until <= now;
            if core.stalled || (drain_idle && core.state.buffered() > 0) {
                consider(now + 1);
            }
            let ready = core.wait.is_none() && core.busy_until <= now && sched.ready_at[c] <= now;
            if ready && th.pc < th.ops.len() && !core.stalled {
                consider(core.next_issue.max(now + 1));
            }
            if ready && th.pc >= th.ops.len() {
                consider(now + 1);
            }
        }
        if let Some(t) = mem.dram.next_issue_cycle(now + 1) {
            consider(t);
        }
        if let Some(t) = mem.next_fill_release(now) {
            consider(t);
        }
        if let Some(t) = sched.next_preemption(now) {
            consider(t);
        }
        if config.engine.governor != crate::core_model::GovernorPolicy::Performance {
            consider(next_governor);
        }
        let deadline = last_progress + config.engine.deadlock_cycles;
        if next == u64::MAX || next > deadline {
            return Err(EngineError::DeadlockDetected {
                cycle: deadline.max(now),
            });
        }

        let delta = next - now;
        for (c, core) in cores.iter_mut().enumerate() {
            let occupant = sched.current[c];
            let dynamic = if occupant.is_some() {
                dynamic_power(&config.per_core[c].dvfs, core.frequency())?
            } else {
                0.0
            };
            let joules = (dynamic + config.per_core[c].dvfs.static_watts) * delta as f64 / reference;
            core.energy += joules;
            let Some(tid) = occupant else { continue };
            let th = &mut threads[index[&tid]];
            th.energy += joules;
            if now < sched.ready_at[c] {
                continue;
            }
            th.active_cycles += delta;
            core.active_in_interval += delta;
            if core.stalled || core.wait.is_some() || core.drain_wait.is_some() || core.stall_until > now {
                th.stall_cycles += delta;
            }
        }
        now = next;
    }

    let mut counters = mem.counters.clone();
    counters.value_mismatches += mem.audit_final_image();
    let dram = mem.dram.stats().clone();
    let level_names: Vec<String> = config.cache_levels.iter().map(|l| l.name.clone()).collect();

    let thread_stats: Vec<ThreadStats> = threads
        .iter()
        .map(|t| {
            let d = dram.per_thread.get(&t.id).copied().unwrap_or_default();
            ThreadStats {
                thread: t.id,
                app: t.app,
                core: t.core,
                instructions: t.instructions,
                cycles: t.finished_at.unwrap_or(now),
                active_cycles: t.active_cycles,
                stall_cycles: t.stall_cycles,
                levels: t.counters.levels.clone(),
                messages: t.counters.messages,
                dram_row_hits: d.row_hits,
                dram_row_misses: d.row_misses,
                energy_joules: t.energy,
            }
        })
        .collect();
    let app_ids: BTreeSet<usize> = thread_stats.iter().map(|t| t.app).collect();
    let apps_stats: Vec<AppStats> = app_ids
        .into_iter()
        .map(|app| {
            let mut a = AppStats {
                app,
                levels: vec![LevelCounts::default(); level_names.len()],
                ..AppStats::default()
            };
            for t in thread_stats.iter().filter(|t| t.app == app) {
                a.threads += 1;
                a.instructions += t.instructions;
                a.cycles = a.cycles.max(t.cycles);
                a.stall_cycles += t.stall_cycles;
                for (x, y) in a.levels.iter_mut().zip(&t.levels) {
                    x.add(y);
                }
                a.messages += t.messages;
                a.dram_row_hits += t.dram_row_hits;
                a.dram_row_misses += t.dram_row_misses;
                a.energy_joules += t.energy_joules;
            }
            a
        })
        .collect();
    let mut totals = vec![LevelCounts::default(); level_names.len()];
    for t in &thread_stats {
        for (x, y) in totals.iter_mut().zip(&t.levels) {
            x.add(y);
        }
    }
    let stats = RunStats {
        seed,
        cycles: thread_stats.iter().map(|t| t.cycles).max().unwrap_or(0),
        instructions: thread_stats.iter().map(|t| t.instructions).sum(),
        levels: level_names
            .into_iter()
            .zip(totals)
            .map(|(name, l)| LevelSummary {
                name,
                hits: l.hits,
                misses: l.misses,
                fills: l.fills,
            })
            .collect(),
        threads: thread_stats,
        apps: apps_stats,
        messages: counters.messages,
        messages_by_kind: counters.messages_by_kind,
        invalidations: counters.invalidations,
        back_invalidations: counters.back_invalidations,
        context_switches: sched.switches,
        mshr_merges: counters.mshr_merges,
        mshr_stalls: counters.mshr_stalls,
        memory_writebacks: counters.memory_writebacks,
        swmr_violations: counters.swmr_violations,
        value_mismatches: counters.value_mismatches,
        energy_joules: cores.iter().map(|c| c.energy).sum(),
        dram,
    };
    Ok(RunOutput {
        stats,
        messages: mem.message_log().map(str::to_string),
        commands: mem.dram.command_log(),
        events,
        load_values: threads.into_iter().map(|t| (t.id, t.loads)).collect(),
        image: mem.final_image(),
        block_size: config.block_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;
    use crate::trace::{generate_trace, TracePattern};

    fn machine(cores: usize) -> SystemConfig {
        validate_config(SystemConfig::with_cores(cores)).unwrap()
    }

    fn one_core() -> SystemConfig {
        machine(1)
    }

    #[test]
    fn empty_traces_take_zero_cycles() {
        let s = run(&one_core(), &[], 0).unwrap();
        assert_eq!(s.cycles, 0);
        assert_eq!(s.instructions, 0);
        assert_eq!(s.messages, 0);
    }

    #[test]
    fn l1_hits_cost_l1_latency_each() {
        let cfg = one_core();
        let l1 = cfg.cache_levels[0].latency_cycles;
        let mut trace = vec![TraceEvent::load(0, 0x40, 8)];
        let warm = run(&cfg, &[trace.clone()], 0).unwrap().cycles;
        trace.extend((0..10).map(|_| TraceEvent::load(0, 0x40, 8)));
        let s = run(&cfg, &[trace], 0).unwrap();
        assert_eq!(s.cycles - warm, 10 * l1);
        assert_eq!(s.levels[0].hits, 10);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = machine(4);
        let trace = generate_trace(
            TracePattern::RandomUniform {
                threads: 4,
                events_per_thread: 200,
                footprint_blocks: 64,
                store_fraction: 0.3,
            },
            cfg.block_size(),
            7,
        );
        let opts = RunOptions {
            record_messages: true,
            record_events: true,
        };
        let a = run_with(&cfg, std::slice::from_ref(&trace), 7, opts).unwrap();
        let b = run_with(&cfg, &[trace], 7, opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a.stats).unwrap(),
            serde_json::to_string(&b.stats).unwrap()
        );
        assert_eq!(a.messages, b.messages);
        assert_eq!(a.events, b.events);
        assert_eq!(a.commands, b.commands);
        assert_eq!(a.stats.swmr_violations, 0);
        assert_eq!(a.stats.value_mismatches, 0);
        assert!(audit_event_log(a.events.as_deref().unwrap()).is_empty());
        for l in &a.stats.levels {
            assert!(l.fills <= l.misses);
        }
        assert_eq!(a.messages.as_deref().unwrap().lines().count() as u64, a.stats.messages);
    }

    #[test]
    fn unknown_thread_rejected() {
        let mut cfg = one_core();
        cfg.os.max_threads = 2;
        let trace = vec![TraceEvent::load(5, 0, 8)];
        assert!(matches!(
            run(&cfg, &[trace], 0),
            Err(EngineError::UnknownThread { thread: 5, .. })
        ));
    }

    #[test]
    fn no_switches_with_a_core_per_thread() {
        let cfg = machine(2);
        let trace: Vec<TraceEvent> = (0..2000).map(|i| TraceEvent::compute(i % 2, 1)).collect();
        let s = run(&cfg, &[trace], 0).unwrap();
        assert_eq!(s.context_switches, 0);
        assert_ne!(s.threads[0].core, s.threads[1].core);
    }

    #[test]
    fn time_sharing_alternates_in_quanta() {
        let mut cfg = one_core();
        cfg.os.quantum_cycles = 1000;
        cfg.os.context_switch_cycles = 50;
        let trace: Vec<TraceEvent> = (0..6000).map(|i| TraceEvent::compute(i % 2, 1)).collect();
        let out = run_with(
            &cfg,
            &[trace],
            0,
            RunOptions {
                record_events: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        let switches: Vec<String> = out
            .events
            .unwrap()
            .lines()
            .filter(|l| l.contains(" switch "))
            .map(str::to_string)
            .collect();
        assert_eq!(switches[0], "0 os core0 switch - T0 ready 0");
        assert_eq!(switches[1], "1000 os core0 switch T0 T1 ready 1050");
        assert_eq!(switches[2], "2050 os core0 switch T1 T0 ready 2100");
        assert_eq!(switches[3], "3100 os core0 switch T0 T1 ready 3150");
        // 3000 cycles of work each, plus five switch gaps
        assert_eq!(out.stats.cycles, 6000 + 5 * 50);
    }

    #[test]
    fn pinned_threads_stay_on_their_core() {
        let mut cfg = machine(2);
        cfg.os.affinity.insert(0, vec![1]);
        cfg.os.affinity.insert(1, vec![1]);
        let trace: Vec<TraceEvent> = (0..100).map(|i| TraceEvent::compute(i % 2, 5)).collect();
        let s = run(&cfg, &[trace], 0).unwrap();
        assert!(s.threads.iter().all(|t| t.core == 1));
    }

    #[test]
    fn tso_forwarding_and_drain_preserve_values() {
        let mut cfg = machine(2);
        for c in &mut cfg.per_core {
            c.consistency_mode = crate::core_model::ConsistencyMode::Tso;
            c.store_buffer_depth = 4;
        }
        let trace = vec![
            TraceEvent::store(0, 0x100, 8, 42),
            TraceEvent::load(0, 0x100, 8),
            TraceEvent::fence(0),
            TraceEvent::load(1, 0x200, 8),
        ];
        let out = run_with(&cfg, &[trace], 0, RunOptions::default()).unwrap();
        assert_eq!(out.load_values[&0], vec![42]);
        assert_eq!(out.read_memory(0x100, 8), 42);
        assert_eq!(out.stats.value_mismatches, 0);
    }

    #[test]
    fn tso_store_buffering_is_observable() {
        use crate::consistency::{enumerate_sc, enumerate_tso, parse_litmus};
        let mut cfg = machine(2);
        for c in &mut cfg.per_core {
            c.consistency_mode = crate::core_model::ConsistencyMode::Tso;
            c.store_buffer_depth = 4;
        }
        let p = parse_litmus("0 S x 1\n0 L y r1\n1 S y 1\n1 L x r2\n").unwrap();
        let o = run_litmus(&cfg, &p, 0).unwrap();
        assert_eq!(o.register_tuple(), "(0,0)");
        assert!(enumerate_tso(&p).unwrap().contains(&o));
        assert!(!enumerate_sc(&p).unwrap().contains(&o));
    }
}
