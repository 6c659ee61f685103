use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{DramConfig, RowPolicy, TimingParams};

use super::scheduler::{schedule_next, FairnessTracker, ScheduleContext};
use super::{decode_address, BankState, CommandKind, DramCommand, DramError, MemRequest, RequestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowOutcome {
    Hit,
    /// Bank was precharged.
    Closed,
    /// Another row was open.
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceResult {
    pub commands: Vec<DramCommand>,
    pub data_start: u64,
    pub finish: u64,
    pub outcome: RowOutcome,
}

/// Issues the commands for `req` starting no earlier than `now`, updating
/// the bank and the channel's data-bus reservation.
pub fn service(
    req: &MemRequest,
    bank: &mut BankState,
    bus_free: &mut u64,
    timing: &TimingParams,
    now: u64,
) -> ServiceResult {
    let start = now.max(bank.ready);
    let row = req.decoded.row;
    let mut commands = Vec::with_capacity(3);
    let cmd = |cycle, kind, column| DramCommand {
        cycle,
        channel: req.decoded.channel,
        bank: req.bank_slot as u64,
        kind,
        row,
        column,
    };
    let (earliest_cas, outcome) = match bank.open_row {
        Some(open) if open == row => (start, RowOutcome::Hit),
        Some(_) => {
            commands.push(cmd(start, CommandKind::Pre, None));
            bank.last_pre = Some(start);
            let act = start + timing.t_rp;
            commands.push(cmd(act, CommandKind::Act, None));
            bank.last_act = Some(act);
            (act + timing.t_rcd, RowOutcome::Conflict)
        }
        None => {
            commands.push(cmd(start, CommandKind::Act, None));
            bank.last_act = Some(start);
            (start + timing.t_rcd, RowOutcome::Closed)
        }
    };
    let cas = earliest_cas.max(bus_free.saturating_sub(timing.t_cl));
    let kind = match req.kind {
        RequestKind::Read => CommandKind::Rd,
        RequestKind::Write => CommandKind::Wr,
    };
    commands.push(cmd(cas, kind, Some(req.decoded.column)));
    let data_start = cas + timing.t_cl;
    let finish = data_start + timing.t_bl;
    bank.open_row = Some(row);
    bank.last_cas = Some(cas);
    bank.ready = finish;
    bank.last_access_end = finish;
    *bus_free = finish;
    ServiceResult {
        commands,
        data_start,
        finish,
        outcome,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub id: u64,
    pub thread: usize,
    pub address: u64,
    pub arrival: u64,
    pub finish: u64,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadDramStats {
    pub row_hits: u64,
    pub row_misses: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramStats {
    pub reads: u64,
    pub writes: u64,
    pub row_hits: u64,
    /// Accesses to a precharged bank.
    pub row_closed: u64,
    pub row_conflicts: u64,
    /// Sum over requests of completion minus arrival.
    pub total_latency: u64,
    pub per_thread: BTreeMap<usize, ThreadDramStats>,
}

impl DramStats {
    pub fn row_misses(&self) -> u64 {
        self.row_closed + self.row_conflicts
    }
}

/// All channels of the memory system. Each channel issues at most one
/// request per cycle.
#[derive(Debug, Clone)]
pub struct DramController {
    cfg: DramConfig,
    block_size: u64,
    banks_per_channel: usize,
    banks: Vec<Vec<BankState>>,
    bus_free: Vec<u64>,
    queues: Vec<Vec<MemRequest>>,
    fairness: FairnessTracker,
    commands: Vec<DramCommand>,
    stats: DramStats,
    next_id: u64,
}

impl DramController {
    pub fn new(cfg: &DramConfig, block_size: u64) -> Self {
        let channels = cfg.geometry.channels as usize;
        let banks_per_channel = (cfg.geometry.ranks * cfg.geometry.banks) as usize;
        DramController {
            cfg: cfg.clone(),
            block_size,
            banks_per_channel,
            banks: vec![vec![BankState::default(); banks_per_channel]; channels],
            bus_free: vec![0; channels],
            queues: vec![Vec::new(); channels],
            fairness: FairnessTracker::default(),
            commands: Vec::new(),
            stats: DramStats::default(),
            next_id: 0,
        }
    }

    pub fn enqueue(&mut self, address: u64, thread: usize, kind: RequestKind, arrival: u64) -> Result<u64, DramError> {
        let decoded = decode_address(address, self.cfg.interleaving, &self.cfg.geometry, self.block_size)?;
        let id = self.next_id;
        self.next_id += 1;
        let bank_slot = (decoded.rank * self.cfg.geometry.banks + decoded.bank) as usize;
        self.queues[decoded.channel as usize].push(MemRequest {
            id,
            address,
            decoded,
            bank_slot,
            thread,
            arrival,
            kind,
        });
        Ok(id)
    }

    pub fn is_idle(&self) -> bool {
        self.queues.iter().all(Vec::is_empty)
    }

    pub fn queued(&self) -> usize {
        self.queues.iter().map(Vec::len).sum()
    }

    pub fn stats(&self) -> &DramStats {
        &self.stats
    }

    pub fn commands(&self) -> &[DramCommand] {
        &self.commands
    }

    pub fn bank(&self, channel: usize, slot: usize) -> &BankState {
        &self.banks[channel][slot]
    }

    pub fn banks_per_channel(&self) -> usize {
        self.banks_per_channel
    }

    /// Command log sorted by cycle, channel and bank.
    pub fn command_log(&self) -> String {
        let mut cmds = self.commands.clone();
        cmds.sort_by_key(|c| (c.cycle, c.channel, c.bank));
        let mut out = String::new();
        for c in &cmds {
            let _ = writeln!(out, "{c}");
        }
        out
    }

    fn nominal_service(&self) -> u64 {
        let t = &self.cfg.timing;
        t.t_rcd + t.t_cl + t.t_bl
    }

    fn apply_timeouts(&mut self, channel: usize, now: u64) {
        let RowPolicy::Timeout { cycles } = self.cfg.row_policy else {
            return;
        };
        for (slot, bank) in self.banks[channel].iter_mut().enumerate() {
            let Some(row) = bank.open_row else { continue };
            let close_at = bank.last_access_end + cycles;
            if now >= close_at && bank.ready <= close_at {
                self.commands.push(DramCommand {
                    cycle: close_at,
                    channel: channel as u64,
                    bank: slot as u64,
                    kind: CommandKind::Pre,
                    row,
                    column: None,
                });
                bank.open_row = None;
                bank.last_pre = Some(close_at);
                bank.ready = close_at + self.cfg.timing.t_rp;
            }
        }
    }

    /// Advances every channel by one scheduling decision at `now`.
    pub fn tick(&mut self, now: u64) -> Vec<Completion> {
        let mut done = Vec::new();
        for ch in 0..self.queues.len() {
            self.apply_timeouts(ch, now);
            let issuable: Vec<usize> = self.queues[ch]
                .iter()
                .enumerate()
                .filter(|(_, r)| r.arrival <= now && self.banks[ch][r.bank_slot].ready <= now)
                .map(|(i, _)| i)
                .collect();
            if issuable.is_empty() {
                continue;
            }
            let candidates: Vec<MemRequest> = issuable.iter().map(|&i| self.queues[ch][i]).collect();
            let ctx = ScheduleContext {
                banks: &self.banks[ch],
                fairness: &self.fairness,
                threshold: self.cfg.thread_fair_threshold,
                now,
                nominal_service: self.nominal_service(),
            };
            let Some(pick) = schedule_next(&candidates, self.cfg.scheduler, &ctx) else {
                continue;
            };
            let req = self.queues[ch].remove(issuable[pick]);
            let bank = &mut self.banks[ch][req.bank_slot];
            let result = service(&req, bank, &mut self.bus_free[ch], &self.cfg.timing, now);
            self.commands.extend(result.commands.iter().copied());

            if self.cfg.row_policy == RowPolicy::ClosedRow {
                let same_row_queued = self.queues[ch]
                    .iter()
                    .any(|r| r.arrival <= now && r.bank_slot == req.bank_slot && r.decoded.row == req.decoded.row);
                if !same_row_queued {
                    let bank = &mut self.banks[ch][req.bank_slot];
                    self.commands.push(DramCommand {
                        cycle: result.finish,
                        channel: ch as u64,
                        bank: req.bank_slot as u64,
                        kind: CommandKind::Pre,
                        row: req.decoded.row,
                        column: None,
                    });
                    bank.open_row = None;
                    bank.last_pre = Some(result.finish);
                    bank.ready = result.finish + self.cfg.timing.t_rp;
                }
            }

            let start = result.commands[0].cycle;
            self.fairness.record(req.thread, req.arrival, start, result.finish);
            let s = &mut self.stats;
            match req.kind {
                RequestKind::Read => s.reads += 1,
                RequestKind::Write => s.writes += 1,
            }
            let per = s.per_thread.entry(req.thread).or_default();
            match result.outcome {
                RowOutcome::Hit => {
                    s.row_hits += 1;
                    per.row_hits += 1;
                }
                RowOutcome::Closed => {
                    s.row_closed += 1;
                    per.row_misses += 1;
                }
                RowOutcome::Conflict => {
                    s.row_conflicts += 1;
                    per.row_misses += 1;
                }
            }
            s.total_latency += result.finish - req.arrival;
            done.push(Completion {
                id: req.id,
                thread: req.thread,
                address: req.address,
                arrival: req.arrival,
                finish: result.finish,
                outcome: result.outcome,
            });
        }
        done
    }

    /// Earliest cycle at or after `now` when some queued request could issue.
    pub fn next_issue_cycle(&self, now: u64) -> Option<u64> {
        self.queues
            .iter()
            .enumerate()
            .flat_map(|(ch, q)| q.iter().map(move |r| (ch, r)))
            .map(|(ch, r)| r.arrival.max(self.banks[ch][r.bank_slot].ready).max(now))
            .min()
    }

    /// Services everything queued, starting at `start`.
    pub fn run_to_idle(&mut self, start: u64) -> Vec<Completion> {
        let mut now = start;
        let mut done = Vec::new();
        while let Some(next) = self.next_issue_cycle(now) {
            now = next;
            done.extend(self.tick(now));
            now += 1;
        }
        done
    }
}
