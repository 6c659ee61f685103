use std::collections::BTreeMap;

use crate::config::SchedulerPolicy;

use super::{BankState, MemRequest};

/// Per-thread queueing history used by the thread-fair policy.
///
/// A thread's slowdown estimate is its accumulated latency (queueing plus
/// service) over its accumulated service time. Requests still waiting count
/// their queueing delay so far against one nominal service time.
#[derive(Debug, Clone, Default)]
pub struct FairnessTracker {
    latency: BTreeMap<usize, u64>,
    service: BTreeMap<usize, u64>,
}

impl FairnessTracker {
    pub fn record(&mut self, thread: usize, arrival: u64, start: u64, finish: u64) {
        *self.latency.entry(thread).or_default() += finish - arrival;
        *self.service.entry(thread).or_default() += finish - start;
    }

    pub fn estimates(&self, queue: &[MemRequest], now: u64, nominal_service: u64) -> BTreeMap<usize, f64> {
        let mut latency = self.latency.clone();
        let mut service = self.service.clone();
        for r in queue {
            *latency.entry(r.thread).or_default() += now.saturating_sub(r.arrival) + nominal_service;
            *service.entry(r.thread).or_default() += nominal_service;
        }
        latency
            .into_iter()
            .map(|(t, l)| {
                let s = service.get(&t).copied().unwrap_or(0).max(1);
                (t, l as f64 / s as f64)
            })
            .collect()
    }
}

pub struct ScheduleContext<'a> {
    pub banks: &'a [BankState],
    pub fairness: &'a FairnessTracker,
    pub threshold: f64,
    pub now: u64,
    pub nominal_service: u64,
}

fn oldest<'r>(it: impl Iterator<Item = (usize, &'r MemRequest)>) -> Option<usize> {
    it.min_by_key(|(_, r)| (r.arrival, r.id)).map(|(i, _)| i)
}

fn fr_fcfs(queue: &[MemRequest], banks: &[BankState]) -> Option<usize> {
    let hits = queue
        .iter()
        .enumerate()
        .filter(|(_, r)| banks[r.bank_slot].open_row == Some(r.decoded.row));
    oldest(hits).or_else(|| oldest(queue.iter().enumerate()))
}

/// Picks among issuable requests; returns an index into `queue`.
pub fn schedule_next(queue: &[MemRequest], policy: SchedulerPolicy, ctx: &ScheduleContext<'_>) -> Option<usize> {
    match policy {
        SchedulerPolicy::Fcfs => oldest(queue.iter().enumerate()),
        SchedulerPolicy::FrFcfs => fr_fcfs(queue, ctx.banks),
        SchedulerPolicy::ThreadFair => {
            let estimates = ctx.fairness.estimates(queue, ctx.now, ctx.nominal_service);
            let worst = estimates
                .iter()
                .filter(|(t, _)| queue.iter().any(|r| r.thread == **t))
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)));
            match worst {
                Some((&t, &s)) if s > ctx.threshold => oldest(queue.iter().enumerate().filter(|(_, r)| r.thread == t)),
                _ => fr_fcfs(queue, ctx.banks),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::{DecodedAddress, RequestKind};

    fn req(id: u64, thread: usize, row: u64, arrival: u64) -> MemRequest {
        MemRequest {
            id,
            address: 0,
            decoded: DecodedAddress {
                row,
                ..Default::default()
            },
            bank_slot: 0,
            thread,
            arrival,
            kind: RequestKind::Read,
        }
    }

    fn drain(mut queue: Vec<MemRequest>, policy: SchedulerPolicy, open: Option<u64>) -> Vec<u64> {
        let mut banks = vec![BankState::default()];
        banks[0].open_row = open;
        let fairness = FairnessTracker::default();
        let mut order = Vec::new();
        while !queue.is_empty() {
            let ctx = ScheduleContext {
                banks: &banks,
                fairness: &fairness,
                threshold: 1.5,
                now: 0,
                nominal_service: 24,
            };
            let i = schedule_next(&queue, policy, &ctx).unwrap();
            let r = queue.remove(i);
            banks[0].open_row = Some(r.decoded.row);
            order.push(r.id);
        }
        order
    }

    #[test]
    fn fr_fcfs_prefers_row_hits() {
        let q = vec![req(0, 0, 5, 0), req(1, 0, 9, 1), req(2, 0, 5, 2)];
        assert_eq!(drain(q.clone(), SchedulerPolicy::FrFcfs, Some(5)), vec![0, 2, 1]);
        assert_eq!(drain(q, SchedulerPolicy::Fcfs, Some(5)), vec![0, 1, 2]);
    }

    #[test]
    fn single_request_under_every_policy() {
        for p in [
            SchedulerPolicy::Fcfs,
            SchedulerPolicy::FrFcfs,
            SchedulerPolicy::ThreadFair,
        ] {
            assert_eq!(drain(vec![req(7, 3, 1, 0)], p, None), vec![7]);
        }
    }

    #[test]
    fn thread_fair_rescues_starved_thread() {
        // thread 1 has waited long; thread 0 keeps hitting the open row
        let mut fairness = FairnessTracker::default();
        fairness.record(0, 0, 0, 24);
        fairness.record(1, 0, 200, 224);
        let mut banks = vec![BankState::default()];
        banks[0].open_row = Some(5);
        let queue = vec![req(0, 0, 5, 300), req(1, 1, 9, 301)];
        let ctx = ScheduleContext {
            banks: &banks,
            fairness: &fairness,
            threshold: 1.5,
            now: 310,
            nominal_service: 24,
        };
        assert_eq!(schedule_next(&queue, SchedulerPolicy::FrFcfs, &ctx), Some(0));
        assert_eq!(schedule_next(&queue, SchedulerPolicy::ThreadFair, &ctx), Some(1));
    }
}
