use std::collections::BTreeMap;

use crate::config::TimingParams;

use super::{CommandKind, DramCommand};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub cycle: u64,
    pub channel: u64,
    pub bank: u64,
    pub message: String,
}

#[derive(Default)]
struct BankTrack {
    open: Option<u64>,
    act: Option<u64>,
    pre: Option<u64>,
    data_end: u64,
}

/// Replays a command log and reports every timing-rule breach: ACT only on
/// a precharged bank at least t_rp after PRE, column commands on the open
/// row at least t_rcd after ACT, PRE only after the last burst, and
/// disjoint data bursts per channel.
pub fn audit_commands(commands: &[DramCommand], timing: &TimingParams) -> Vec<Violation> {
    let mut sorted: Vec<(usize, &DramCommand)> = commands.iter().enumerate().collect();
    sorted.sort_by_key(|(i, c)| (c.cycle, *i));
    let mut banks: BTreeMap<(u64, u64), BankTrack> = BTreeMap::new();
    let mut bursts: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    let mut out = Vec::new();

    for (_, c) in sorted {
        let b = banks.entry((c.channel, c.bank)).or_default();
        let mut fail = |message: String| {
            out.push(Violation {
                cycle: c.cycle,
                channel: c.channel,
                bank: c.bank,
                message,
            })
        };
        match c.kind {
            CommandKind::Act => {
                if let Some(row) = b.open {
                    fail(format!("ACT while row {row} open"));
                }
                if let Some(p) = b.pre {
                    if c.cycle < p + timing.t_rp {
                        fail(format!("ACT {} cycles after PRE", c.cycle - p));
                    }
                }
                b.open = Some(c.row);
                b.act = Some(c.cycle);
            }
            CommandKind::Rd | CommandKind::Wr => {
                if b.open != Some(c.row) {
                    fail(format!("column access to row {} with {:?} open", c.row, b.open));
                }
                if let Some(a) = b.act {
                    if c.cycle < a + timing.t_rcd {
                        fail(format!("column access {} cycles after ACT", c.cycle - a));
                    }
                }
                let start = c.cycle + timing.t_cl;
                b.data_end = b.data_end.max(start + timing.t_bl);
                bursts.entry(c.channel).or_default().push((start, start + timing.t_bl));
            }
            CommandKind::Pre => {
                if b.open.is_none() {
                    fail("PRE on precharged bank".into());
                }
                if c.cycle < b.data_end {
                    fail(format!("PRE before burst ends at {}", b.data_end));
                }
                b.open = None;
                b.pre = Some(c.cycle);
            }
        }
    }

    for (channel, mut list) in bursts {
        list.sort();
        for w in list.windows(2) {
            if w[1].0 < w[0].1 {
                out.push(Violation {
                    cycle: w[1].0,
                    channel,
                    bank: u64::MAX,
                    message: format!("burst [{}, {}) overlaps [{}, {})", w[1].0, w[1].1, w[0].0, w[0].1),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(cycle: u64, bank: u64, kind: CommandKind, row: u64) -> DramCommand {
        DramCommand {
            cycle,
            channel: 0,
            bank,
            kind,
            row,
            column: matches!(kind, CommandKind::Rd | CommandKind::Wr).then_some(0),
        }
    }

    #[test]
    fn clean_log_passes() {
        let t = TimingParams::default();
        let log = [
            c(0, 0, CommandKind::Act, 1),
            c(10, 0, CommandKind::Rd, 1),
            c(24, 0, CommandKind::Pre, 1),
        ];
        assert!(audit_commands(&log, &t).is_empty());
    }

    #[test]
    fn catches_each_rule() {
        let t = TimingParams::default();
        let early_cas = [c(0, 0, CommandKind::Act, 1), c(5, 0, CommandKind::Rd, 1)];
        assert_eq!(audit_commands(&early_cas, &t).len(), 1);
        let double_act = [c(0, 0, CommandKind::Act, 1), c(20, 0, CommandKind::Act, 2)];
        assert_eq!(audit_commands(&double_act, &t).len(), 1);
        let early_pre = [
            c(0, 0, CommandKind::Act, 1),
            c(10, 0, CommandKind::Rd, 1),
            c(22, 0, CommandKind::Pre, 1),
        ];
        assert_eq!(audit_commands(&early_pre, &t).len(), 1);
        let fast_act = [
            c(0, 0, CommandKind::Act, 1),
            c(10, 0, CommandKind::Rd, 1),
            c(24, 0, CommandKind::Pre, 1),
            c(30, 0, CommandKind::Act, 2),
        ];
        assert_eq!(audit_commands(&fast_act, &t).len(), 1);
        let overlap = [
            c(0, 0, CommandKind::Act, 1),
            c(0, 1, CommandKind::Act, 1),
            c(10, 0, CommandKind::Rd, 1),
            c(12, 1, CommandKind::Rd, 1),
        ];
        assert_eq!(audit_commands(&overlap, &t).len(), 1);
    }
}
