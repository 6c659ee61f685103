//! Per-thread access traces: the text format, and synthetic generators.
//!
//! One event per line:
//!
//! ```text
//! # comment
//! T0 L 0x1a40 8
//! T0 S 0x1a40 8 7
//! T1 C 25
//! T1 F
//! ```

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ThreadId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceOp {
    Load { address: u64, size: u64 },
    Store { address: u64, size: u64, value: u64 },
    Compute { cycles: u64 },
    Fence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub thread: ThreadId,
    pub op: TraceOp,
}

impl TraceEvent {
    pub fn load(thread: ThreadId, address: u64, size: u64) -> Self {
        TraceEvent {
            thread,
            op: TraceOp::Load { address, size },
        }
    }

    pub fn store(thread: ThreadId, address: u64, size: u64, value: u64) -> Self {
        TraceEvent {
            thread,
            op: TraceOp::Store { address, size, value },
        }
    }

    pub fn compute(thread: ThreadId, cycles: u64) -> Self {
        TraceEvent {
            thread,
            op: TraceOp::Compute { cycles },
        }
    }

    pub fn fence(thread: ThreadId) -> Self {
        TraceEvent {
            thread,
            op: TraceOp::Fence,
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.thread;
        match self.op {
            TraceOp::Load { address, size } => write!(f, "T{t} L {address:#x} {size}"),
            TraceOp::Store { address, size, value } => write!(f, "T{t} S {address:#x} {size} {value}"),
            TraceOp::Compute { cycles } => write!(f, "T{t} C {cycles}"),
            TraceOp::Fence => write!(f, "T{t} F"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: access of {size} bytes at {address:#x} crosses a block boundary")]
    CrossesBlockBoundary { line: usize, address: u64, size: u64 },
}

fn syntax(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_hex(line: usize, token: &str) -> Result<u64, TraceError> {
    let digits = token
        .strip_prefix("0x")
        .or_else(|| token.strip_prefix("0X"))
        .unwrap_or(token);
    u64::from_str_radix(digits, 16).map_err(|_| syntax(line, format!("bad address `{token}`")))
}

fn parse_dec(line: usize, what: &str, token: &str) -> Result<u64, TraceError> {
    token.parse().map_err(|_| syntax(line, format!("bad {what} `{token}`")))
}

fn check_access(line: usize, address: u64, size: u64, block_size: u64) -> Result<(), TraceError> {
    if size == 0 || !size.is_power_of_two() || size > block_size {
        return Err(syntax(
            line,
            format!("size {size} must be a power of two no larger than {block_size}"),
        ));
    }
    if address % block_size + size > block_size {
        return Err(TraceError::CrossesBlockBoundary { line, address, size });
    }
    Ok(())
}

/// Parses a trace. Line numbers in errors are 1-based.
pub fn parse_trace(text: &str, block_size: u64) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let thread = tokens[0]
            .strip_prefix('T')
            .and_then(|t| t.parse::<ThreadId>().ok())
            .ok_or_else(|| syntax(line, format!("expected thread id, got `{}`", tokens[0])))?;
        let kind = tokens.get(1).copied().unwrap_or("");
        let op = match (kind, tokens.len()) {
            ("L", 4) => {
                let address = parse_hex(line, tokens[2])?;
                let size = parse_dec(line, "size", tokens[3])?;
                check_access(line, address, size, block_size)?;
                TraceOp::Load { address, size }
            }
            ("S", 5) => {
                let address = parse_hex(line, tokens[2])?;
                let size = parse_dec(line, "size", tokens[3])?;
                let value = parse_dec(line, "value", tokens[4])?;
                check_access(line, address, size, block_size)?;
                TraceOp::Store { address, size, value }
            }
            ("C", 3) => {
                let cycles = parse_dec(line, "cycle count", tokens[2])?;
                if cycles == 0 {
                    return Err(syntax(line, "compute cycles must be >= 1"));
                }
                TraceOp::Compute { cycles }
            }
            ("F", 2) => TraceOp::Fence,
            ("L" | "S" | "C" | "F", n) => return Err(syntax(line, format!("wrong field count ({n}) for `{kind}`"))),
            _ => return Err(syntax(line, format!("unknown event kind `{kind}`"))),
        };
        events.push(TraceEvent { thread, op });
    }
    Ok(events)
}

pub fn render_trace(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&ev.to_string());
        out.push('\n');
    }
    out
}

/// Synthetic workload shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TracePattern {
    /// One thread loading `blocks` consecutive blocks from `start`.
    Streaming { thread: ThreadId, start: u64, blocks: u64 },
    /// Loads and stores to random 8-byte words in a block footprint.
    RandomUniform {
        threads: usize,
        events_per_thread: usize,
        footprint_blocks: u64,
        store_fraction: f64,
    },
    /// Threads 0 and 1 alternately store to distinct words. With `padded`
    /// the words sit in different blocks, otherwise in one block.
    FalseSharing { stores_per_thread: usize, padded: bool },
    /// Each thread walks consecutive blocks of its own DRAM row; thread `t`
    /// uses the row starting at `t * row_stride`.
    RowLocal {
        threads: usize,
        accesses_per_thread: usize,
        row_size: u64,
        row_stride: u64,
    },
}

/// Deterministic in `(pattern, block_size, seed)`. Threads are interleaved
/// round-robin in the output.
pub fn generate_trace(pattern: TracePattern, block_size: u64, seed: u64) -> Vec<TraceEvent> {
    match pattern {
        TracePattern::Streaming { thread, start, blocks } => (0..blocks)
            .map(|i| TraceEvent::load(thread, start + i * block_size, 8.min(block_size)))
            .collect(),
        TracePattern::RandomUniform {
            threads,
            events_per_thread,
            footprint_blocks,
            store_fraction,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let words = (block_size / 8).max(1);
            let mut out = Vec::with_capacity(threads * events_per_thread);
            for _ in 0..events_per_thread {
                for t in 0..threads {
                    let block = rng.gen_range(0..footprint_blocks.max(1));
                    let address = block * block_size + rng.gen_range(0..words) * 8;
                    if rng.gen_bool(store_fraction.clamp(0.0, 1.0)) {
                        out.push(TraceEvent::store(t, address, 8, rng.gen_range(1..1u64 << 32)));
                    } else {
                        out.push(TraceEvent::load(t, address, 8));
                    }
                }
            }
            out
        }
        TracePattern::FalseSharing {
            stores_per_thread,
            padded,
        } => {
            let second = if padded { block_size } else { 8 };
            let mut out = Vec::with_capacity(2 * stores_per_thread);
            for i in 0..stores_per_thread as u64 {
                out.push(TraceEvent::store(0, 0, 8, 2 * i + 1));
                out.push(TraceEvent::store(1, second, 8, 2 * i + 2));
            }
            out
        }
        TracePattern::RowLocal {
            threads,
            accesses_per_thread,
            row_size,
            row_stride,
        } => {
            let per_row = (row_size / block_size).max(1);
            let mut out = Vec::with_capacity(threads * accesses_per_thread);
            for i in 0..accesses_per_thread as u64 {
                for t in 0..threads {
                    let address = t as u64 * row_stride + (i % per_row) * block_size;
                    out.push(TraceEvent::load(t, address, 8));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn store_line_maps_fields() {
        let evs = parse_trace("T0 S 0x1a40 8 7", 64).unwrap();
        assert_eq!(evs, vec![TraceEvent::store(0, 0x1a40, 8, 7)]);
    }

    #[test]
    fn empty_and_comment_only_inputs() {
        assert!(parse_trace("", 64).unwrap().is_empty());
        assert!(parse_trace("# nothing\n\n", 64).unwrap().is_empty());
    }

    #[test]
    fn crossing_access_rejected() {
        assert_eq!(
            parse_trace("T0 L 0x3c 8", 64),
            Err(TraceError::CrossesBlockBoundary {
                line: 1,
                address: 0x3c,
                size: 8
            })
        );
        assert!(parse_trace("T0 L 0x38 8", 64).is_ok());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "T0 L 0x0 8\n# c\nT1 X 0x0\n";
        assert!(matches!(parse_trace(text, 64), Err(TraceError::Syntax { line: 3, .. })));
        assert!(matches!(
            parse_trace("Tx L 0x0 8", 64),
            Err(TraceError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace("T0 C 0", 64),
            Err(TraceError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace("T0 L 0x0 3", 64),
            Err(TraceError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn false_sharing_alternates_within_one_block() {
        let evs = generate_trace(
            TracePattern::FalseSharing {
                stores_per_thread: 4,
                padded: false,
            },
            64,
            0,
        );
        assert_eq!(evs.len(), 8);
        for (i, ev) in evs.iter().enumerate() {
            assert_eq!(ev.thread, i % 2);
            let TraceOp::Store { address, .. } = ev.op else {
                panic!("not a store")
            };
            assert_eq!(address, if i % 2 == 0 { 0x00 } else { 0x08 });
        }
    }

    #[test]
    fn streaming_strides_by_block() {
        let evs = generate_trace(
            TracePattern::Streaming {
                thread: 0,
                start: 0,
                blocks: 8,
            },
            64,
            0,
        );
        let addrs: Vec<u64> = evs
            .iter()
            .map(|e| match e.op {
                TraceOp::Load { address, .. } => address,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(addrs, (0..8).map(|i| i * 0x40).collect::<Vec<_>>());
        assert_eq!(addrs[7], 0x1c0);
    }

    #[test]
    fn row_local_stays_in_row() {
        let evs = generate_trace(
            TracePattern::RowLocal {
                threads: 2,
                accesses_per_thread: 40,
                row_size: 2048,
                row_stride: 1 << 16,
            },
            64,
            0,
        );
        for ev in evs {
            let TraceOp::Load { address, .. } = ev.op else {
                unreachable!()
            };
            assert_eq!(address / 2048, ev.thread as u64 * (1 << 16) / 2048);
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let p = TracePattern::RandomUniform {
            threads: 3,
            events_per_thread: 50,
            footprint_blocks: 4,
            store_fraction: 0.5,
        };
        let a = render_trace(&generate_trace(p, 64, 42));
        let b = render_trace(&generate_trace(p, 64, 42));
        assert_eq!(a, b);
        assert_ne!(a, render_trace(&generate_trace(p, 64, 43)));
    }

    fn arb_event() -> impl Strategy<Value = TraceEvent> {
        let thread = 0usize..8;
        prop_oneof![
            (thread.clone(), 0u64..1 << 20, 0u32..4).prop_map(|(t, blk, s)| {
                let size = 1u64 << s;
                TraceEvent::load(t, blk * 64 + (64 - size), size)
            }),
            (thread.clone(), 0u64..1 << 20, any::<u64>()).prop_map(|(t, blk, v)| TraceEvent::store(t, blk * 64, 8, v)),
            (thread.clone(), 1u64..10_000).prop_map(|(t, c)| TraceEvent::compute(t, c)),
            thread.prop_map(TraceEvent::fence),
        ]
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(events in prop::collection::vec(arb_event(), 0..64)) {
            let text = render_trace(&events);
            prop_assert_eq!(parse_trace(&text, 64).unwrap(), events);
        }
    }
}
