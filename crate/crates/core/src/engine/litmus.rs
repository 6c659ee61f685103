use std::collections::BTreeMap;

use crate::config::SystemConfig;
use crate::consistency::{Instr, LitmusProgram, Outcome};
use crate::trace::TraceEvent;

use super::{run_with, EngineError, RunOptions};

/// Address of each program variable: one block apiece, in name order.
pub fn litmus_layout(program: &LitmusProgram, block_size: u64) -> BTreeMap<String, u64> {
    program
        .vars()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i as u64 * block_size))
        .collect()
}

/// The program as a trace: 8-byte loads and stores, thread `t` as trace
/// thread `t`.
pub fn litmus_trace(program: &LitmusProgram, block_size: u64) -> Vec<TraceEvent> {
    let layout = litmus_layout(program, block_size);
    let mut out = Vec::new();
    for (t, thread) in program.threads.iter().enumerate() {
        for i in thread {
            out.push(match i {
                Instr::Store { var, value } => TraceEvent::store(t, layout[var], 8, *value as u64),
                Instr::Load { var, .. } => TraceEvent::load(t, layout[var], 8),
                Instr::Fence => TraceEvent::fence(t),
            });
        }
    }
    out
}

/// Runs the program through the cycle simulator and reads back the final
/// registers and memory.
pub fn run_litmus(config: &SystemConfig, program: &LitmusProgram, seed: u64) -> Result<Outcome, EngineError> {
    let bs = config.block_size();
    let layout = litmus_layout(program, bs);
    let out = run_with(config, &[litmus_trace(program, bs)], seed, RunOptions::default())?;
    let mut registers = BTreeMap::new();
    for (t, thread) in program.threads.iter().enumerate() {
        let mut values = out.load_values.get(&t).map(|v| v.iter()).into_iter().flatten();
        for i in thread {
            if let Instr::Load { reg, .. } = i {
                let v = values.next().copied().unwrap_or_default();
                registers.insert(reg.clone(), v as i64);
            }
        }
    }
    let memory = layout
        .iter()
        .map(|(v, &a)| (v.clone(), out.read_memory(a, 8) as i64))
        .collect();
    Ok(Outcome { registers, memory })
}
