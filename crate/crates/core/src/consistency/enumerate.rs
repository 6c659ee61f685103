use std::collections::{BTreeMap, HashSet};

use super::{Instr, LitmusError, LitmusProgram, Model, Outcome, OutcomeSet};

#[derive(Debug, Clone, Copy)]
enum Op {
    St(usize, i64),
    Ld(usize, usize),
    F,
}

/// Each load writes its own slot; a register's final value is the slot of
/// the last load to it in program order.
struct Compiled {
    threads: Vec<Vec<Op>>,
    vars: Vec<String>,
    slots: usize,
    final_slot: BTreeMap<String, usize>,
}

impl Compiled {
    fn new(p: &LitmusProgram) -> Result<Self, LitmusError> {
        p.validate()?;
        let vars: Vec<String> = p.vars().into_iter().collect();
        let vi: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut slots = 0;
        let mut final_slot = BTreeMap::new();
        let threads = p
            .threads
            .iter()
            .map(|t| {
                t.iter()
                    .map(|i| match i {
                        Instr::Store { var, value } => Op::St(vi[var.as_str()], *value),
                        Instr::Load { var, reg } => {
                            final_slot.insert(reg.clone(), slots);
                            slots += 1;
                            Op::Ld(vi[var.as_str()], slots - 1)
                        }
                        Instr::Fence => Op::F,
                    })
                    .collect()
            })
            .collect();
        Ok(Compiled {
            threads,
            vars,
            slots,
            final_slot,
        })
    }

    fn outcome(&self, mem: &[i64], loaded: &[i64]) -> Outcome {
        Outcome {
            registers: self.final_slot.iter().map(|(r, &s)| (r.clone(), loaded[s])).collect(),
            memory: self.vars.iter().cloned().zip(mem.iter().copied()).collect(),
        }
    }
}

pub fn enumerate(program: &LitmusProgram, model: Model) -> Result<OutcomeSet, LitmusError> {
    match model {
        Model::Sc => enumerate_sc(program),
        Model::Tso => enumerate_tso(program),
        Model::Weak => enumerate_weak(program),
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct ScState {
    pcs: Vec<usize>,
    mem: Vec<i64>,
    regs: Vec<i64>,
}

/// Every interleaving that keeps each thread in program order; a load
/// reads the latest store before it.
pub fn enumerate_sc(program: &LitmusProgram) -> Result<OutcomeSet, LitmusError> {
    let c = Compiled::new(program)?;
    let mut out = OutcomeSet::new();
    let mut seen = HashSet::new();
    let start = ScState {
        pcs: vec![0; c.threads.len()],
        mem: vec![0; c.vars.len()],
        regs: vec![0; c.slots],
    };
    sc_step(&c, start, &mut seen, &mut out);
    Ok(out)
}

fn sc_step(c: &Compiled, st: ScState, seen: &mut HashSet<ScState>, out: &mut OutcomeSet) {
    if !seen.insert(st.clone()) {
        return;
    }
    let mut moved = false;
    for (t, ops) in c.threads.iter().enumerate() {
        let Some(op) = ops.get(st.pcs[t]) else { continue };
        moved = true;
        let mut next = st.clone();
        next.pcs[t] += 1;
        match *op {
            Op::St(v, x) => next.mem[v] = x,
            Op::Ld(v, r) => next.regs[r] = next.mem[v],
            Op::F => {}
        }
        sc_step(c, next, seen, out);
    }
    if !moved {
        out.insert(c.outcome(&st.mem, &st.regs));
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct TsoState {
    pcs: Vec<usize>,
    buffers: Vec<Vec<(usize, i64)>>,
    mem: Vec<i64>,
    regs: Vec<i64>,
}

/// Per-thread FIFO store buffers draining at arbitrary points. Loads take
/// the youngest matching buffered store, else memory. A fence waits for
/// its thread's buffer to empty.
pub fn enumerate_tso(program: &LitmusProgram) -> Result<OutcomeSet, LitmusError> {
    let c = Compiled::new(program)?;
    let mut out = OutcomeSet::new();
    let mut seen = HashSet::new();
    let n = c.threads.len();
    let start = TsoState {
        pcs: vec![0; n],
        buffers: vec![Vec::new(); n],
        mem: vec![0; c.vars.len()],
        regs: vec![0; c.slots],
    };
    tso_step(&c, start, &mut seen, &mut out);
    Ok(out)
}

fn tso_step(c: &Compiled, st: TsoState, seen: &mut HashSet<TsoState>, out: &mut OutcomeSet) {
    if !seen.insert(st.clone()) {
        return;
    }
    let mut moved = false;
    for t in 0..c.threads.len() {
        if let Some(&(v, x)) = st.buffers[t].first() {
            moved = true;
            let mut next = st.clone();
            next.buffers[t].remove(0);
            next.mem[v] = x;
            tso_step(c, next, seen, out);
        }
        let Some(op) = c.threads[t].get(st.pcs[t]) else {
            continue;
        };
        let mut next = st.clone();
        match *op {
            Op::St(v, x) => next.buffers[t].push((v, x)),
            Op::Ld(v, r) => {
                let forwarded = st.buffers[t].iter().rev().find(|(bv, _)| *bv == v);
                next.regs[r] = forwarded.map_or(st.mem[v], |&(_, x)| x);
            }
            Op::F => {
                if !st.buffers[t].is_empty() {
                    continue;
                }
            }
        }
        moved = true;
        next.pcs[t] += 1;
        tso_step(c, next, seen, out);
    }
    if !moved {
        out.insert(c.outcome(&st.mem, &st.regs));
    }
}

/// `deps[t][i]`: instructions of thread `t` that must execute before `i`.
fn weak_dependencies(ops: &[Op]) -> Vec<u32> {
    (0..ops.len())
        .map(|i| {
            let mut mask = 0u32;
            for j in 0..i {
                let ordered = match (ops[j], ops[i]) {
                    (Op::F, _) | (_, Op::F) => true,
                    (Op::St(a, _) | Op::Ld(a, _), Op::St(b, _) | Op::Ld(b, _)) => a == b,
                };
                if ordered {
                    mask |= 1 << j;
                }
            }
            mask
        })
        .collect()
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct WeakState {
    done: Vec<u32>,
    mem: Vec<i64>,
    regs: Vec<i64>,
}

/// Within a thread, any order that keeps same-variable accesses in program
/// order and moves nothing across a fence; all threads share one memory,
/// so fences are globally ordered.
pub fn enumerate_weak(program: &LitmusProgram) -> Result<OutcomeSet, LitmusError> {
    let c = Compiled::new(program)?;
    let deps: Vec<Vec<u32>> = c.threads.iter().map(|t| weak_dependencies(t)).collect();
    let mut out = OutcomeSet::new();
    let mut seen = HashSet::new();
    let start = WeakState {
        done: vec![0; c.threads.len()],
        mem: vec![0; c.vars.len()],
        regs: vec![0; c.slots],
    };
    weak_step(&c, &deps, start, &mut seen, &mut out);
    Ok(out)
}

fn weak_step(c: &Compiled, deps: &[Vec<u32>], st: WeakState, seen: &mut HashSet<WeakState>, out: &mut OutcomeSet) {
    if !seen.insert(st.clone()) {
        return;
    }
    let mut moved = false;
    for (t, ops) in c.threads.iter().enumerate() {
        for (i, op) in ops.iter().enumerate() {
            let bit = 1 << i;
            if st.done[t] & bit != 0 || deps[t][i] & !st.done[t] != 0 {
                continue;
            }
            moved = true;
            let mut next = st.clone();
            next.done[t] |= bit;
            match *op {
                Op::St(v, x) => next.mem[v] = x,
                Op::Ld(v, r) => next.regs[r] = next.mem[v],
                Op::F => {}
            }
            weak_step(c, deps, next, seen, out);
        }
    }
    if !moved {
        out.insert(c.outcome(&st.mem, &st.regs));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::parse_litmus;

    fn tuples(set: &OutcomeSet) -> Vec<String> {
        let mut v: Vec<String> = set.iter().map(Outcome::register_tuple).collect();
        v.dedup();
        v
    }

    const SB: &str = "0 S x 1\n0 L y r1\n1 S y 1\n1 L x r2\n";
    const SB_FENCED: &str = "0 S x 1\n0 F\n0 L y r1\n1 S y 1\n1 F\n1 L x r2\n";
    const MP: &str = "0 S x 1\n0 S y 1\n1 L y r1\n1 L x r2\n";
    const MP_FENCED: &str = "0 S x 1\n0 F\n0 S y 1\n1 L y r1\n1 F\n1 L x r2\n";

    #[test]
    fn single_thread() {
        let p = parse_litmus("0 S x 1\n0 L x r1\n").unwrap();
        for m in Model::ALL {
            assert_eq!(tuples(&enumerate(&p, m).unwrap()), vec!["(1)"]);
        }
    }

    #[test]
    fn store_buffering() {
        let p = parse_litmus(SB).unwrap();
        assert_eq!(tuples(&enumerate_sc(&p).unwrap()), vec!["(0,1)", "(1,0)", "(1,1)"]);
        assert_eq!(
            tuples(&enumerate_tso(&p).unwrap()),
            vec!["(0,0)", "(0,1)", "(1,0)", "(1,1)"]
        );
        let fenced = parse_litmus(SB_FENCED).unwrap();
        assert!(!tuples(&enumerate_tso(&fenced).unwrap()).contains(&"(0,0)".to_string()));
    }

    #[test]
    fn message_passing() {
        let p = parse_litmus(MP).unwrap();
        let bad = "(1,0)".to_string();
        assert!(!tuples(&enumerate_sc(&p).unwrap()).contains(&bad));
        assert!(!tuples(&enumerate_tso(&p).unwrap()).contains(&bad));
        assert!(tuples(&enumerate_weak(&p).unwrap()).contains(&bad));
        let fenced = parse_litmus(MP_FENCED).unwrap();
        assert!(!tuples(&enumerate_weak(&fenced).unwrap()).contains(&bad));
    }

    #[test]
    fn weak_keeps_same_variable_order() {
        let p = parse_litmus("0 S x 1\n0 S x 2\n1 L x r1\n1 L x r2\n").unwrap();
        let set = enumerate_weak(&p).unwrap();
        // coherence: r1=2, r2=1 would need the later store to be seen first
        assert!(!tuples(&set).contains(&"(2,1)".to_string()));
        assert!(set.iter().all(|o| o.memory["x"] == 2));
    }

    #[test]
    fn disjoint_threads_have_one_outcome() {
        let p = parse_litmus("0 S x 1\n0 L x r1\n1 S y 2\n1 L y r2\n").unwrap();
        for m in Model::ALL {
            let s = enumerate(&p, m).unwrap();
            assert_eq!(s.len(), 1);
            assert_eq!(tuples(&s), vec!["(1,2)"]);
        }
    }

    #[test]
    fn empty_program_has_one_empty_outcome() {
        let p = LitmusProgram::default();
        for m in Model::ALL {
            assert_eq!(enumerate(&p, m).unwrap().len(), 1);
        }
    }
}
