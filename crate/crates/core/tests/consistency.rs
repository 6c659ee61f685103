use std::collections::BTreeMap;

use mcsim_core::config::{validate_config, SystemConfig};
use mcsim_core::consistency::{
    enumerate_sc, enumerate_tso, enumerate_weak, random_program, Instr, LitmusProgram, Outcome, OutcomeSet,
};
use mcsim_core::core_model::ConsistencyMode;
use mcsim_core::engine::run_litmus;
use proptest::prelude::*;

/// Every interleaving, generated as explicit schedules of thread ids and
/// executed from scratch; no state sharing or memoization.
fn brute_force_sc(p: &LitmusProgram) -> OutcomeSet {
    fn schedules(remaining: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.iter().all(|&r| r == 0) {
            out.push(prefix.clone());
            return;
        }
        for t in 0..remaining.len() {
            if remaining[t] > 0 {
                remaining[t] -= 1;
                prefix.push(t);
                schedules(remaining, prefix, out);
                prefix.pop();
                remaining[t] += 1;
            }
        }
    }
    let mut all = Vec::new();
    let mut remaining: Vec<usize> = p.threads.iter().map(Vec::len).collect();
    schedules(&mut remaining, &mut Vec::new(), &mut all);
    let mut set = OutcomeSet::new();
    for s in all {
        let mut memory: BTreeMap<String, i64> = p.vars().into_iter().map(|v| (v, 0)).collect();
        let mut registers = BTreeMap::new();
        let mut pcs = vec![0; p.threads.len()];
        for t in s {
            match &p.threads[t][pcs[t]] {
                Instr::Store { var, value } => {
                    memory.insert(var.clone(), *value);
                }
                Instr::Load { var, reg } => {
                    registers.insert(reg.clone(), memory[var]);
                }
                Instr::Fence => {}
            }
            pcs[t] += 1;
        }
        set.insert(Outcome { registers, memory });
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sc_matches_brute_force(seed in any::<u64>()) {
        let p = random_program(seed);
        prop_assert_eq!(enumerate_sc(&p).unwrap(), brute_force_sc(&p));
    }

    #[test]
    fn models_nest(seed in any::<u64>()) {
        let p = random_program(seed);
        let sc = enumerate_sc(&p).unwrap();
        let tso = enumerate_tso(&p).unwrap();
        let weak = enumerate_weak(&p).unwrap();
        prop_assert!(sc.is_subset(&tso));
        prop_assert!(tso.is_subset(&weak));
    }
}

fn machine(mode: ConsistencyMode) -> SystemConfig {
    let mut raw = SystemConfig::with_cores(3);
    for c in &mut raw.per_core {
        c.consistency_mode = mode;
        c.store_buffer_depth = 4;
    }
    validate_config(raw).unwrap()
}

#[test]
fn simulated_outcomes_are_enumerated() {
    for seed in 0..40 {
        let p = random_program(seed);
        let sc = run_litmus(&machine(ConsistencyMode::Sc), &p, seed).unwrap();
        assert!(enumerate_sc(&p).unwrap().contains(&sc), "SC seed {seed}: {sc:?}\n{p}");
        let tso = run_litmus(&machine(ConsistencyMode::Tso), &p, seed).unwrap();
        assert!(
            enumerate_tso(&p).unwrap().contains(&tso),
            "TSO seed {seed}: {tso:?}\n{p}"
        );
    }
}
