//! Exhaustive outcome enumeration for small litmus programs under SC, TSO
//! and weak ordering. Untimed and independent of the cycle simulator.

mod enumerate;
mod program;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enumerate::{enumerate, enumerate_sc, enumerate_tso, enumerate_weak};
pub use program::{parse_litmus, random_program, Instr, LitmusProgram, MAX_INSTRUCTIONS, MAX_THREADS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LitmusError {
    #[error("program too large: {threads} threads, longest thread {instructions} instructions (limit {MAX_THREADS} x {MAX_INSTRUCTIONS})")]
    ProgramTooLarge { threads: usize, instructions: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("register {reg} is written by more than one thread")]
    SharedRegister { reg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    Sc,
    Tso,
    Weak,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Sc, Model::Tso, Model::Weak];

    pub fn name(self) -> &'static str {
        match self {
            Model::Sc => "SC",
            Model::Tso => "TSO",
            Model::Weak => "weak",
        }
    }
}

/// Final register and memory valuation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Outcome {
    pub registers: BTreeMap<String, i64>,
    pub memory: BTreeMap<String, i64>,
}

impl Outcome {
    /// `r1=0 r2=1`, registers in name order.
    pub fn register_string(&self) -> String {
        let parts: Vec<String> = self.registers.iter().map(|(r, v)| format!("{r}={v}")).collect();
        parts.join(" ")
    }

    /// `(0,1)`, register values in name order.
    pub fn register_tuple(&self) -> String {
        let parts: Vec<String> = self.registers.values().map(|v| v.to_string()).collect();
        format!("({})", parts.join(","))
    }
}

pub type OutcomeSet = BTreeSet<Outcome>;

fn register_lines(set: &OutcomeSet) -> BTreeSet<String> {
    set.iter().map(Outcome::register_string).collect()
}

/// One outcome per line as sorted `reg=val` pairs, lexicographically
/// ordered and deduplicated. Programs without loads list memory instead.
pub fn format_outcomes(set: &OutcomeSet) -> String {
    let lines: BTreeSet<String> = if set.iter().all(|o| o.registers.is_empty()) {
        set.iter()
            .map(|o| {
                let parts: Vec<String> = o.memory.iter().map(|(v, x)| format!("{v}={x}")).collect();
                parts.join(" ")
            })
            .collect()
    } else {
        register_lines(set)
    };
    let mut out = String::new();
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    out
}

/// Full report for a program under the requested models. With all three,
/// appends inclusion verdicts and a per-outcome allowed/forbidden table.
pub fn litmus_report(program: &LitmusProgram, models: &[Model]) -> Result<String, LitmusError> {
    let mut sets = Vec::with_capacity(models.len());
    for &m in models {
        sets.push((m, enumerate(program, m)?));
    }
    let mut out = String::new();
    for (m, set) in &sets {
        let body = format_outcomes(set);
        let _ = writeln!(out, "[{}] {} outcomes", m.name(), body.lines().count());
        out.push_str(&body);
    }
    if models.len() == Model::ALL.len() {
        let get = |m: Model| &sets.iter().find(|(x, _)| *x == m).unwrap().1;
        let (sc, tso, weak) = (get(Model::Sc), get(Model::Tso), get(Model::Weak));
        let verdict = |a: &OutcomeSet, b: &OutcomeSet| if a.is_subset(b) { "holds" } else { "VIOLATED" };
        let _ = writeln!(out, "SC subset of TSO: {}", verdict(sc, tso));
        let _ = writeln!(out, "TSO subset of weak: {}", verdict(tso, weak));
        let mut tuples: BTreeMap<String, [bool; 3]> = BTreeMap::new();
        for (i, set) in [sc, tso, weak].into_iter().enumerate() {
            for o in set {
                tuples.entry(o.register_tuple()).or_default()[i] = true;
            }
        }
        for (tuple, seen) in tuples {
            let words: Vec<String> = Model::ALL
                .iter()
                .zip(seen)
                .map(|(m, s)| format!("{} under {}", if s { "allowed" } else { "forbidden" }, m.name()))
                .collect();
            let _ = writeln!(out, "{tuple}: {}", words.join(", "));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SB: &str = "0 S x 1\n0 L y r1\n1 S y 1\n1 L x r2\n";

    #[test]
    fn sb_report_under_all_models() {
        let p = parse_litmus(SB).unwrap();
        let r = litmus_report(&p, &Model::ALL).unwrap();
        assert!(r.contains("(0,0): forbidden under SC, allowed under TSO, allowed under weak"));
        assert!(r.contains("(1,1): allowed under SC, allowed under TSO, allowed under weak"));
        assert!(r.contains("SC subset of TSO: holds"));
    }

    #[test]
    fn outcome_lines_sorted() {
        let p = parse_litmus(SB).unwrap();
        let s = format_outcomes(&enumerate_sc(&p).unwrap());
        assert_eq!(s, "r1=0 r2=1\nr1=1 r2=0\nr1=1 r2=1\n");
    }

    #[test]
    fn store_only_program_lists_memory() {
        let p = parse_litmus("0 S x 1\n1 S x 2\n").unwrap();
        let s = format_outcomes(&enumerate_sc(&p).unwrap());
        assert_eq!(s, "x=1\nx=2\n");
    }
}
