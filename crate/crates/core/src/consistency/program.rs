use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LitmusError;

pub const MAX_THREADS: usize = 4;
pub const MAX_INSTRUCTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instr {
    Store { var: String, value: i64 },
    Load { var: String, reg: String },
    Fence,
}

impl Instr {
    pub fn var(&self) -> Option<&str> {
        match self {
            Instr::Store { var, .. } | Instr::Load { var, .. } => Some(var),
            Instr::Fence => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LitmusProgram {
    pub threads: Vec<Vec<Instr>>,
}

impl LitmusProgram {
    pub fn new(threads: Vec<Vec<Instr>>) -> Self {
        LitmusProgram { threads }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.threads
            .iter()
            .flatten()
            .filter_map(|i| i.var().map(str::to_string))
            .collect()
    }

    pub fn regs(&self) -> BTreeSet<String> {
        self.threads
            .iter()
            .flatten()
            .filter_map(|i| match i {
                Instr::Load { reg, .. } => Some(reg.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), LitmusError> {
        let longest = self.threads.iter().map(Vec::len).max().unwrap_or(0);
        if self.threads.len() > MAX_THREADS || longest > MAX_INSTRUCTIONS {
            return Err(LitmusError::ProgramTooLarge {
                threads: self.threads.len(),
                instructions: longest,
            });
        }
        let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
        for (t, thread) in self.threads.iter().enumerate() {
            for i in thread {
                if let Instr::Load { reg, .. } = i {
                    if *owner.entry(reg).or_insert(t) != t {
                        return Err(LitmusError::SharedRegister { reg: reg.clone() });
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for LitmusProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, thread) in self.threads.iter().enumerate() {
            for i in thread {
                match i {
                    Instr::Store { var, value } => writeln!(f, "{t} S {var} {value}")?,
                    Instr::Load { var, reg } => writeln!(f, "{t} L {var} {reg}")?,
                    Instr::Fence => writeln!(f, "{t} F")?,
                }
            }
        }
        Ok(())
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses `<tid> S <var> <int>`, `<tid> L <var> <reg>` and `<tid> F` lines.
/// `#` starts a comment. Thread ids may carry a `T` or `P` prefix.
pub fn parse_litmus(text: &str) -> Result<LitmusProgram, LitmusError> {
    let mut threads: Vec<Vec<Instr>> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| LitmusError::Syntax { line, message };
        let fields: Vec<&str> = body.split_whitespace().collect();
        let tid_text = fields[0].trim_start_matches(['T', 'P']);
        let tid: usize = tid_text
            .parse()
            .map_err(|_| err(format!("bad thread id `{}`", fields[0])))?;
        if tid >= MAX_THREADS {
            return Err(LitmusError::ProgramTooLarge {
                threads: tid + 1,
                instructions: 0,
            });
        }
        let instr = match (fields.get(1).copied(), fields.len()) {
            (Some("S"), 4) => {
                if !is_name(fields[2]) {
                    return Err(err(format!("bad variable `{}`", fields[2])));
                }
                let value = fields[3]
                    .parse()
                    .map_err(|_| err(format!("bad value `{}`", fields[3])))?;
                Instr::Store {
                    var: fields[2].to_string(),
                    value,
                }
            }
            (Some("L"), 4) => {
                if !is_name(fields[2]) || !is_name(fields[3]) {
                    return Err(err(format!("bad operands `{} {}`", fields[2], fields[3])));
                }
                Instr::Load {
                    var: fields[2].to_string(),
                    reg: fields[3].to_string(),
                }
            }
            (Some("F"), 2) => Instr::Fence,
            _ => {
                return Err(err(format!(
                    "expected `<tid> S var int`, `<tid> L var reg` or `<tid> F`, got `{body}`"
                )))
            }
        };
        if threads.len() <= tid {
            threads.resize(tid + 1, Vec::new());
        }
        threads[tid].push(instr);
    }
    let program = LitmusProgram { threads };
    program.validate()?;
    Ok(program)
}

/// A small random program: 2-3 threads of 1-4 instructions over `x` and
/// `y`, with distinct store values and one register per load.
pub fn random_program(seed: u64) -> LitmusProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = ["x", "y"];
    let threads = rng.gen_range(2..=3);
    let mut next_value = 1;
    let mut next_reg = 1;
    let mut out = Vec::with_capacity(threads);
    for _ in 0..threads {
        let len = rng.gen_range(1..=4);
        let mut thread = Vec::with_capacity(len);
        for _ in 0..len {
            let var = vars[rng.gen_range(0..vars.len())].to_string();
            let roll: f64 = rng.gen();
            if roll < 0.45 {
                thread.push(Instr::Store { var, value: next_value });
                next_value += 1;
            } else if roll < 0.9 {
                thread.push(Instr::Load {
                    var,
                    reg: format!("r{next_reg}"),
                });
                next_reg += 1;
            } else {
                thread.push(Instr::Fence);
            }
        }
        out.push(thread);
    }
    LitmusProgram { threads: out }
}
