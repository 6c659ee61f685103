use serde::{Deserialize, Serialize};

use super::DramError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub name: String,
    pub hit_time: u64,
    pub hits: u64,
    pub misses: u64,
}

impl LevelStats {
    pub fn accesses(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn miss_rate(&self) -> f64 {
        if self.accesses() == 0 {
            0.0
        } else {
            self.misses as f64 / self.accesses() as f64
        }
    }
}

/// Recorded access latencies plus per-level counters, outermost level first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccessStats {
    pub accesses: u64,
    pub total_latency: u64,
    pub levels: Vec<LevelStats>,
    pub memory_accesses: u64,
    pub memory_latency: u64,
}

impl AccessStats {
    pub fn record(&mut self, latency: u64) {
        self.accesses += 1;
        self.total_latency += latency;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmatReport {
    /// Mean of recorded end-to-end latencies.
    pub measured: f64,
    /// hit_time + miss_rate * penalty, per level, outermost first.
    pub per_level: Vec<(String, f64)>,
}

pub fn amat_summary(stats: &AccessStats) -> Result<AmatReport, DramError> {
    if stats.accesses == 0 {
        return Err(DramError::NoAccesses);
    }
    let mut penalty = if stats.memory_accesses == 0 {
        0.0
    } else {
        stats.memory_latency as f64 / stats.memory_accesses as f64
    };
    let mut per_level = Vec::with_capacity(stats.levels.len());
    for level in stats.levels.iter().rev() {
        penalty = level.hit_time as f64 + level.miss_rate() * penalty;
        per_level.push((level.name.clone(), penalty));
    }
    per_level.reverse();
    Ok(AmatReport {
        measured: stats.total_latency as f64 / stats.accesses as f64,
        per_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_hits() {
        let mut s = AccessStats::default();
        for _ in 0..5 {
            s.record(4);
        }
        s.levels.push(LevelStats {
            name: "L1".into(),
            hit_time: 4,
            hits: 5,
            misses: 0,
        });
        let r = amat_summary(&s).unwrap();
        assert_eq!(r.measured, 4.0);
        assert_eq!(r.per_level[0].1, 4.0);
    }

    #[test]
    fn one_miss_in_ten() {
        let mut s = AccessStats::default();
        for _ in 0..9 {
            s.record(4);
        }
        s.record(104);
        s.levels.push(LevelStats {
            name: "L1".into(),
            hit_time: 4,
            hits: 9,
            misses: 1,
        });
        s.memory_accesses = 1;
        s.memory_latency = 100;
        let r = amat_summary(&s).unwrap();
        assert_eq!(r.measured, 14.0);
        assert!((r.per_level[0].1 - 14.0).abs() < 1e-12);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(amat_summary(&AccessStats::default()), Err(DramError::NoAccesses));
    }
}
