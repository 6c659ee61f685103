//! Machine description and its validation.
//!
//! A [`SystemConfig`] is deserialized from JSON whose keys mirror the field
//! names below. [`validate_config`] checks every structural invariant and
//! fills in [`DerivedBits`], the bit widths the address decoders need.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{ConsistencyMode, DvfsParams, GovernorPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field} must be a power of two, got {value}")]
    NonPowerOfTwo { field: String, value: u64 },
    #[error("{field} has block size {value} but the hierarchy uses {expected}")]
    InconsistentBlockSize { field: String, value: u64, expected: u64 },
    #[error("{field} names no usable core")]
    EmptyAffinity { field: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    Msi,
    Mesi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transport {
    Snoopy,
    Directory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceDecoder {
    BitSelect,
    XorHash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InclusionPolicy {
    Inclusive,
    NonInclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interleaving {
    CacheBlockInterleave,
    RowInterleave,
    NonInterleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowPolicy {
    OpenRow,
    ClosedRow,
    Timeout { cycles: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchedulerPolicy {
    Fcfs,
    FrFcfs,
    ThreadFair,
}

/// How cores reach the shared LLC slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interconnect {
    /// Separate LLC behind a shared bus: uniform extra latency.
    Bus { bus_cycles: u64 },
    /// Tiled ring, one slice per stop.
    Ring { hop_latency: u64 },
}

impl Default for Interconnect {
    fn default() -> Self {
        Interconnect::Ring { hop_latency: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreConfig {
    pub base_frequency_hz: f64,
    #[serde(default)]
    pub dvfs: DvfsParams,
    #[serde(default)]
    pub store_buffer_depth: usize,
    #[serde(default = "default_consistency")]
    pub consistency_mode: ConsistencyMode,
}

fn default_consistency() -> ConsistencyMode {
    ConsistencyMode::Sc
}

impl Default for CoreConfig {
    fn default() -> Self {
        let dvfs = DvfsParams::default();
        CoreConfig {
            base_frequency_hz: dvfs.f_base,
            dvfs,
            store_buffer_depth: 0,
            consistency_mode: ConsistencyMode::Sc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub name: String,
    pub capacity: u64,
    pub associativity: u64,
    #[serde(default = "default_block")]
    pub block_size: u64,
    pub latency_cycles: u64,
    #[serde(default)]
    pub shared: bool,
    #[serde(default = "one")]
    pub slice_count: u64,
    #[serde(default = "default_decoder")]
    pub slice_decoder: SliceDecoder,
    #[serde(default = "default_inclusion")]
    pub inclusion: InclusionPolicy,
    #[serde(default = "default_mshrs")]
    pub mshr_per_slice: usize,
    /// core id -> ways that core may fill into.
    #[serde(default)]
    pub way_partition: Option<BTreeMap<usize, Vec<usize>>>,
}

fn default_block() -> u64 {
    64
}
fn one() -> u64 {
    1
}
fn default_decoder() -> SliceDecoder {
    SliceDecoder::BitSelect
}
fn default_inclusion() -> InclusionPolicy {
    InclusionPolicy::Inclusive
}
fn default_mshrs() -> usize {
    16
}

impl CacheConfig {
    pub fn private(name: &str, capacity: u64, associativity: u64, latency_cycles: u64) -> Self {
        CacheConfig {
            name: name.to_string(),
            capacity,
            associativity,
            block_size: 64,
            latency_cycles,
            shared: false,
            slice_count: 1,
            slice_decoder: SliceDecoder::BitSelect,
            inclusion: InclusionPolicy::Inclusive,
            mshr_per_slice: 16,
            way_partition: None,
        }
    }

    pub fn shared_llc(capacity: u64, associativity: u64, latency_cycles: u64, slices: u64) -> Self {
        CacheConfig {
            shared: true,
            slice_count: slices,
            ..CacheConfig::private("LLC", capacity, associativity, latency_cycles)
        }
    }

    pub fn sets(&self) -> u64 {
        self.capacity / (self.associativity * self.block_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramGeometry {
    pub channels: u64,
    pub ranks: u64,
    pub banks: u64,
    pub rows: u64,
    pub row_size: u64,
}

impl Default for DramGeometry {
    fn default() -> Self {
        DramGeometry {
            channels: 1,
            ranks: 1,
            banks: 8,
            rows: 32768,
            row_size: 2048,
        }
    }
}

/// DRAM command timing in controller cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingParams {
    pub t_rcd: u64,
    pub t_cl: u64,
    pub t_bl: u64,
    pub t_rp: u64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            t_rcd: 10,
            t_cl: 10,
            t_bl: 4,
            t_rp: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DramConfig {
    #[serde(default)]
    pub geometry: DramGeometry,
    #[serde(default)]
    pub timing: TimingParams,
    #[serde(default = "default_interleaving")]
    pub interleaving: Interleaving,
    #[serde(default = "default_row_policy")]
    pub row_policy: RowPolicy,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerPolicy,
    /// ThreadFair switches away from FR-FCFS once a thread's estimated
    /// slowdown exceeds this.
    #[serde(default = "default_fair_threshold")]
    pub thread_fair_threshold: f64,
}

fn default_interleaving() -> Interleaving {
    Interleaving::RowInterleave
}
fn default_row_policy() -> RowPolicy {
    RowPolicy::OpenRow
}
fn default_scheduler() -> SchedulerPolicy {
    SchedulerPolicy::FrFcfs
}
fn default_fair_threshold() -> f64 {
    1.5
}

impl Default for DramConfig {
    fn default() -> Self {
        DramConfig {
            geometry: DramGeometry::default(),
            timing: TimingParams::default(),
            interleaving: default_interleaving(),
            row_policy: default_row_policy(),
            scheduler: default_scheduler(),
            thread_fair_threshold: default_fair_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub protocol: Protocol,
    pub transport: Transport,
    /// Cycles one snoopy transaction holds the bus.
    #[serde(default = "default_bus_occupancy")]
    pub bus_occupancy_cycles: u64,
    /// Round trip to another core's private hierarchy (invalidations,
    /// owner-supplied data).
    #[serde(default = "default_c2c")]
    pub cache_to_cache_cycles: u64,
}

fn default_bus_occupancy() -> u64 {
    2
}
fn default_c2c() -> u64 {
    10
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            protocol: Protocol::Mesi,
            transport: Transport::Directory,
            bus_occupancy_cycles: default_bus_occupancy(),
            cache_to_cache_cycles: default_c2c(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsConfig {
    #[serde(default = "default_quantum")]
    pub quantum_cycles: u64,
    #[serde(default)]
    pub context_switch_cycles: u64,
    /// thread id -> allowed core ids. Threads not listed may run anywhere.
    #[serde(default)]
    pub affinity: BTreeMap<usize, Vec<usize>>,
    #[serde(default = "default_max_threads")]
    pub max_threads: usize,
}

fn default_quantum() -> u64 {
    10_000
}
fn default_max_threads() -> usize {
    256
}

impl Default for OsConfig {
    fn default() -> Self {
        OsConfig {
            quantum_cycles: default_quantum(),
            context_switch_cycles: 0,
            affinity: BTreeMap::new(),
            max_threads: default_max_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default = "default_deadlock")]
    pub deadlock_cycles: u64,
    #[serde(default = "yes")]
    pub value_tracking: bool,
    #[serde(default = "default_governor")]
    pub governor: GovernorPolicy,
    #[serde(default = "default_governor_interval")]
    pub governor_interval_cycles: u64,
    /// Reference clock; defaults to the fastest base frequency.
    #[serde(default)]
    pub reference_frequency_hz: Option<f64>,
}

fn default_deadlock() -> u64 {
    100_000
}
fn yes() -> bool {
    true
}
fn default_governor() -> GovernorPolicy {
    GovernorPolicy::Performance
}
fn default_governor_interval() -> u64 {
    1000
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            deadlock_cycles: default_deadlock(),
            value_tracking: true,
            governor: default_governor(),
            governor_interval_cycles: default_governor_interval(),
            reference_frequency_hz: None,
        }
    }
}

/// Bit widths computed by [`validate_config`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedBits {
    pub offset_bits: u32,
    pub slice_bits: u32,
    pub channel_bits: u32,
    pub rank_bits: u32,
    pub bank_bits: u32,
    pub row_bits: u32,
    /// log2 of the row size in bytes (includes the block offset).
    pub column_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub core_count: usize,
    #[serde(default)]
    pub per_core: Vec<CoreConfig>,
    pub cache_levels: Vec<CacheConfig>,
    #[serde(default)]
    pub interconnect: Interconnect,
    #[serde(default)]
    pub coherence: CoherenceConfig,
    #[serde(default)]
    pub dram: DramConfig,
    #[serde(default)]
    pub os: OsConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub derived: DerivedBits,
}

impl SystemConfig {
    /// A small machine: 32 KB L1D, 256 KB L2, sliced 2 MB LLC (one slice
    /// per core, rounded up to a power of two), one DRAM channel.
    pub fn with_cores(core_count: usize) -> Self {
        let slices = (core_count.max(1) as u64).next_power_of_two();
        SystemConfig {
            core_count,
            per_core: vec![CoreConfig::default(); core_count],
            cache_levels: vec![
                CacheConfig::private("L1D", 32 * 1024, 8, 4),
                CacheConfig::private("L2", 256 * 1024, 8, 12),
                CacheConfig::shared_llc(2 * 1024 * 1024, 16, 30, slices),
            ],
            interconnect: Interconnect::default(),
            coherence: CoherenceConfig::default(),
            dram: DramConfig::default(),
            os: OsConfig::default(),
            engine: EngineConfig::default(),
            derived: DerivedBits::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<SystemConfig, ConfigError> {
        let raw: SystemConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        validate_config(raw)
    }

    pub fn block_size(&self) -> u64 {
        1 << self.derived.offset_bits
    }

    pub fn llc(&self) -> &CacheConfig {
        self.cache_levels.last().expect("validated config has an LLC")
    }

    pub fn private_levels(&self) -> &[CacheConfig] {
        &self.cache_levels[..self.cache_levels.len() - 1]
    }
}

fn log2_checked(field: &str, value: u64) -> Result<u32, ConfigError> {
    if value == 0 || !value.is_power_of_two() {
        return Err(ConfigError::NonPowerOfTwo {
            field: field.to_string(),
            value,
        });
    }
    Ok(value.trailing_zeros())
}

/// Checks every invariant of `raw` and returns it normalized, with
/// [`DerivedBits`] filled in. Validating an already validated config
/// returns it unchanged.
pub fn validate_config(mut raw: SystemConfig) -> Result<SystemConfig, ConfigError> {
    if raw.core_count == 0 {
        return Err(invalid("core_count", "must be at least 1"));
    }
    if raw.core_count > 64 {
        return Err(invalid("core_count", "at most 64 cores are supported"));
    }

    match raw.per_core.len() {
        0 => raw.per_core = vec![CoreConfig::default(); raw.core_count],
        1 if raw.core_count > 1 => raw.per_core = vec![raw.per_core[0].clone(); raw.core_count],
        n if n != raw.core_count => {
            return Err(invalid("per_core", format!("{n} entries for {} cores", raw.core_count)))
        }
        _ => {}
    }
    for (i, core) in raw.per_core.iter().enumerate() {
        let field = format!("per_core[{i}]");
        if core.base_frequency_hz.is_nan() || core.base_frequency_hz <= 0.0 {
            return Err(invalid(format!("{field}.base_frequency_hz"), "must be > 0"));
        }
        if core.dvfs.f_base != core.base_frequency_hz {
            return Err(invalid(format!("{field}.dvfs.f_base"), "must equal base_frequency_hz"));
        }
        core.dvfs
            .validate()
            .map_err(|reason| invalid(format!("{field}.dvfs"), reason))?;
    }

    if raw.cache_levels.is_empty() {
        return Err(invalid("cache_levels", "need at least a shared LLC"));
    }
    let expected_block = raw.cache_levels[0].block_size;
    let offset_bits = log2_checked("cache_levels[0].block_size", expected_block)?;
    let last = raw.cache_levels.len() - 1;
    for (i, level) in raw.cache_levels.iter().enumerate() {
        let field = format!("cache_levels[{i}]");
        if level.block_size != expected_block {
            return Err(ConfigError::InconsistentBlockSize {
                field: format!("{field}.block_size"),
                value: level.block_size,
                expected: expected_block,
            });
        }
        log2_checked(&format!("{field}.capacity"), level.capacity)?;
        log2_checked(&format!("{field}.associativity"), level.associativity)?;
        log2_checked(&format!("{field}.slice_count"), level.slice_count)?;
        if level.capacity < level.associativity * level.block_size {
            return Err(invalid(format!("{field}.capacity"), "smaller than one set"));
        }
        if level.shared != (i == last) {
            return Err(invalid(
                format!("{field}.shared"),
                "private levels must precede exactly one shared LLC",
            ));
        }
        if !level.shared && level.slice_count != 1 {
            return Err(invalid(format!("{field}.slice_count"), "only the shared LLC is sliced"));
        }
        if level.sets() % level.slice_count != 0 {
            return Err(invalid(format!("{field}.slice_count"), "must divide the set count"));
        }
        if level.mshr_per_slice == 0 {
            return Err(invalid(format!("{field}.mshr_per_slice"), "must be >= 1"));
        }
        if level.latency_cycles == 0 {
            return Err(invalid(format!("{field}.latency_cycles"), "must be >= 1"));
        }
        if let Some(partition) = &level.way_partition {
            for (core, ways) in partition {
                let pfield = format!("{field}.way_partition[{core}]");
                if *core >= raw.core_count {
                    return Err(invalid(pfield, "unknown core"));
                }
                if ways.is_empty() {
                    return Err(ConfigError::EmptyAffinity { field: pfield });
                }
                if ways.iter().any(|&w| w as u64 >= level.associativity) {
                    return Err(invalid(pfield, "way index out of range"));
                }
            }
        }
    }

    let g = raw.dram.geometry;
    let channel_bits = log2_checked("dram.geometry.channels", g.channels)?;
    let rank_bits = log2_checked("dram.geometry.ranks", g.ranks)?;
    let bank_bits = log2_checked("dram.geometry.banks", g.banks)?;
    let row_bits = log2_checked("dram.geometry.rows", g.rows)?;
    let column_bits = log2_checked("dram.geometry.row_size", g.row_size)?;
    if g.row_size < expected_block {
        return Err(invalid("dram.geometry.row_size", "smaller than a cache block"));
    }
    let t = raw.dram.timing;
    for (name, v) in [("t_rcd", t.t_rcd), ("t_cl", t.t_cl), ("t_bl", t.t_bl), ("t_rp", t.t_rp)] {
        if v == 0 {
            return Err(invalid(format!("dram.timing.{name}"), "must be >= 1"));
        }
    }

    if raw.os.quantum_cycles == 0 {
        return Err(invalid("os.quantum_cycles", "must be >= 1"));
    }
    for (thread, cores) in raw.os.affinity.iter_mut() {
        cores.sort_unstable();
        cores.dedup();
        if cores.is_empty() || cores.iter().any(|&c| c >= raw.core_count) {
            return Err(ConfigError::EmptyAffinity {
                field: format!("os.affinity[{thread}]"),
            });
        }
    }
    if raw.engine.governor_interval_cycles == 0 {
        return Err(invalid("engine.governor_interval_cycles", "must be >= 1"));
    }
    if raw.engine.deadlock_cycles == 0 {
        return Err(invalid("engine.deadlock_cycles", "must be >= 1"));
    }

    raw.derived = DerivedBits {
        offset_bits,
        slice_bits: raw.cache_levels[last].slice_count.trailing_zeros(),
        channel_bits,
        rank_bits,
        bank_bits,
        row_bits,
        column_bits,
    };
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> SystemConfig {
        let mut cfg = SystemConfig::with_cores(1);
        cfg.cache_levels = vec![CacheConfig::shared_llc(64 * 1024, 4, 20, 1)];
        cfg
    }

    #[test]
    fn minimal_config_has_six_offset_bits() {
        let cfg = validate_config(minimal()).unwrap();
        assert_eq!(cfg.derived.offset_bits, 6);
        assert_eq!(cfg.block_size(), 64);
    }

    #[test]
    fn three_slices_rejected() {
        let mut cfg = SystemConfig::with_cores(4);
        cfg.cache_levels[2].slice_count = 3;
        match validate_config(cfg) {
            Err(ConfigError::NonPowerOfTwo { field, value }) => {
                assert_eq!(field, "cache_levels[2].slice_count");
                assert_eq!(value, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dram_bit_widths() {
        let mut cfg = SystemConfig::with_cores(2);
        cfg.dram.geometry = DramGeometry {
            channels: 2,
            ranks: 1,
            banks: 8,
            rows: 1024,
            row_size: 2048,
        };
        let cfg = validate_config(cfg).unwrap();
        assert_eq!(cfg.derived.channel_bits, 1);
        assert_eq!(cfg.derived.bank_bits, 3);
        assert_eq!(cfg.derived.column_bits, 11);
        assert_eq!(cfg.derived.rank_bits, 0);
        assert_eq!(cfg.derived.row_bits, 10);
    }

    #[test]
    fn mixed_block_sizes_rejected() {
        let mut cfg = SystemConfig::with_cores(2);
        cfg.cache_levels[1].block_size = 128;
        assert!(matches!(
            validate_config(cfg),
            Err(ConfigError::InconsistentBlockSize { ref field, value: 128, expected: 64 })
                if field == "cache_levels[1].block_size"
        ));
    }

    #[test]
    fn empty_affinity_rejected() {
        let mut cfg = SystemConfig::with_cores(2);
        cfg.os.affinity.insert(3, vec![]);
        assert_eq!(
            validate_config(cfg),
            Err(ConfigError::EmptyAffinity {
                field: "os.affinity[3]".into()
            })
        );
        let mut cfg = SystemConfig::with_cores(2);
        cfg.os.affinity.insert(0, vec![5]);
        assert!(matches!(validate_config(cfg), Err(ConfigError::EmptyAffinity { .. })));
    }

    #[test]
    fn shared_level_must_be_last() {
        let mut cfg = SystemConfig::with_cores(2);
        cfg.cache_levels.swap(1, 2);
        assert!(matches!(validate_config(cfg), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn validation_is_idempotent() {
        let once = validate_config(SystemConfig::with_cores(4)).unwrap();
        let twice = validate_config(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn json_round_trip() {
        let cfg = validate_config(SystemConfig::with_cores(2)).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(SystemConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn single_per_core_entry_is_replicated() {
        let mut cfg = SystemConfig::with_cores(4);
        cfg.per_core.truncate(1);
        let cfg = validate_config(cfg).unwrap();
        assert_eq!(cfg.per_core.len(), 4);
    }
}
