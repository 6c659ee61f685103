//! Trace-driven multicore memory-hierarchy simulator.

pub mod cache;
pub mod coherence;
pub mod config;
pub mod consistency;
pub mod core_model;
pub mod dram;
pub mod engine;
pub mod metrics;
pub mod trace;
