use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::metrics::{multiprogram_metrics, AppPerf, MetricReport, MetricsError};
use crate::trace::TraceEvent;

use super::{run, EngineError, RunStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metrics: MetricReport,
    pub shared: RunStats,
    pub alone: Vec<RunStats>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Each app's threads renumbered to the global ids the shared run gives
/// them, so affinity applies identically in the alone runs.
fn globalize(apps: &[Vec<TraceEvent>]) -> Vec<Vec<TraceEvent>> {
    let mut offset = 0;
    apps.iter()
        .map(|events| {
            let width = events.iter().map(|e| e.thread + 1).max().unwrap_or(0);
            let out = events
                .iter()
                .map(|e| TraceEvent {
                    thread: e.thread + offset,
                    op: e.op,
                })
                .collect();
            offset += width;
            out
        })
        .collect()
}

/// Runs every app alone on the full machine and all apps together, then
/// derives slowdowns and the multiprogram metrics.
pub fn run_experiment(
    config: &SystemConfig,
    apps: &[Vec<TraceEvent>],
    seed: u64,
) -> Result<ExperimentReport, ExperimentError> {
    let global = globalize(apps);
    let shared = run(config, apps, seed)?;
    let alone: Vec<RunStats> = global
        .par_iter()
        .map(|app| run(config, std::slice::from_ref(app), seed))
        .collect::<Result<_, _>>()?;
    let perf: Vec<AppPerf> = shared
        .apps
        .iter()
        .map(|a| {
            let solo = &alone[a.app];
            AppPerf {
                app: a.app,
                ipc_alone: Some(solo.ipc()),
                ipc_shared: a.ipc(),
                t_sequential: None,
                t_parallel: None,
                threads: a.threads,
                instructions: a.instructions,
                cycles: a.cycles,
            }
        })
        .collect();
    let mut metrics = multiprogram_metrics(&perf)?;
    metrics.energy_joules = shared.energy_joules;
    let seconds = shared.cycles as f64 / reference_hz(config);
    metrics.average_watts = if seconds > 0.0 {
        shared.energy_joules / seconds
    } else {
        0.0
    };
    Ok(ExperimentReport { metrics, shared, alone })
}

fn reference_hz(config: &SystemConfig) -> f64 {
    config
        .engine
        .reference_frequency_hz
        .unwrap_or_else(|| config.per_core.iter().map(|c| c.base_frequency_hz).fold(0.0, f64::max))
}
