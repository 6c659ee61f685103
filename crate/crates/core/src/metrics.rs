//! Scaling laws, parallel and multiprogram metrics, energy, and report
//! formatting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{dynamic_power, DvfsParams, PowerError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("app {app} has no alone-run baseline")]
    MissingBaseline { app: usize },
    #[error("no apps to report")]
    NoApps,
    #[error("invalid duration: {0}")]
    InvalidDuration(String),
    #[error(transparent)]
    Power(#[from] PowerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Law {
    Amdahl,
    Gustafson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingInput {
    /// Parallelizable fraction.
    pub f: f64,
    pub n: f64,
}

pub fn scaling_law(input: ScalingInput, law: Law) -> f64 {
    let ScalingInput { f, n } = input;
    match law {
        Law::Amdahl => 1.0 / ((1.0 - f) + f / n),
        Law::Gustafson => (1.0 - f) + f * n,
    }
}

/// Execution time on `n` threads relative to one thread, under Amdahl.
pub fn normalized_time(f: f64, n: f64) -> f64 {
    (1.0 - f) + f / n
}

/// `(speedup, efficiency)`. Super-linear values are returned as-is.
pub fn parallel_metrics(t_sequential: f64, t_parallel: f64, n: f64) -> (f64, f64) {
    let s = t_sequential / t_parallel;
    (s, t_sequential / (t_parallel * n))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AppPerf {
    pub app: usize,
    pub ipc_alone: Option<f64>,
    pub ipc_shared: f64,
    pub t_sequential: Option<f64>,
    pub t_parallel: Option<f64>,
    pub threads: usize,
    pub instructions: u64,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub apps: Vec<AppPerf>,
    pub slowdowns: Vec<f64>,
    pub weighted_speedup: f64,
    pub harmonic_speedup: f64,
    pub fairness: f64,
    pub max_slowdown: f64,
    /// Per app `(speedup, efficiency)` when sequential and parallel times
    /// are both known.
    pub parallel: Vec<Option<(f64, f64)>>,
    pub energy_joules: f64,
    pub average_watts: f64,
}

pub fn multiprogram_metrics(apps: &[AppPerf]) -> Result<MetricReport, MetricsError> {
    if apps.is_empty() {
        return Err(MetricsError::NoApps);
    }
    let mut slowdowns = Vec::with_capacity(apps.len());
    for a in apps {
        let alone = a.ipc_alone.ok_or(MetricsError::MissingBaseline { app: a.app })?;
        slowdowns.push(alone / a.ipc_shared);
    }
    let n = slowdowns.len() as f64;
    let max = slowdowns.iter().copied().fold(f64::MIN, f64::max);
    let min = slowdowns.iter().copied().fold(f64::MAX, f64::min);
    let parallel = apps
        .iter()
        .map(|a| match (a.t_sequential, a.t_parallel) {
            (Some(ts), Some(tp)) => Some(parallel_metrics(ts, tp, a.threads.max(1) as f64)),
            _ => None,
        })
        .collect();
    Ok(MetricReport {
        apps: apps.to_vec(),
        weighted_speedup: slowdowns.iter().map(|s| 1.0 / s).sum(),
        harmonic_speedup: n / slowdowns.iter().sum::<f64>(),
        fairness: min / max,
        max_slowdown: max,
        slowdowns,
        parallel,
        energy_joules: 0.0,
        average_watts: 0.0,
    })
}

pub fn ws_improvement(ws_before: f64, ws_after: f64) -> f64 {
    ws_after / ws_before
}

/// `(average watts, joules)` over `(frequency_hz, seconds)` segments.
pub fn power_energy(
    segments: &[(f64, f64)],
    params: &DvfsParams,
    static_watts: f64,
) -> Result<(f64, f64), MetricsError> {
    if segments.is_empty() {
        return Err(MetricsError::InvalidDuration("no segments".into()));
    }
    let mut joules = 0.0;
    let mut seconds = 0.0;
    for &(f, t) in segments {
        if t.is_nan() || t <= 0.0 {
            return Err(MetricsError::InvalidDuration(format!("segment length {t}")));
        }
        joules += (dynamic_power(params, f)? + static_watts) * t;
        seconds += t;
    }
    Ok((joules / seconds, joules))
}

/// Six significant digits, in the style of C's `%.6g`.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{x:.*}", (5 - exp) as usize))
    }
}

/// `metric,app,value` rows. Bundle-wide metrics use app `all`.
pub fn report_csv(report: &MetricReport) -> String {
    let mut out = String::from("metric,app,value\n");
    let mut row = |metric: &str, app: &str, v: f64| {
        let _ = writeln!(out, "{metric},{app},{}", fmt_sig6(v));
    };
    for (i, a) in report.apps.iter().enumerate() {
        let id = a.app.to_string();
        row("instructions", &id, a.instructions as f64);
        row("cycles", &id, a.cycles as f64);
        if let Some(alone) = a.ipc_alone {
            row("ipc_alone", &id, alone);
        }
        row("ipc_shared", &id, a.ipc_shared);
        row("slowdown", &id, report.slowdowns[i]);
        if let Some((s, e)) = report.parallel.get(i).copied().flatten() {
            row("parallel_speedup", &id, s);
            row("parallel_efficiency", &id, e);
        }
    }
    row("weighted_speedup", "all", report.weighted_speedup);
    row("harmonic_speedup", "all", report.harmonic_speedup);
    row("fairness", "all", report.fairness);
    row("max_slowdown", "all", report.max_slowdown);
    row("energy_joules", "all", report.energy_joules);
    row("average_watts", "all", report.average_watts);
    out
}
