use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mcsim_core::config::{validate_config, SystemConfig};
use mcsim_core::consistency::{litmus_report, parse_litmus, Model};
use mcsim_core::engine::{run, run_experiment, run_with, RunOptions};
use mcsim_core::metrics::{fmt_sig6, parallel_metrics, report_csv, scaling_law, Law, ScalingInput};
use mcsim_core::trace::{parse_trace, TraceEvent};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or unreadable / malformed input files.
    #[error("{0}")]
    Input(String),
    /// The simulation itself failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<SystemConfig, CliError> {
    match path {
        Some(p) => SystemConfig::from_json(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => validate_config(SystemConfig::with_cores(4)).map_err(|e| CliError::Input(e.to_string())),
    }
}

fn load_trace(path: &Path, block_size: u64) -> Result<Vec<TraceEvent>, CliError> {
    parse_trace(&read(path)?, block_size).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes every file or none: contents are complete before the first write.
fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in files {
        fs::write(dir.join(name), body).map_err(io)?;
    }
    Ok(())
}

pub struct RunRequest {
    pub config: Option<PathBuf>,
    pub traces: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub repeat: u32,
    pub dump_messages: bool,
    pub dump_commands: bool,
    pub dump_events: bool,
}

pub fn cmd_run(req: RunRequest) -> Result<(), CliError> {
    let config = load_config(req.config.as_deref())?;
    let apps = req
        .traces
        .iter()
        .map(|p| load_trace(p, config.block_size()))
        .collect::<Result<Vec<_>, _>>()?;
    if req.repeat == 0 {
        return Err(CliError::Input("--repeat must be at least 1".into()));
    }
    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(e.to_string());

    let report = run_experiment(&config, &apps, req.seed).map_err(|e| runtime(&e))?;
    for _ in 1..req.repeat {
        let again = run_experiment(&config, &apps, req.seed).map_err(|e| runtime(&e))?;
        if again != report {
            return Err(CliError::Runtime("repeated runs disagree".into()));
        }
    }
    let mut files = vec![("metrics.csv", report_csv(&report.metrics))];
    if req.dump_messages || req.dump_commands || req.dump_events {
        let opts = RunOptions {
            record_messages: req.dump_messages,
            record_events: req.dump_events,
        };
        let out = run_with(&config, &apps, req.seed, opts).map_err(|e| runtime(&e))?;
        if let Some(m) = out.messages {
            files.push(("messages.log", m));
        }
        if req.dump_commands {
            files.push(("commands.log", out.commands));
        }
        if let Some(e) = out.events {
            files.push(("events.log", e));
        }
    }
    let summary = serde_json::json!({
        "seed": req.seed,
        "repeat": req.repeat,
        "traces": req.traces.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "cycles": report.shared.cycles,
        "instructions": report.shared.instructions,
        "metrics": report.metrics,
        "shared": report.shared,
        "alone": report.alone,
    });
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| runtime(&e))?;
    text.push('\n');
    files.push(("summary.json", text));
    write_outputs(&req.out, &files)
}

/// The configuration resized to `n` identical cores.
fn with_core_count(base: &SystemConfig, n: usize) -> Result<SystemConfig, CliError> {
    let mut raw = base.clone();
    raw.core_count = n;
    raw.per_core = vec![base.per_core[0].clone(); n];
    raw.os.affinity.clear();
    for level in &mut raw.cache_levels {
        level.way_partition = None;
    }
    validate_config(raw).map_err(|e| CliError::Input(format!("{n} cores: {e}")))
}

pub fn cmd_sweep(
    config: Option<PathBuf>,
    traces: &[PathBuf],
    ns: &[usize],
    f: f64,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(CliError::Input(format!("--f must be in [0, 1], got {f}")));
    }
    if ns.contains(&0) {
        return Err(CliError::Input("--n values must be at least 1".into()));
    }
    if traces.len() != 1 && traces.len() != ns.len() {
        return Err(CliError::Input(format!(
            "give one trace or one per core count ({} traces, {} counts)",
            traces.len(),
            ns.len()
        )));
    }
    let base = load_config(config.as_deref())?;
    let loaded = traces
        .iter()
        .map(|p| load_trace(p, base.block_size()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points: Vec<(usize, &Vec<TraceEvent>)> = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, &loaded[if loaded.len() == 1 { 0 } else { i }]))
        .collect();
    points.sort_by_key(|(n, _)| *n);
    points.dedup_by_key(|(n, _)| *n);

    let mut csv = String::from("n,time,speedup,efficiency,amdahl,gustafson\n");
    for (n, trace) in points {
        let app = std::slice::from_ref(trace);
        let sequential = run(&with_core_count(&base, 1)?, app, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
        let parallel = run(&with_core_count(&base, n)?, app, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
        let (speedup, efficiency) = if parallel.cycles == 0 {
            (1.0, 1.0 / n as f64)
        } else {
            parallel_metrics(sequential.cycles as f64, parallel.cycles as f64, n as f64)
        };
        let input = ScalingInput { f, n: n as f64 };
        let _ = writeln!(
            csv,
            "{n},{},{},{},{},{}",
            parallel.cycles,
            fmt_sig6(speedup),
            fmt_sig6(efficiency),
            fmt_sig6(scaling_law(input, Law::Amdahl)),
            fmt_sig6(scaling_law(input, Law::Gustafson)),
        );
    }
    write_outputs(out, &[("sweep.csv", csv)])
}

pub fn cmd_litmus(path: &Path, models: &[Model], out: Option<&Path>) -> Result<(), CliError> {
    let program = parse_litmus(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let report = litmus_report(&program, models).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if let Some(dir) = out {
        write_outputs(dir, &[("litmus.txt", report.clone())])?;
    }
    print!("{report}");
    Ok(())
}

pub fn laws_csv(f: f64, nmax: u64, law: Law) -> String {
    let mut csv = String::from("n,speedup\n");
    for n in 1..=nmax {
        let s = scaling_law(ScalingInput { f, n: n as f64 }, law);
        let _ = writeln!(csv, "{n},{}", fmt_sig6(s));
    }
    csv
}

pub fn cmd_laws(f: f64, nmax: u64, law: Law, out: Option<&Path>) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(CliError::Input(format!("--f must be in [0, 1], got {f}")));
    }
    if nmax == 0 {
        return Err(CliError::Input("--nmax must be at least 1".into()));
    }
    let csv = laws_csv(f, nmax, law);
    if let Some(dir) = out {
        write_outputs(dir, &[("laws.csv", csv.clone())])?;
    }
    print!("{csv}");
    Ok(())
}
