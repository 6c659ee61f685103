//! `mcsim`: run simulations, thread-count sweeps, litmus enumeration and
//! scaling-law tables.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "mcsim",
    about = "Deterministic trace-driven multicore memory-hierarchy simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more applications and report metrics.
    Run(RunArgs),
    /// Simulate an application at several core counts.
    Sweep(SweepArgs),
    /// Enumerate outcomes of a litmus program.
    Litmus(LitmusArgs),
    /// Tabulate Amdahl or Gustafson speedup for n = 1..nmax.
    Laws(LawsArgs),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct RunArgs {
    /// System configuration (JSON); a 4-core default machine if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace file; repeat for several applications (order = app id).
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the experiment this many times; all runs must agree.
    #[arg(long, default_value_t = 1)]
    repeat: u32,
    /// Write messages.log.
    #[arg(long)]
    dump_messages: bool,
    /// Write commands.log.
    #[arg(long)]
    dump_commands: bool,
    /// Write events.log.
    #[arg(long)]
    dump_events: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// One trace for every point, or one per core count in `--n` order.
    #[arg(long = "trace", required = true)]
    traces: Vec<PathBuf>,
    /// Core counts, comma separated or repeated.
    #[arg(long = "n", required = true, value_delimiter = ',')]
    n: Vec<usize>,
    /// Parallel fraction for the analytic columns.
    #[arg(long)]
    f: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Sc,
    Tso,
    Weak,
    All,
}

#[derive(Args)]
struct LitmusArgs {
    /// Litmus program file.
    path: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    model: ModelArg,
    /// Also write the report to `<dir>/litmus.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Amdahl,
    Gustafson,
}

#[derive(Args)]
struct LawsArgs {
    #[arg(long)]
    f: f64,
    #[arg(long)]
    nmax: u64,
    #[arg(long, value_enum, default_value = "amdahl")]
    law: LawArg,
    /// Also write the table to `<dir>/laws.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => commands::cmd_run(commands::RunRequest {
            config: a.config,
            traces: a.traces,
            out: a.out,
            seed: a.seed,
            repeat: a.repeat,
            dump_messages: a.dump_messages,
            dump_commands: a.dump_commands,
            dump_events: a.dump_events,
        }),
        Command::Sweep(a) => commands::cmd_sweep(a.config, &a.traces, &a.n, a.f, &a.out, a.seed),
        Command::Litmus(a) => {
            use mcsim_core::consistency::Model;
            let models = match a.model {
                ModelArg::Sc => vec![Model::Sc],
                ModelArg::Tso => vec![Model::Tso],
                ModelArg::Weak => vec![Model::Weak],
                ModelArg::All => Model::ALL.to_vec(),
            };
            commands::cmd_litmus(&a.path, &models, a.out.as_deref())
        }
        Command::Laws(a) => {
            let law = match a.law {
                LawArg::Amdahl => mcsim_core::metrics::Law::Amdahl,
                LawArg::Gustafson => mcsim_core::metrics::Law::Gustafson,
            };
            commands::cmd_laws(a.f, a.nmax, law, a.out.as_deref())
        }
        Command::Version => {
            println!("mcsim {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
