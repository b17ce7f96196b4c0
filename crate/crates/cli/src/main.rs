//! `chanaccess` command-line runner.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when the
//! run hits a non-finite value, 1 for I/O failures.

use std::path::PathBuf;
use std::process::ExitCode;

use chanaccess::harness::{emit_metrics, load_config, run_experiment, Baseline, Scenario};
use chanaccess::population::{emit_trace, synthetic_trace};
use chanaccess::rng::{stream, Stream};
use chanaccess::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chanaccess", version, about = "Multichannel random-access simulator with per-user DQN agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write slots.csv, users.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long)]
        baseline: Option<Baseline>,
        /// Step agents one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
    /// Write a synthetic mobility trace (straight chords across the cell).
    GenTrace {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.02)]
        arrival_rate: f64,
        #[arg(long, default_value_t = 100)]
        t_min: u64,
        #[arg(long, default_value_t = 200)]
        t_max: u64,
        #[arg(long, default_value_t = 250.0)]
        cell_radius: f64,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out, scenario, baseline, sequential } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(Error::Io(e)) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
                Err(e) => return fail(e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            if let Some(b) = baseline {
                cfg.baseline = b;
            }
            cfg.sequential |= sequential;
            let log = match run_experiment(&cfg) {
                Ok(l) => l,
                Err(e) => return fail(e),
            };
            if let Err(e) = emit_metrics(&log, &cfg.out_dir) {
                return fail(e);
            }
            let s = &log.summary;
            println!(
                "sum_throughput={} weighted_objective={} collision_rate={} seed={}",
                s.sum_throughput, s.weighted_objective, s.collision_rate, s.seed
            );
            ExitCode::SUCCESS
        }
        Command::GenTrace { out, seed, arrival_rate, t_min, t_max, cell_radius, horizon } => {
            let mut rng = stream(seed, Stream::Population, 0);
            let records = match synthetic_trace(arrival_rate, t_min, t_max, cell_radius, horizon, &mut rng) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            match std::fs::write(&out, emit_trace(&records)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e.into()),
            }
        }
    }
}
