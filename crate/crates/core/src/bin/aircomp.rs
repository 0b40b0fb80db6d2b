use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use aircomp::harness::{load_experiment, run_sweep_with, summarize, write_csv, SweepOptions};

#[derive(Parser)]
#[command(name = "aircomp", version, about = "Cloud-RAN over-the-air computation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a capacity sweep and write one CSV row per (trial, scheme, capacity).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `trials`.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Write 0 for wall_time_ms so the CSV depends only on the seed.
        #[arg(long)]
        no_timing: bool,
    },
    /// Parse a config file and check its invariants without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> aircomp::Result<()> {
    match cli.command {
        Command::Validate { config } => {
            let spec = load_experiment(&config)?;
            println!(
                "{}: ok ({} devices, {} RRHs x {} antennas, {} capacities, {} schemes, {} trials)",
                config.display(),
                spec.base.num_devices,
                spec.base.num_rrhs,
                spec.base.antennas_per_rrh,
                spec.capacity_grid.len(),
                spec.schemes.len(),
                spec.trials
            );
        }
        Command::Run {
            config,
            out,
            seed,
            trials,
            threads,
            no_timing,
        } => {
            let mut spec = load_experiment(&config)?;
            if let Some(seed) = seed {
                spec.master_seed = seed;
            }
            if let Some(trials) = trials {
                spec.trials = trials;
            }
            let start = Instant::now();
            let records = run_sweep_with(
                &spec,
                &SweepOptions {
                    threads,
                    record_timing: !no_timing,
                },
            )?;
            write_csv(&records, &out)?;
            eprintln!(
                "{} records from {} trials in {:.1} s -> {}",
                records.len(),
                spec.trials,
                start.elapsed().as_secs_f64(),
                out.display()
            );
            println!("{:<24} {:>14} {:>14} {:>12}", "scheme", "capacity_bps", "mean_mse", "std_err");
            for s in summarize(records.iter().map(|r| (r.scheme, r.capacity_bps, r.mse))) {
                println!(
                    "{:<24} {:>14.4e} {:>14.6e} {:>12.3e}",
                    s.scheme.name(),
                    s.capacity_bps,
                    s.mean,
                    s.std_error
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
