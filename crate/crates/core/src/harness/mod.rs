//! Monte Carlo experiments: configuration files, paired sweeps over fronthaul
//! capacity, symbol-level simulation and CSV output.

mod config;
mod output;
mod simulate;
mod sweep;

pub use config::{load_experiment, parse_experiment, ExperimentSpec, Scheme};
pub use output::{read_csv, summarize, write_csv, CsvRow, MseSummary, CSV_HEADER};
pub use simulate::{simulate_transmission, EmpiricalMse};
pub use sweep::{derive_trial_seed, run_sweep, run_sweep_with, trial_channels, SweepOptions, TrialChannels, TrialRecord};
