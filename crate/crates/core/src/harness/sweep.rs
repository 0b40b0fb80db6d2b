use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{sample_channel, sample_in_disk, ChannelRealization, SystemConfig, Topology};
use crate::error::{Error, Result};
use crate::solver::{
    alternating_solve, solve_equal_allocation, solve_lower_bound, solve_massive_mimo_baseline, DescentLog,
    SolverOptions, SolverResult,
};

use super::config::{ExperimentSpec, Scheme};

/// One (scheme, capacity, trial) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial_index: usize,
    pub scheme: Scheme,
    pub capacity_bps: f64,
    pub mse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    /// Monotonicity checks made during the solve (not written to CSV).
    pub descent: DescentLog,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// When false, `wall_time_ms` is written as 0 so that output depends only
    /// on the seed.
    pub record_timing: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            threads: None,
            record_timing: true,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial_index`, a pure function of the master seed and the
/// index.
pub fn derive_trial_seed(master_seed: u64, trial_index: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial_index as u64))
}

const DEVICE_STREAM: u64 = 0;
const CLOUDRAN_STREAM: u64 = 1;
const SINGLE_ANTENNA_STREAM: u64 = 2;
const MIMO_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Single-antenna RRHs, one per antenna of the base network.
pub fn single_antenna_config(base: &SystemConfig) -> SystemConfig {
    let total = base.total_antennas();
    SystemConfig {
        num_rrhs: total,
        antennas_per_rrh: 1,
        fronthaul_capacity_bps: vec![base.fronthaul_capacity_bps.first().copied().unwrap_or(0.0); total],
        ..base.clone()
    }
}

/// Every antenna of the base network on one array.
pub fn massive_mimo_config(base: &SystemConfig) -> SystemConfig {
    SystemConfig {
        num_rrhs: 1,
        antennas_per_rrh: base.total_antennas(),
        fronthaul_capacity_bps: vec![0.0],
        ..base.clone()
    }
}

/// The realizations one trial evaluates. All architectures share the device
/// drop; each has its own independent RRH placement and fading stream.
#[derive(Debug, Clone)]
pub struct TrialChannels {
    pub seed: u64,
    pub cloudran: Option<(Topology, ChannelRealization)>,
    pub single_antenna: Option<(Topology, ChannelRealization)>,
    pub massive_mimo: Option<(Topology, ChannelRealization)>,
}

/// Draws the realizations needed by `schemes` for the trial with `seed`.
pub fn trial_channels(base: &SystemConfig, schemes: &[Scheme], seed: u64) -> Result<TrialChannels> {
    let mut device_rng = stream(seed, DEVICE_STREAM);
    let devices: Vec<_> = (0..base.num_devices)
        .map(|_| sample_in_disk(base.region_radius_m, &mut device_rng))
        .collect();
    let build = |config: &SystemConfig, id: u64, at_origin: bool| -> Result<(Topology, ChannelRealization)> {
        let mut rng = stream(seed, id);
        let rrh_positions = if at_origin {
            vec![[0.0, 0.0]; config.num_rrhs]
        } else {
            (0..config.num_rrhs)
                .map(|_| sample_in_disk(config.region_radius_m, &mut rng))
                .collect()
        };
        let topology = Topology {
            device_positions: devices.clone(),
            rrh_positions,
        };
        let channels = sample_channel(&topology, config, &mut rng)?;
        Ok((topology, channels))
    };
    let needs = |wanted: &[Scheme]| schemes.iter().any(|s| wanted.contains(s));
    Ok(TrialChannels {
        seed,
        cloudran: if needs(&[Scheme::Proposed, Scheme::EqualAlloc, Scheme::LowerBound]) {
            Some(build(base, CLOUDRAN_STREAM, false)?)
        } else {
            None
        },
        single_antenna: if needs(&[Scheme::CloudranSingleAntenna]) {
            Some(build(&single_antenna_config(base), SINGLE_ANTENNA_STREAM, false)?)
        } else {
            None
        },
        massive_mimo: if needs(&[Scheme::MassiveMimo]) {
            Some(build(&massive_mimo_config(base), MIMO_STREAM, true)?)
        } else {
            None
        },
    })
}

fn solve_scheme(
    scheme: Scheme,
    channels: &TrialChannels,
    base: &SystemConfig,
    capacity: f64,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    let missing = || Error::InvalidInput(format!("no channel realization drawn for {scheme}"));
    match scheme {
        Scheme::Proposed | Scheme::EqualAlloc | Scheme::LowerBound => {
            let (_, ch) = channels.cloudran.as_ref().ok_or_else(missing)?;
            let config = base.with_uniform_capacity(capacity);
            match scheme {
                Scheme::Proposed => alternating_solve(ch, &config, opts),
                Scheme::EqualAlloc => solve_equal_allocation(ch, &config, opts),
                _ => solve_lower_bound(ch, &config, opts),
            }
        }
        Scheme::CloudranSingleAntenna => {
            let (_, ch) = channels.single_antenna.as_ref().ok_or_else(missing)?;
            let config = single_antenna_config(base).with_uniform_capacity(capacity);
            alternating_solve(ch, &config, opts)
        }
        Scheme::MassiveMimo => {
            let (_, ch) = channels.massive_mimo.as_ref().ok_or_else(missing)?;
            solve_massive_mimo_baseline(ch, &massive_mimo_config(base), opts)
        }
    }
}

fn run_trial(spec: &ExperimentSpec, trial_index: usize, options: &SweepOptions) -> Result<Vec<TrialRecord>> {
    let seed = derive_trial_seed(spec.master_seed, trial_index);
    let channels = trial_channels(&spec.base, &spec.schemes, seed)?;
    let mut records = Vec::with_capacity(spec.schemes.len() * spec.capacity_grid.len());
    for &scheme in &spec.schemes {
        let mut cached: Option<(SolverResult, f64)> = None;
        for &capacity in &spec.capacity_grid {
            let (result, elapsed_ms) = match &cached {
                Some(hit) => hit.clone(),
                None => {
                    let start = Instant::now();
                    let result = solve_scheme(scheme, &channels, &spec.base, capacity, &spec.opts).map_err(|e| {
                        Error::Trial {
                            trial: trial_index,
                            scheme: scheme.name().to_string(),
                            capacity_bps: capacity,
                            source: Box::new(e),
                        }
                    })?;
                    let elapsed = start.elapsed().as_secs_f64() * 1e3;
                    let hit = (result, elapsed);
                    if scheme.capacity_independent() {
                        cached = Some(hit.clone());
                    }
                    hit
                }
            };
            records.push(TrialRecord {
                seed,
                trial_index,
                scheme,
                capacity_bps: capacity,
                mse: result.mse,
                iterations: result.iterations,
                converged: result.converged,
                wall_time_ms: if options.record_timing { elapsed_ms } else { 0.0 },
                descent: result.descent,
            });
        }
    }
    Ok(records)
}

/// Runs every scheme at every capacity on each trial's realization, with
/// default sweep options.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    run_sweep_with(spec, &SweepOptions::default())
}

/// Runs the sweep; trials execute in parallel and records come back sorted by
/// (trial, scheme, capacity).
pub fn run_sweep_with(spec: &ExperimentSpec, options: &SweepOptions) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let per_trial: Vec<Vec<TrialRecord>> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, t, options))
            .collect::<Result<_>>()
    })?;
    let mut records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.trial_index, a.scheme.name())
            .cmp(&(b.trial_index, b.scheme.name()))
            .then(a.capacity_bps.total_cmp(&b.capacity_bps))
    });
    Ok(records)
}
