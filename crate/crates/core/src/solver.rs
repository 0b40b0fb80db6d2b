//! Alternating optimization of transmit scalars, receive combiner and
//! quantization bits, plus the benchmark schemes it is compared against.
//!
//! One outer iteration optimizes the transceivers for the current integer
//! allocation, computes the effective noise weights, solves the relaxed
//! allocation, and rounds it with per-RRH threshold bisection. The best
//! iterate seen is returned.

use crate::bitalloc::{greedy_fill, round_with_bisection, solve_relaxed};
use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::quantization::{effective_noise_weights, noise_levels_from_factors, BitAllocation, QuantizationProfile};
use crate::transceiver::{
    mse_unchecked, update_receive, update_transmit_with_factors, ReceiveBeamformer, TransmitPolicy,
};

/// Tolerance for the per-update descent checks.
pub const DESCENT_TOLERANCE: f64 = 1e-10;

const EXTRAPOLATION_START: f64 = 1.0;
const EXTRAPOLATION_GROWTH: f64 = 1.5;
const EXTRAPOLATION_MAX: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Rounding-threshold bisection tolerance.
    pub eps1: f64,
    /// Outer-loop stop: MSE improvement at most this.
    pub eps2: f64,
    /// Transceiver alternation stop: MSE improvement at most this.
    pub eps_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Spend bits stranded by rounding (off reproduces the plain algorithm).
    pub greedy_fill: bool,
    /// Safeguarded extrapolation of the transmit scalars inside the
    /// transceiver alternation.
    pub extrapolate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps1: 1e-4,
            eps2: 1e-6,
            eps_inner: 1e-8,
            max_outer: 50,
            max_inner: 100,
            greedy_fill: false,
            extrapolate: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2), ("eps_inner", self.eps_inner)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidConfig("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Record of the monotonicity checks made on every continuous block update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DescentLog {
    pub checks: usize,
    pub violations: usize,
    /// Largest observed increase (negative when every update decreased the MSE).
    pub max_increase: f64,
}

impl DescentLog {
    fn record(&mut self, before: f64, after: f64) {
        let increase = after - before;
        if self.checks == 0 || increase > self.max_increase {
            self.max_increase = increase;
        }
        self.checks += 1;
        if increase > DESCENT_TOLERANCE {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, other: &DescentLog) {
        if other.checks == 0 {
            return;
        }
        if self.checks == 0 || other.max_increase > self.max_increase {
            self.max_increase = other.max_increase;
        }
        self.checks += other.checks;
        self.violations += other.violations;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub tx: TransmitPolicy,
    pub rx: ReceiveBeamformer,
    /// Integer allocation; `None` when the fronthaul is ideal.
    pub bits: Option<BitAllocation>,
    pub mse: f64,
    pub mse_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub descent: DescentLog,
}

/// What the fronthaul does to each stacked antenna.
#[derive(Debug, Clone)]
enum Fronthaul {
    Quantized(BitAllocation),
    Ideal,
}

impl Fronthaul {
    fn factors(&self, dim: usize) -> Vec<f64> {
        match self {
            Fronthaul::Quantized(bits) => bits.noise_factors(),
            Fronthaul::Ideal => vec![0.0; dim],
        }
    }

    fn bits(&self) -> Option<BitAllocation> {
        match self {
            Fronthaul::Quantized(bits) => Some(bits.clone()),
            Fronthaul::Ideal => None,
        }
    }
}

struct Problem<'a> {
    channels: &'a ChannelRealization,
    config: &'a SystemConfig,
    opts: &'a SolverOptions,
}

#[derive(Debug, Clone)]
struct Transceivers {
    tx: TransmitPolicy,
    rx: ReceiveBeamformer,
    mse: f64,
}

struct FixedBitsOutcome {
    state: Transceivers,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

impl Problem<'_> {
    fn noise(&self, tx: &TransmitPolicy, factors: &[f64]) -> QuantizationProfile {
        noise_levels_from_factors(self.channels, tx, factors, self.config.noise_power_mw)
    }

    fn mse(&self, tx: &TransmitPolicy, rx: &ReceiveBeamformer, factors: &[f64]) -> f64 {
        let omega = self.noise(tx, factors);
        mse_unchecked(self.channels, tx, rx, omega.diag(), self.config.noise_power_mw)
    }

    /// Full-power transmit scalars and the matching MMSE combiner.
    fn initial(&self, factors: &[f64]) -> Result<Transceivers> {
        let tx = TransmitPolicy::full_power(self.config);
        let rx = update_receive(self.channels, &tx, &self.noise(&tx, factors), self.config)?;
        let mse = self.mse(&tx, &rx, factors);
        Ok(Transceivers { tx, rx, mse })
    }

    /// Alternates transmit and receive updates until the MSE improvement of a
    /// full round drops to `eps_inner`.
    ///
    /// Plain alternation crawls along a shallow valley where the misalignment
    /// term is nearly invariant to trading gain between `b` and `m`. After each
    /// round the transmit scalars are also pushed further along their last
    /// displacement (projected onto the power disks) and paired with their MMSE
    /// combiner; the trial point is kept only if it lowers the MSE.
    fn alternate(&self, start: Transceivers, factors: &[f64], log: &mut DescentLog) -> Result<Transceivers> {
        let mut state = start;
        let mut step = EXTRAPOLATION_START;
        for _ in 0..self.opts.max_inner {
            let entry = state.mse;
            let tx = update_transmit_with_factors(self.channels, &state.rx, factors, self.config);
            let omega = self.noise(&tx, factors);
            let after_tx = mse_unchecked(self.channels, &tx, &state.rx, omega.diag(), self.config.noise_power_mw);
            log.record(state.mse, after_tx);

            let rx = update_receive(self.channels, &tx, &omega, self.config)?;
            let after_rx = mse_unchecked(self.channels, &tx, &rx, omega.diag(), self.config.noise_power_mw);
            log.record(after_tx, after_rx);

            let previous_tx = std::mem::replace(&mut state, Transceivers { tx, rx, mse: after_rx }).tx;
            if self.opts.extrapolate {
                match self.extrapolate(&previous_tx, &state.tx, step, factors)? {
                    Some(better) if better.mse < state.mse => {
                        log.record(state.mse, better.mse);
                        state = better;
                        step = (step * EXTRAPOLATION_GROWTH).min(EXTRAPOLATION_MAX);
                    }
                    _ => step = EXTRAPOLATION_START,
                }
            }
            if entry - state.mse <= self.opts.eps_inner {
                break;
            }
        }
        Ok(state)
    }

    /// `b + step (b - b_prev)` clipped to the power disks, with its MMSE
    /// combiner; `None` if the combiner cannot be formed.
    fn extrapolate(
        &self,
        previous: &TransmitPolicy,
        current: &TransmitPolicy,
        step: f64,
        factors: &[f64],
    ) -> Result<Option<Transceivers>> {
        let scalars = current
            .scalars()
            .iter()
            .zip(previous.scalars())
            .zip(&self.config.max_power_mw)
            .map(|((b, b_prev), p)| {
                let trial = b + (b - b_prev) * step;
                let magnitude = trial.norm();
                if magnitude * magnitude > *p {
                    trial * (p.sqrt() / magnitude)
                } else {
                    trial
                }
            })
            .collect();
        let tx = TransmitPolicy::new(scalars);
        let omega = self.noise(&tx, factors);
        let rx = match update_receive(self.channels, &tx, &omega, self.config) {
            Ok(rx) => rx,
            Err(Error::NotPositiveDefinite | Error::NonFinite(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mse = mse_unchecked(self.channels, &tx, &rx, omega.diag(), self.config.noise_power_mw);
        Ok(mse.is_finite().then_some(Transceivers { tx, rx, mse }))
    }

    /// Transceiver optimization with the fronthaul held fixed: repeated
    /// alternation rounds until the MSE improvement is at most `eps2`.
    fn fixed_bits(&self, fronthaul: &Fronthaul, start: Option<Transceivers>, log: &mut DescentLog) -> Result<FixedBitsOutcome> {
        let factors = fronthaul.factors(self.channels.dim());
        let mut state = match start {
            Some(s) => Transceivers {
                mse: self.mse(&s.tx, &s.rx, &factors),
                ..s
            },
            None => self.initial(&factors)?,
        };
        let mut trace = Vec::new();
        let mut converged = false;
        for _ in 0..self.opts.max_outer {
            let previous = state.mse;
            state = self.alternate(state, &factors, log)?;
            trace.push(state.mse);
            if previous - state.mse <= self.opts.eps2 {
                converged = true;
                break;
            }
        }
        Ok(FixedBitsOutcome {
            iterations: trace.len(),
            state,
            trace,
            converged,
        })
    }
}

fn check_inputs(channels: &ChannelRealization, config: &SystemConfig, opts: &SolverOptions) -> Result<()> {
    config.validate()?;
    opts.validate()?;
    channels.check_config(config)
}

fn fixed_scheme(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &SolverOptions,
    fronthaul: Fronthaul,
) -> Result<SolverResult> {
    check_inputs(channels, config, opts)?;
    let problem = Problem { channels, config, opts };
    let mut descent = DescentLog::default();
    let outcome = problem.fixed_bits(&fronthaul, None, &mut descent)?;
    Ok(SolverResult {
        tx: outcome.state.tx,
        rx: outcome.state.rx,
        bits: fronthaul.bits(),
        mse: outcome.state.mse,
        mse_trace: outcome.trace,
        iterations: outcome.iterations,
        converged: outcome.converged,
        descent,
    })
}

/// Transceivers optimized with every RRH splitting its budget equally,
/// `C_{i,m} = floor(T_i / (2BM))`, and no bit reallocation.
pub fn solve_equal_allocation(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    fixed_scheme(channels, config, opts, Fronthaul::Quantized(BitAllocation::equal(config)))
}

/// Transceivers optimized with an ideal fronthaul (no quantization noise).
pub fn solve_lower_bound(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    fixed_scheme(channels, config, opts, Fronthaul::Ideal)
}

/// Colocated array at a single base station: one "RRH" holding every antenna
/// with the baseband processed on site, hence no fronthaul quantization.
pub fn solve_massive_mimo_baseline(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    if config.num_rrhs != 1 {
        return Err(Error::InvalidConfig(format!(
            "massive MIMO baseline expects a single array, got {} RRHs",
            config.num_rrhs
        )));
    }
    solve_lower_bound(channels, config, opts)
}

/// Joint optimization of transmit scalars, receive combiner and integer
/// quantization bits.
///
/// The equal allocation is the starting point, so the transceivers of the
/// first iteration are exactly those of [`solve_equal_allocation`] and the
/// returned MSE can never exceed it.
pub fn alternating_solve(
    channels: &ChannelRealization,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    check_inputs(channels, config, opts)?;
    let problem = Problem { channels, config, opts };
    let mut descent = DescentLog::default();

    let mut bits = BitAllocation::equal(config);
    let mut start = None;
    let mut best: Option<(Transceivers, BitAllocation)> = None;
    let mut trace = Vec::new();
    let mut previous = f64::INFINITY;
    let mut converged = false;

    for _ in 0..opts.max_outer {
        // transceivers for the current allocation
        let fronthaul = Fronthaul::Quantized(bits.clone());
        let state = problem.fixed_bits(&fronthaul, start.take(), &mut descent)?.state;
        let mut iterate_mse = state.mse;
        if best.as_ref().is_none_or(|(b, _)| state.mse < b.mse) {
            best = Some((state.clone(), bits.clone()));
        }

        // continuous allocation, then integer rounding
        let weights = effective_noise_weights(channels, &state.tx, &state.rx, config)?;
        let relaxed = solve_relaxed(&weights, config)?;
        let relaxed_mse = problem.mse(&state.tx, &state.rx, &relaxed.noise_factors());
        descent.record(state.mse, relaxed_mse);

        let (mut rounded, _) = round_with_bisection(&relaxed, config, opts.eps1)?;
        if opts.greedy_fill {
            rounded = greedy_fill(&rounded, &weights, config)?;
        }
        let rounded_mse = problem.mse(&state.tx, &state.rx, &rounded.noise_factors());
        if rounded_mse < state.mse {
            iterate_mse = rounded_mse;
            if best.as_ref().is_none_or(|(b, _)| rounded_mse < b.mse) {
                best = Some((
                    Transceivers {
                        mse: rounded_mse,
                        ..state.clone()
                    },
                    rounded.clone(),
                ));
            }
        }
        trace.push(iterate_mse);

        bits = rounded;
        start = Some(state);
        if previous - iterate_mse <= opts.eps2 {
            converged = true;
            break;
        }
        previous = iterate_mse;
    }

    let (state, bits) = best.expect("at least one outer iteration runs");
    Ok(SolverResult {
        tx: state.tx,
        rx: state.rx,
        bits: Some(bits),
        mse: state.mse,
        iterations: trace.len(),
        mse_trace: trace,
        converged,
        descent,
    })
}
