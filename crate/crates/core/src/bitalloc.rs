//! Quantization bit allocation across the antennas of each RRH.
//!
//! With the transceivers fixed, the only bit-dependent part of the MSE is
//! `sum_{i,m} xi_{i,m} 2^(-2 C_{i,m})`, which splits into one convex problem
//! per RRH under the budget `sum_m C_{i,m} <= T_i / (2B)`. The continuous
//! relaxation is solved by water-filling and then integerized with a
//! per-RRH rounding threshold found by bisection.

use std::cmp::Ordering;
use std::f64::consts::LN_2;

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::quantization::{weighted_quantization_noise, BitAllocation, BitMode, MIN_BITS_PER_ANTENNA};

/// Iteration cap for the threshold bisection.
pub const MAX_BISECTION_STEPS: usize = 50;

/// Upper bound on the number of states `brute_force_alloc` will enumerate.
pub const BRUTE_FORCE_STATE_LIMIT: f64 = 1e7;

/// Fractional parts below this are treated as exact integers before rounding.
const INTEGER_SNAP: f64 = 1e-9;

/// Per-RRH rounding thresholds `tau_i` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundingThresholds(Vec<f64>);

impl RoundingThresholds {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        Some(w) => Err(Error::InvalidInput(format!(
            "noise weights must be finite and non-negative, got {w}"
        ))),
        None => Ok(()),
    }
}

/// Minimizes `sum_m xi_m 2^(-2 C_m)` subject to `sum_m C_m <= budget`,
/// `C_m >= 0`.
///
/// Stationarity gives `C_m = max(0, log2(xi_m)/2 + nu)` with a common water
/// level `nu`. The active set is a prefix of the weights sorted in decreasing
/// order, so the level is found exactly by scanning prefixes.
pub fn water_fill(weights: &[f64], budget: f64) -> Result<Vec<f64>> {
    check_weights(weights)?;
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bit budget must be finite and non-negative, got {budget}"
        )));
    }
    let mut bits = vec![0.0; weights.len()];
    if budget == 0.0 {
        return Ok(bits);
    }
    let mut order: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
    if order.is_empty() {
        return Ok(bits);
    }
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap_or(Ordering::Equal));
    let half_log: Vec<f64> = order.iter().map(|&j| 0.5 * weights[j].log2()).collect();

    let mut level = budget - half_log[0];
    let mut prefix_sum = 0.0;
    for (k, hl) in half_log.iter().enumerate() {
        prefix_sum += hl;
        let candidate = (budget - prefix_sum) / (k + 1) as f64;
        if hl + candidate > 0.0 {
            level = candidate;
        } else {
            break;
        }
    }
    for (&j, hl) in order.iter().zip(&half_log) {
        bits[j] = (hl + level).max(0.0);
    }
    // rounding in the level can overshoot the budget by a few ulps
    let mut used: f64 = bits.iter().sum();
    while used > budget {
        let shrink = budget / used * (1.0 - f64::EPSILON);
        bits.iter_mut().for_each(|c| *c *= shrink);
        used = bits.iter().sum();
    }
    Ok(bits)
}

/// KKT residual of a candidate solution to the per-RRH relaxed problem:
/// the largest relative violation of primal feasibility, stationarity on the
/// active set, dual feasibility off it, and complementary slackness.
pub fn kkt_residual(weights: &[f64], bits: &[f64], budget: f64) -> f64 {
    let used: f64 = bits.iter().sum();
    let scale = budget.max(1.0);
    let mut residual = ((used - budget) / scale).max(0.0);
    residual = bits.iter().fold(residual, |r, &c| r.max(-c));

    // marginal decrease per bit, 2 ln2 xi 2^(-2C)
    let marginal = |j: usize| 2.0 * LN_2 * weights[j] * (-2.0 * bits[j]).exp2();
    let active: Vec<usize> = (0..bits.len()).filter(|&j| bits[j] > 0.0).collect();
    if active.is_empty() {
        // multiplier may be arbitrarily large; only an unused positive budget
        // with some useful antenna would be suboptimal
        if budget > 0.0 && weights.iter().any(|&w| w > 0.0) {
            residual = residual.max(budget / scale);
        }
        return residual;
    }
    let lambda = active.iter().map(|&j| marginal(j)).sum::<f64>() / active.len() as f64;
    for j in 0..bits.len() {
        let g = marginal(j);
        if bits[j] > 0.0 {
            residual = residual.max((g - lambda).abs() / lambda);
        } else {
            residual = residual.max(((g - lambda) / lambda).max(0.0));
        }
    }
    if lambda > 0.0 {
        residual = residual.max((budget - used).abs() / scale);
    }
    residual
}

/// Solves the continuous bit allocation for every RRH. `weights` are the
/// effective noise weights `xi` in stacked order.
pub fn solve_relaxed(weights: &[f64], config: &SystemConfig) -> Result<BitAllocation> {
    check_weights(weights)?;
    let m = config.antennas_per_rrh;
    if weights.len() != config.total_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} antennas",
            weights.len(),
            config.total_antennas()
        )));
    }
    let mut bits = Vec::with_capacity(weights.len());
    for (i, row) in weights.chunks(m).enumerate() {
        let budget = config.bit_budget(i);
        let reserved = MIN_BITS_PER_ANTENNA * m as f64;
        if !(budget >= reserved) {
            return Err(Error::InvalidInput(format!(
                "RRH {i} budget {budget} bits cannot cover the per-antenna minimum"
            )));
        }
        bits.extend(
            water_fill(row, budget - reserved)?
                .into_iter()
                .map(|c| c + MIN_BITS_PER_ANTENNA),
        );
    }
    BitAllocation::new(bits, m, BitMode::Continuous)
}

/// Threshold rounding of one value: floor when the fractional part is at most
/// `tau`, ceil otherwise.
pub fn round_with_threshold(value: f64, tau: f64) -> f64 {
    let floor = value.floor();
    let frac = value - floor;
    if frac <= INTEGER_SNAP || frac <= tau {
        floor
    } else {
        value.ceil()
    }
}

fn round_row(row: &[f64], tau: f64) -> Vec<f64> {
    row.iter().map(|&c| round_with_threshold(c, tau)).collect()
}

fn row_total(row: &[f64]) -> u64 {
    row.iter().map(|&c| c as u64).sum()
}

/// Integerizes a relaxed allocation RRH by RRH, bisecting the rounding
/// threshold over `[0, 1]` until the bracket is narrower than `tolerance`.
/// Returns the candidate at the smallest feasible threshold tested.
pub fn round_with_bisection(
    relaxed: &BitAllocation,
    config: &SystemConfig,
    tolerance: f64,
) -> Result<(BitAllocation, RoundingThresholds)> {
    relaxed.check_config(config)?;
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bisection tolerance must be positive, got {tolerance}"
        )));
    }
    let mut bits = Vec::with_capacity(relaxed.as_slice().len());
    let mut thresholds = Vec::with_capacity(config.num_rrhs);
    for i in 0..config.num_rrhs {
        let row = relaxed.rrh(i);
        let budget = config.bit_budget(i);
        let used: f64 = row.iter().sum();
        if used > budget * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "relaxed allocation for RRH {i} uses {used} bits, budget is {budget}"
            )));
        }
        let limit = config.integer_bit_budget(i);
        let feasible = |tau: f64| row_total(&round_row(row, tau)) <= limit;

        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..MAX_BISECTION_STEPS {
            if hi - lo <= tolerance {
                break;
            }
            let tau = 0.5 * (lo + hi);
            if feasible(tau) {
                hi = tau;
            } else {
                lo = tau;
            }
        }
        bits.extend(round_row(row, hi));
        thresholds.push(hi);
    }
    let rounded = BitAllocation::new(bits, config.antennas_per_rrh, BitMode::Integer)?;
    debug_assert!(rounded.is_feasible(config));
    Ok((rounded, RoundingThresholds(thresholds)))
}

/// Exhaustive search for one RRH: minimizes `sum xi 2^(-2C)` over integer
/// allocations with `sum C <= budget` and `C_m <= max_bits_per_antenna`.
/// Ties go to the lexicographically smallest allocation.
pub fn brute_force_alloc(weights: &[f64], budget: u64, max_bits_per_antenna: u64) -> Result<Vec<u64>> {
    check_weights(weights)?;
    let states = (max_bits_per_antenna as f64 + 1.0).powi(weights.len() as i32);
    if states > BRUTE_FORCE_STATE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            states,
            limit: BRUTE_FORCE_STATE_LIMIT,
        });
    }
    let objective = |c: &[u64]| -> f64 {
        weights
            .iter()
            .zip(c)
            .map(|(w, &b)| w * (-2.0 * b as f64).exp2())
            .sum()
    };
    let mut current = vec![0u64; weights.len()];
    let mut best = current.clone();
    let mut best_value = objective(&current);
    // odometer with the last digit fastest visits allocations in lexicographic order
    'outer: loop {
        let mut pos = weights.len();
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            if current[pos] < max_bits_per_antenna {
                current[pos] += 1;
                current[pos + 1..].iter_mut().for_each(|c| *c = 0);
                break;
            }
        }
        if current.iter().sum::<u64>() > budget {
            continue;
        }
        let value = objective(&current);
        if value < best_value - 1e-12 * best_value.abs() {
            best_value = value;
            best.clone_from(&current);
        }
    }
    Ok(best)
}

/// Spends any budget left over after rounding one bit at a time, each time on
/// the antenna with the largest objective decrease (lowest index on ties).
pub fn greedy_fill(allocation: &BitAllocation, weights: &[f64], config: &SystemConfig) -> Result<BitAllocation> {
    allocation.check_config(config)?;
    check_weights(weights)?;
    if allocation.mode() != BitMode::Integer {
        return Err(Error::InvalidInput("greedy fill needs an integer allocation".into()));
    }
    if weights.len() != allocation.as_slice().len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} antennas",
            weights.len(),
            allocation.as_slice().len()
        )));
    }
    let m = config.antennas_per_rrh;
    let mut bits = allocation.as_slice().to_vec();
    for i in 0..config.num_rrhs {
        let row = &mut bits[i * m..(i + 1) * m];
        let xi = &weights[i * m..(i + 1) * m];
        let mut spare = config.integer_bit_budget(i).saturating_sub(row_total(row));
        while spare > 0 {
            let (best, gain) = row
                .iter()
                .zip(xi)
                .map(|(&c, &w)| 0.75 * w * (-2.0 * c).exp2())
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, g)| if g > acc.1 { (j, g) } else { acc });
            if gain <= 0.0 {
                // every remaining gain is zero, so the loop would keep picking index 0
                row[0] += spare as f64;
                break;
            }
            row[best] += 1.0;
            spare -= 1;
        }
    }
    BitAllocation::new(bits, m, BitMode::Integer)
}

/// Objective of the bit-allocation subproblem for a whole allocation.
pub fn allocation_objective(weights: &[f64], bits: &BitAllocation) -> f64 {
    weighted_quantization_noise(weights, bits.as_slice())
}
