//! Fronthaul quantization model.
//!
//! Each RRH quantizes the I and Q branches of every antenna output with
//! `C_{i,m}` bits. The distortion is modelled as independent Gaussian noise of
//! power `w_{i,m} = 3 (P_rx + s2) 2^(-2C)`, which makes the stacked
//! covariance `Omega` diagonal.

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::transceiver::{ReceiveBeamformer, TransmitPolicy};

/// Smallest bit count an antenna may be assigned. Set to 1.0 to forbid
/// dropping antennas entirely.
pub const MIN_BITS_PER_ANTENNA: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitMode {
    Continuous,
    Integer,
}

/// Quantization bits per (RRH, antenna), stored in stacked order.
#[derive(Debug, Clone, PartialEq)]
pub struct BitAllocation {
    bits: Vec<f64>,
    antennas_per_rrh: usize,
    mode: BitMode,
}

impl BitAllocation {
    pub fn new(bits: Vec<f64>, antennas_per_rrh: usize, mode: BitMode) -> Result<Self> {
        if antennas_per_rrh == 0 || bits.is_empty() || bits.len() % antennas_per_rrh != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} bit entries do not split into RRHs of {antennas_per_rrh} antennas",
                bits.len()
            )));
        }
        if let Some(b) = bits.iter().find(|b| !(**b >= MIN_BITS_PER_ANTENNA && b.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "bit counts must be finite and at least {MIN_BITS_PER_ANTENNA}, got {b}"
            )));
        }
        if mode == BitMode::Integer && bits.iter().any(|b| b.fract() != 0.0) {
            return Err(Error::InvalidInput("integer allocation has fractional entries".into()));
        }
        Ok(Self {
            bits,
            antennas_per_rrh,
            mode,
        })
    }

    /// Builds an allocation from per-RRH rows.
    pub fn from_rows(rows: &[Vec<f64>], mode: BitMode) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged bit rows".into()));
        }
        Self::new(rows.concat(), m, mode)
    }

    /// `floor(T_i / (2BM))` bits on every antenna of RRH `i`.
    pub fn equal(config: &SystemConfig) -> Self {
        let m = config.antennas_per_rrh;
        let bits = (0..config.num_rrhs)
            .flat_map(|i| {
                let per_antenna = (config.integer_bit_budget(i) / m as u64) as f64;
                std::iter::repeat_n(per_antenna, m)
            })
            .collect();
        Self {
            bits,
            antennas_per_rrh: m,
            mode: BitMode::Integer,
        }
    }

    pub fn zeros(config: &SystemConfig, mode: BitMode) -> Self {
        Self {
            bits: vec![0.0; config.total_antennas()],
            antennas_per_rrh: config.antennas_per_rrh,
            mode,
        }
    }

    pub fn mode(&self) -> BitMode {
        self.mode
    }

    pub fn num_rrhs(&self) -> usize {
        self.bits.len() / self.antennas_per_rrh
    }

    pub fn antennas_per_rrh(&self) -> usize {
        self.antennas_per_rrh
    }

    /// All entries in stacked order.
    pub fn as_slice(&self) -> &[f64] {
        &self.bits
    }

    pub fn get(&self, rrh: usize, antenna: usize) -> f64 {
        self.bits[rrh * self.antennas_per_rrh + antenna]
    }

    pub fn rrh(&self, rrh: usize) -> &[f64] {
        let m = self.antennas_per_rrh;
        &self.bits[rrh * m..(rrh + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.bits.chunks(self.antennas_per_rrh)
    }

    /// Bits per sample used by RRH `i`.
    pub fn total(&self, rrh: usize) -> f64 {
        self.rrh(rrh).iter().sum()
    }

    /// The per-antenna attenuation `2^(-2C)` applied to the received power.
    pub fn noise_factors(&self) -> Vec<f64> {
        self.bits.iter().map(|&c| (-2.0 * c).exp2()).collect()
    }

    /// Checks `2B * sum_m C_{i,m} <= T_i` for every RRH. Integer allocations
    /// are compared in integer arithmetic against the integer budget.
    pub fn is_feasible(&self, config: &SystemConfig) -> bool {
        if self.num_rrhs() != config.num_rrhs || self.antennas_per_rrh != config.antennas_per_rrh {
            return false;
        }
        (0..self.num_rrhs()).all(|i| match self.mode {
            BitMode::Integer => {
                let used: u64 = self.rrh(i).iter().map(|&c| c as u64).sum();
                used <= config.integer_bit_budget(i)
            }
            BitMode::Continuous => {
                self.total(i) <= config.bit_budget(i)
            }
        })
    }

    pub(crate) fn check_config(&self, config: &SystemConfig) -> Result<()> {
        if self.num_rrhs() != config.num_rrhs || self.antennas_per_rrh != config.antennas_per_rrh {
            return Err(Error::DimensionMismatch(format!(
                "bit allocation is {}x{}, config is {}x{}",
                self.num_rrhs(),
                self.antennas_per_rrh,
                config.num_rrhs,
                config.antennas_per_rrh
            )));
        }
        Ok(())
    }
}

/// Quantization noise powers `w_{i,m}`; the diagonal of `Omega` in stacked order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationProfile {
    noise_levels: Vec<f64>,
}

impl QuantizationProfile {
    /// No quantization noise (unlimited fronthaul).
    pub fn zero(dim: usize) -> Self {
        Self {
            noise_levels: vec![0.0; dim],
        }
    }

    pub fn from_levels(noise_levels: Vec<f64>) -> Result<Self> {
        if noise_levels.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("noise levels must be finite and non-negative".into()));
        }
        Ok(Self { noise_levels })
    }

    /// The diagonal of `Omega`.
    pub fn diag(&self) -> &[f64] {
        &self.noise_levels
    }

    pub fn level(&self, rrh: usize, antenna: usize, antennas_per_rrh: usize) -> f64 {
        self.noise_levels[rrh * antennas_per_rrh + antenna]
    }

    pub fn dim(&self) -> usize {
        self.noise_levels.len()
    }
}

fn check_tx(channels: &ChannelRealization, tx: &TransmitPolicy) -> Result<()> {
    if tx.len() != channels.num_devices() {
        return Err(Error::DimensionMismatch(format!(
            "{} transmit scalars for {} devices",
            tx.len(),
            channels.num_devices()
        )));
    }
    Ok(())
}

/// Received signal-plus-noise power per stacked antenna,
/// `sum_k |h_k[j]|^2 |b_k|^2 + s2`.
pub fn received_power(channels: &ChannelRealization, tx: &TransmitPolicy, noise_power: f64) -> Vec<f64> {
    let mut power = vec![noise_power; channels.dim()];
    for (h, b) in channels.stacked_all().iter().zip(tx.scalars()) {
        let gain = b.norm_sqr();
        for (p, c) in power.iter_mut().zip(h.iter()) {
            *p += c.norm_sqr() * gain;
        }
    }
    power
}

/// Noise levels from per-antenna attenuation factors `2^(-2C)`.
pub(crate) fn noise_levels_from_factors(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    factors: &[f64],
    noise_power: f64,
) -> QuantizationProfile {
    let noise_levels = received_power(channels, tx, noise_power)
        .into_iter()
        .zip(factors)
        .map(|(p, f)| 3.0 * p * f)
        .collect();
    QuantizationProfile { noise_levels }
}

/// `w_{i,m} = 3 (sum_k |e_m^T h_{i,k}|^2 |b_k|^2 + s2) 2^(-2 C_{i,m})`.
pub fn quantization_noise_levels(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    bits: &BitAllocation,
    config: &SystemConfig,
) -> Result<QuantizationProfile> {
    channels.check_config(config)?;
    check_tx(channels, tx)?;
    bits.check_config(config)?;
    Ok(noise_levels_from_factors(
        channels,
        tx,
        &bits.noise_factors(),
        config.noise_power_mw,
    ))
}

/// Fronthaul rate `T_i = 2B sum_m C_{i,m}` per RRH, in bits/second.
pub fn fronthaul_rate(bits: &BitAllocation, config: &SystemConfig) -> Vec<f64> {
    bits.rows()
        .map(|row| 2.0 * config.bandwidth_hz * row.iter().sum::<f64>())
        .collect()
}

/// Effective quantization noise weights
/// `xi_{i,m} = 3 |m_{(i-1)M+m}|^2 (sum_j |e_m^T h_{i,j}|^2 |b_j|^2 + s2)`, stacked
/// order, so that `m^H Omega m = sum xi 2^(-2C)` for any allocation.
pub fn effective_noise_weights(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    rx: &ReceiveBeamformer,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    channels.check_config(config)?;
    check_tx(channels, tx)?;
    if rx.len() != channels.dim() {
        return Err(Error::DimensionMismatch(format!(
            "combiner length {} does not match {} stacked antennas",
            rx.len(),
            channels.dim()
        )));
    }
    Ok(received_power(channels, tx, config.noise_power_mw)
        .into_iter()
        .zip(rx.combiner().iter())
        .map(|(p, m)| 3.0 * m.norm_sqr() * p)
        .collect())
}

/// `sum xi 2^(-2C)` over matching entries.
pub fn weighted_quantization_noise(weights: &[f64], bits: &[f64]) -> f64 {
    weights
        .iter()
        .zip(bits)
        .map(|(xi, c)| xi * (-2.0 * c).exp2())
        .sum()
}
