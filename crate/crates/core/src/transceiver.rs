//! Transmit scalars, MMSE receive combining and the AirComp MSE.
//!
//! With the bit allocation fixed, the MSE
//!
//! ```text
//! MSE = sum_k |m^H h_k b_k - 1|^2 + m^H (s2 I + Omega) m
//! ```
//!
//! is a convex quadratic in `m` for fixed `{b_k}` and separates over devices
//! for fixed `m`, so both block updates have closed forms.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::quantization::{BitAllocation, QuantizationProfile};

/// Slack allowed on the per-device power constraint `|b_k|^2 <= P_k`.
pub const POWER_SLACK: f64 = 1e-9;

/// Complex transmit scalars `b_k`, one per device.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitPolicy {
    scalars: Vec<Complex64>,
}

impl TransmitPolicy {
    pub fn new(scalars: Vec<Complex64>) -> Self {
        Self { scalars }
    }

    /// Every device transmits at full power with zero phase.
    pub fn full_power(config: &SystemConfig) -> Self {
        Self::new(
            config
                .max_power_mw
                .iter()
                .map(|p| Complex64::new(p.sqrt(), 0.0))
                .collect(),
        )
    }

    pub fn scalars(&self) -> &[Complex64] {
        &self.scalars
    }

    pub fn len(&self) -> usize {
        self.scalars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty()
    }

    pub fn satisfies_power(&self, config: &SystemConfig) -> bool {
        self.scalars.len() == config.max_power_mw.len()
            && self
                .scalars
                .iter()
                .zip(&config.max_power_mw)
                .all(|(b, p)| b.norm_sqr() <= p + POWER_SLACK)
    }
}

/// BBU combining vector `m` in stacked order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveBeamformer {
    combiner: DVector<Complex64>,
}

impl ReceiveBeamformer {
    pub fn new(combiner: DVector<Complex64>) -> Self {
        Self { combiner }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(DVector::zeros(dim))
    }

    pub fn combiner(&self) -> &DVector<Complex64> {
        &self.combiner
    }

    pub fn len(&self) -> usize {
        self.combiner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combiner.is_empty()
    }
}

/// `a^H b`.
pub(crate) fn inner(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn is_finite(c: &Complex64) -> bool {
    c.re.is_finite() && c.im.is_finite()
}

fn check_dims(
    channels: &ChannelRealization,
    tx: Option<&TransmitPolicy>,
    rx: Option<&ReceiveBeamformer>,
    quant: Option<&QuantizationProfile>,
) -> Result<()> {
    if let Some(tx) = tx {
        if tx.len() != channels.num_devices() {
            return Err(Error::DimensionMismatch(format!(
                "{} transmit scalars for {} devices",
                tx.len(),
                channels.num_devices()
            )));
        }
    }
    if let Some(rx) = rx {
        if rx.len() != channels.dim() {
            return Err(Error::DimensionMismatch(format!(
                "combiner length {} for {} stacked antennas",
                rx.len(),
                channels.dim()
            )));
        }
    }
    if let Some(q) = quant {
        if q.dim() != channels.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} quantization noise levels for {} stacked antennas",
                q.dim(),
                channels.dim()
            )));
        }
    }
    Ok(())
}

/// Analytic MSE of the AirComp estimate.
pub fn evaluate_mse(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    rx: &ReceiveBeamformer,
    quant: &QuantizationProfile,
    config: &SystemConfig,
) -> Result<f64> {
    check_dims(channels, Some(tx), Some(rx), Some(quant))?;
    Ok(mse_unchecked(channels, tx, rx, quant.diag(), config.noise_power_mw))
}

pub(crate) fn mse_unchecked(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    rx: &ReceiveBeamformer,
    omega: &[f64],
    noise_power: f64,
) -> f64 {
    let m = rx.combiner();
    let misalignment: f64 = channels
        .stacked_all()
        .iter()
        .zip(tx.scalars())
        .map(|(h, b)| (inner(m, h) * b - 1.0).norm_sqr())
        .sum();
    let noise: f64 = m
        .iter()
        .zip(omega)
        .map(|(mj, w)| mj.norm_sqr() * (noise_power + w))
        .sum();
    misalignment + noise
}

/// MMSE combiner `(sum_k |b_k|^2 h_k h_k^H + s2 I + Omega)^-1 sum_k b_k h_k`,
/// solved through a Cholesky factorization.
pub fn update_receive(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    quant: &QuantizationProfile,
    config: &SystemConfig,
) -> Result<ReceiveBeamformer> {
    check_dims(channels, Some(tx), None, Some(quant))?;
    if !tx.scalars().iter().all(is_finite) {
        return Err(Error::NonFinite("transmit scalars".into()));
    }
    if !quant.diag().iter().all(|w| w.is_finite()) || !config.noise_power_mw.is_finite() {
        return Err(Error::NonFinite("noise levels".into()));
    }
    let (system, rhs) = normal_equations(channels, tx, quant.diag(), config.noise_power_mw);
    let chol = Cholesky::new(system).ok_or(Error::NotPositiveDefinite)?;
    let m = chol.solve(&rhs);
    if !m.iter().all(is_finite) {
        return Err(Error::NonFinite("receive combiner".into()));
    }
    Ok(ReceiveBeamformer::new(m))
}

/// The Hermitian system matrix and right-hand side that define the MMSE combiner.
pub fn normal_equations(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    omega: &[f64],
    noise_power: f64,
) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let n = channels.dim();
    let mut system = DMatrix::<Complex64>::zeros(n, n);
    let mut rhs = DVector::<Complex64>::zeros(n);
    for (h, b) in channels.stacked_all().iter().zip(tx.scalars()) {
        let gain = b.norm_sqr();
        system.ger(Complex64::new(gain, 0.0), h, &h.conjugate(), Complex64::new(1.0, 0.0));
        rhs.axpy(*b, h, Complex64::new(1.0, 0.0));
    }
    for (j, w) in omega.iter().enumerate() {
        system[(j, j)] += Complex64::new(noise_power + w, 0.0);
    }
    (system, rhs)
}

/// Per-device coefficients of the transmit subproblem: the effective gain
/// `g_k = m^H h_k` and the quantization loading
/// `a_k = sum_j 3 |m_j|^2 |h_k[j]|^2 2^(-2 C_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitTerms {
    pub gain: Complex64,
    pub loading: f64,
}

impl TransmitTerms {
    /// The device's share of the MSE, `|g b - 1|^2 + a |b|^2`.
    pub fn objective(&self, b: Complex64) -> f64 {
        (self.gain * b - 1.0).norm_sqr() + self.loading * b.norm_sqr()
    }

    /// Minimizer of [`Self::objective`] over `|b|^2 <= max_power`.
    pub fn optimal_scalar(&self, max_power: f64) -> Complex64 {
        let curvature = self.gain.norm_sqr() + self.loading;
        if curvature <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let b = self.gain.conj() / curvature;
        let magnitude = b.norm();
        if magnitude * magnitude > max_power {
            b * (max_power.sqrt() / magnitude)
        } else {
            b
        }
    }
}

/// Computes [`TransmitTerms`] for every device given per-antenna noise factors
/// `2^(-2C_j)` (all zero for an ideal fronthaul).
pub fn transmit_terms(
    channels: &ChannelRealization,
    rx: &ReceiveBeamformer,
    noise_factors: &[f64],
) -> Vec<TransmitTerms> {
    let m = rx.combiner();
    let weights: Vec<f64> = m
        .iter()
        .zip(noise_factors)
        .map(|(mj, f)| 3.0 * mj.norm_sqr() * f)
        .collect();
    channels
        .stacked_all()
        .iter()
        .map(|h| TransmitTerms {
            gain: inner(m, h),
            loading: h.iter().zip(&weights).map(|(c, w)| c.norm_sqr() * w).sum(),
        })
        .collect()
}

pub(crate) fn update_transmit_with_factors(
    channels: &ChannelRealization,
    rx: &ReceiveBeamformer,
    noise_factors: &[f64],
    config: &SystemConfig,
) -> TransmitPolicy {
    TransmitPolicy::new(
        transmit_terms(channels, rx, noise_factors)
            .iter()
            .zip(&config.max_power_mw)
            .map(|(t, p)| t.optimal_scalar(*p))
            .collect(),
    )
}

/// Optimal transmit scalars for a fixed combiner and bit allocation, including
/// the dependence of `Omega` on `{b_k}`.
pub fn update_transmit(
    channels: &ChannelRealization,
    rx: &ReceiveBeamformer,
    bits: &BitAllocation,
    config: &SystemConfig,
) -> Result<TransmitPolicy> {
    channels.check_config(config)?;
    check_dims(channels, None, Some(rx), None)?;
    bits.check_config(config)?;
    Ok(update_transmit_with_factors(
        channels,
        rx,
        &bits.noise_factors(),
        config,
    ))
}
