use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{standard_complex_normal, ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::quantization::QuantizationProfile;
use crate::transceiver::{inner, ReceiveBeamformer, TransmitPolicy};

/// Sample mean of `|g_hat - g|^2` over simulated symbols and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMse {
    pub mean: f64,
    pub std_error: f64,
    pub num_symbols: usize,
}

/// Simulates `num_symbols` AirComp slots: unit-variance `CN(0, 1)` symbols,
/// receiver noise `CN(0, s2 I)` and quantization noise `CN(0, Omega)` are
/// drawn, the stacked quantized signal is formed and combined with `m`, and
/// the squared error against `g = sum_k x_k` is averaged.
pub fn simulate_transmission<R: Rng + ?Sized>(
    channels: &ChannelRealization,
    tx: &TransmitPolicy,
    rx: &ReceiveBeamformer,
    quant: &QuantizationProfile,
    config: &SystemConfig,
    num_symbols: usize,
    rng: &mut R,
) -> Result<EmpiricalMse> {
    if num_symbols == 0 {
        return Err(Error::InvalidInput("num_symbols must be at least 1".into()));
    }
    let dim = channels.dim();
    if tx.len() != channels.num_devices() || rx.len() != dim || quant.dim() != dim {
        return Err(Error::DimensionMismatch(
            "transmit policy, combiner and noise levels must match the channel".into(),
        ));
    }
    let noise_std = config.noise_power_mw.sqrt();
    let quant_std: Vec<f64> = quant.diag().iter().map(|w| w.sqrt()).collect();
    // columns h_k b_k
    let effective: Vec<DVector<Complex64>> = channels
        .stacked_all()
        .iter()
        .zip(tx.scalars())
        .map(|(h, b)| h * *b)
        .collect();

    let mut received = DVector::<Complex64>::zeros(dim);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..num_symbols {
        received.fill(Complex64::new(0.0, 0.0));
        let mut target = Complex64::new(0.0, 0.0);
        for column in &effective {
            let x = standard_complex_normal(rng);
            target += x;
            received.axpy(x, column, Complex64::new(1.0, 0.0));
        }
        for (y, q_std) in received.iter_mut().zip(&quant_std) {
            *y += standard_complex_normal(rng) * noise_std + standard_complex_normal(rng) * *q_std;
        }
        let estimate = inner(rx.combiner(), &received);
        let err = (estimate - target).norm_sqr();
        sum += err;
        sum_sq += err * err;
    }
    let n = num_symbols as f64;
    let mean = sum / n;
    let variance = if num_symbols > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(EmpiricalMse {
        mean,
        std_error: (variance / n).sqrt(),
        num_symbols,
    })
}
