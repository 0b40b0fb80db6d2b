//! Reference computations written straight from the model, sharing no code
//! with the library beyond its data types.

#![allow(dead_code)]

use aircomp::channel::{standard_complex_normal, ChannelRealization, SystemConfig};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `sum_k |m^H h_k b_k - 1|^2 + sum_j |m_j|^2 (s2 + w_j)` with explicit loops.
pub fn mse_oracle(h: &[Vec<Complex64>], b: &[Complex64], m: &[Complex64], omega: &[f64], s2: f64) -> f64 {
    let mut total = 0.0;
    for (hk, bk) in h.iter().zip(b) {
        let mut aligned = c(0.0, 0.0);
        for (mj, hkj) in m.iter().zip(hk) {
            aligned += mj.conj() * hkj;
        }
        total += (aligned * bk - 1.0).norm_sqr();
    }
    for (mj, wj) in m.iter().zip(omega) {
        total += mj.norm_sqr() * (s2 + wj);
    }
    total
}

/// `w_j = 3 (sum_k |h_kj|^2 |b_k|^2 + s2) 2^(-2 C_j)`.
pub fn quant_noise_oracle(h: &[Vec<Complex64>], b: &[Complex64], bits: &[f64], s2: f64) -> Vec<f64> {
    (0..bits.len())
        .map(|j| {
            let power: f64 = h.iter().zip(b).map(|(hk, bk)| hk[j].norm_sqr() * bk.norm_sqr()).sum();
            3.0 * (power + s2) * 2f64.powf(-2.0 * bits[j])
        })
        .collect()
}

/// Euclidean norm of the central-difference gradient of the MSE in the real
/// and imaginary parts of `m`.
pub fn mse_gradient_norm_in_m(
    h: &[Vec<Complex64>],
    b: &[Complex64],
    m: &[Complex64],
    omega: &[f64],
    s2: f64,
    step: f64,
) -> f64 {
    let mut sq = 0.0;
    for j in 0..m.len() {
        for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
            let mut plus = m.to_vec();
            let mut minus = m.to_vec();
            plus[j] += dir * step;
            minus[j] -= dir * step;
            let d = (mse_oracle(h, b, &plus, omega, s2) - mse_oracle(h, b, &minus, omega, s2)) / (2.0 * step);
            sq += d * d;
        }
    }
    sq.sqrt()
}

/// The MSE terms that depend on device `k`'s scalar when `m` is fixed and
/// the quantization noise scales with the transmit power:
/// `|m^H h_k b - 1|^2 + |b|^2 sum_j 3 |m_j|^2 |h_kj|^2 2^(-2 C_j)`.
pub fn device_objective(hk: &[Complex64], m: &[Complex64], bits: &[f64], b: Complex64) -> f64 {
    let mut aligned = c(0.0, 0.0);
    let mut loading = 0.0;
    for j in 0..m.len() {
        aligned += m[j].conj() * hk[j];
        loading += 3.0 * m[j].norm_sqr() * hk[j].norm_sqr() * 2f64.powf(-2.0 * bits[j]);
    }
    (aligned * b - 1.0).norm_sqr() + loading * b.norm_sqr()
}

/// Minimizes `f` over the disk `|b|^2 <= power` by a polar grid that is
/// repeatedly shrunk around the best point.
pub fn grid_minimize(f: impl Fn(Complex64) -> f64, power: f64) -> (Complex64, f64) {
    let radius = power.sqrt();
    let mut best = (c(0.0, 0.0), f(c(0.0, 0.0)));
    let (mut r_lo, mut r_hi) = (0.0, radius);
    let (mut p_lo, mut p_hi) = (-std::f64::consts::PI, std::f64::consts::PI);
    let n = 60;
    for _ in 0..40 {
        let mut best_rp = (0.0, 0.0);
        for i in 0..=n {
            let r = r_lo + (r_hi - r_lo) * i as f64 / n as f64;
            for j in 0..=n {
                let phi = p_lo + (p_hi - p_lo) * j as f64 / n as f64;
                let b = Complex64::from_polar(r, phi);
                let v = f(b);
                if v < best.1 {
                    best = (b, v);
                    best_rp = (r, phi);
                }
            }
        }
        if best_rp == (0.0, 0.0) {
            best_rp = (best.0.norm(), best.0.arg());
        }
        let dr = 2.0 * (r_hi - r_lo) / n as f64;
        let dp = 2.0 * (p_hi - p_lo) / n as f64;
        r_lo = (best_rp.0 - dr).max(0.0);
        r_hi = (best_rp.0 + dr).min(radius);
        p_lo = best_rp.1 - dp;
        p_hi = best_rp.1 + dp;
    }
    best
}

/// Water-filling by bisection on the multiplier: `C_j(l) = max(0, log2(w_j 2 ln2 / l) / 2)`.
pub fn water_fill_oracle(weights: &[f64], budget: f64) -> Vec<f64> {
    let alloc = |lambda: f64| -> Vec<f64> {
        weights
            .iter()
            .map(|w| {
                if *w <= 0.0 {
                    0.0
                } else {
                    (0.5 * (w * 2.0 * std::f64::consts::LN_2 / lambda).log2()).max(0.0)
                }
            })
            .collect()
    };
    if budget <= 0.0 || weights.iter().all(|w| *w <= 0.0) {
        return vec![0.0; weights.len()];
    }
    let (mut lo, mut hi) = (1e-300f64, weights.iter().cloned().fold(0.0, f64::max) * 2.0 * std::f64::consts::LN_2);
    for _ in 0..3000 {
        let mid = (lo * hi).sqrt();
        if alloc(mid).iter().sum::<f64>() > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    alloc(hi)
}

pub fn allocation_objective_oracle(weights: &[f64], bits: &[f64]) -> f64 {
    weights.iter().zip(bits).map(|(w, c)| w * 2f64.powf(-2.0 * c)).sum()
}

/// A config with unit-scale quantities and no fronthaul limit in use.
pub fn small_config(devices: usize, rrhs: usize, antennas: usize, noise: f64, power: f64) -> SystemConfig {
    SystemConfig {
        num_devices: devices,
        num_rrhs: rrhs,
        antennas_per_rrh: antennas,
        fronthaul_capacity_bps: vec![0.0; rrhs],
        max_power_mw: vec![power; devices],
        noise_power_mw: noise,
        ..SystemConfig::default()
    }
}

/// Random unit-variance channels, stacked per device.
pub fn random_channels<R: Rng>(devices: usize, dim: usize, rng: &mut R) -> Vec<Vec<Complex64>> {
    (0..devices)
        .map(|_| (0..dim).map(|_| standard_complex_normal(rng)).collect())
        .collect()
}

pub fn realization(h: &[Vec<Complex64>], antennas_per_rrh: usize) -> ChannelRealization {
    ChannelRealization::from_stacked(
        h.iter().map(|hk| DVector::from_vec(hk.clone())).collect(),
        antennas_per_rrh,
    )
    .unwrap()
}

pub fn random_scalar_in_disk<R: Rng>(power: f64, rng: &mut R) -> Complex64 {
    let r = power.sqrt() * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}
