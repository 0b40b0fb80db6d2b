//! Network topology and Rayleigh fading channel generation.
//!
//! Devices and RRHs are dropped uniformly in a disk centred at the origin,
//! each device-to-antenna link gets an independent `CN(0, 1)` small-scale
//! coefficient scaled by the square root of a log-distance path-loss gain.
//! All powers are carried in milliwatts.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Converts a value in dB to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a power in dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// Noise power per receive antenna in mW: PSD + noise figure + 10·log10(B).
pub fn noise_power_mw(psd_dbm_hz: f64, noise_figure_db: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_mw(psd_dbm_hz + noise_figure_db + 10.0 * bandwidth_hz.log10())
}

/// Network dimensions, budgets and propagation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_devices: usize,
    pub num_rrhs: usize,
    pub antennas_per_rrh: usize,
    /// Channel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Fronthaul capacity in bits/second, one entry per RRH.
    pub fronthaul_capacity_bps: Vec<f64>,
    /// Transmit power budget in mW, one entry per device.
    pub max_power_mw: Vec<f64>,
    /// Noise power per receive antenna in mW.
    pub noise_power_mw: f64,
    pub region_radius_m: f64,
    /// Linear path-loss gain at the reference distance (30 dB loss = 1e-3).
    pub pathloss_ref_gain: f64,
    pub pathloss_ref_dist_m: f64,
    pub pathloss_exp: f64,
}

impl Default for SystemConfig {
    /// 15 devices, 3 RRHs with 8 antennas, 10 MHz, 23 dBm, -169 dBm/Hz with a
    /// 7 dB noise figure, 500 m radius, 30 dB reference loss at 1 m, exponent 3.
    fn default() -> Self {
        let bandwidth_hz = 10e6;
        let num_devices = 15;
        let num_rrhs = 3;
        let antennas_per_rrh = 8;
        Self {
            num_devices,
            num_rrhs,
            antennas_per_rrh,
            bandwidth_hz,
            // two bits per antenna
            fronthaul_capacity_bps: vec![2.0 * bandwidth_hz * antennas_per_rrh as f64 * 2.0; num_rrhs],
            max_power_mw: vec![dbm_to_mw(23.0); num_devices],
            noise_power_mw: noise_power_mw(-169.0, 7.0, bandwidth_hz),
            region_radius_m: 500.0,
            pathloss_ref_gain: db_to_linear(-30.0),
            pathloss_ref_dist_m: 1.0,
            pathloss_exp: 3.0,
        }
    }
}

impl SystemConfig {
    /// Length of the stacked receive vector, `N_A * M`.
    pub fn total_antennas(&self) -> usize {
        self.num_rrhs * self.antennas_per_rrh
    }

    /// Per-RRH budget in bits per sample, `T_i / (2B)`.
    pub fn bit_budget(&self, rrh: usize) -> f64 {
        self.fronthaul_capacity_bps[rrh] / (2.0 * self.bandwidth_hz)
    }

    /// Largest integer bit count `n` with `2B * n <= T_i`.
    pub fn integer_bit_budget(&self, rrh: usize) -> u64 {
        let capacity = self.fronthaul_capacity_bps[rrh];
        let per_bit = 2.0 * self.bandwidth_hz;
        let mut n = (capacity / per_bit).floor().max(0.0) as u64;
        // correct for division rounding in either direction
        while n > 0 && per_bit * n as f64 > capacity {
            n -= 1;
        }
        while per_bit * (n + 1) as f64 <= capacity {
            n += 1;
        }
        n
    }

    /// Returns a copy with every RRH given the same fronthaul capacity.
    pub fn with_uniform_capacity(&self, capacity_bps: f64) -> Self {
        let mut config = self.clone();
        config.fronthaul_capacity_bps = vec![capacity_bps; self.num_rrhs];
        config
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_devices == 0 {
            return fail("num_devices must be at least 1".into());
        }
        if self.num_rrhs == 0 {
            return fail("num_rrhs must be at least 1".into());
        }
        if self.antennas_per_rrh == 0 {
            return fail("antennas_per_rrh must be at least 1".into());
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return fail(format!("bandwidth must be positive, got {}", self.bandwidth_hz));
        }
        if self.fronthaul_capacity_bps.len() != self.num_rrhs {
            return fail(format!(
                "expected {} fronthaul capacities, got {}",
                self.num_rrhs,
                self.fronthaul_capacity_bps.len()
            ));
        }
        if let Some(c) = self
            .fronthaul_capacity_bps
            .iter()
            .find(|c| !(**c >= 0.0 && c.is_finite()))
        {
            return fail(format!("fronthaul capacity must be finite and non-negative, got {c}"));
        }
        if self.max_power_mw.len() != self.num_devices {
            return fail(format!(
                "expected {} power budgets, got {}",
                self.num_devices,
                self.max_power_mw.len()
            ));
        }
        if let Some(p) = self.max_power_mw.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return fail(format!("power budget must be positive, got {p}"));
        }
        if !(self.noise_power_mw > 0.0 && self.noise_power_mw.is_finite()) {
            return fail(format!("noise power must be positive, got {}", self.noise_power_mw));
        }
        if !(self.region_radius_m > 0.0 && self.region_radius_m.is_finite()) {
            return fail(format!("region radius must be positive, got {}", self.region_radius_m));
        }
        if !(self.pathloss_ref_gain > 0.0 && self.pathloss_ref_gain <= 1.0) {
            return fail(format!(
                "path-loss reference gain must lie in (0, 1], got {}",
                self.pathloss_ref_gain
            ));
        }
        if !(self.pathloss_ref_dist_m > 0.0 && self.pathloss_ref_dist_m.is_finite()) {
            return fail(format!(
                "path-loss reference distance must be positive, got {}",
                self.pathloss_ref_dist_m
            ));
        }
        if !(self.pathloss_exp > 0.0 && self.pathloss_exp.is_finite()) {
            return fail(format!("path-loss exponent must be positive, got {}", self.pathloss_exp));
        }
        Ok(())
    }
}

/// A point in the plane, in meters.
pub type Position = [f64; 2];

fn distance(a: Position, b: Position) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub device_positions: Vec<Position>,
    pub rrh_positions: Vec<Position>,
}

impl Topology {
    /// Distance between RRH `rrh` and device `device`.
    pub fn distance(&self, rrh: usize, device: usize) -> f64 {
        distance(self.rrh_positions[rrh], self.device_positions[device])
    }
}

/// Draws a point uniformly over the disk of the given radius.
pub fn sample_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Position {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// Drops devices, then RRHs, uniformly over the disk of radius `R`.
pub fn sample_topology<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Topology {
    let device_positions = (0..config.num_devices)
        .map(|_| sample_in_disk(config.region_radius_m, rng))
        .collect();
    let rrh_positions = (0..config.num_rrhs)
        .map(|_| sample_in_disk(config.region_radius_m, rng))
        .collect();
    Topology {
        device_positions,
        rrh_positions,
    }
}

/// Log-distance path-loss gain `T0 * (d / d0)^-alpha`, with `d` clamped to `d0`.
pub fn path_loss(distance_m: f64, config: &SystemConfig) -> f64 {
    let d = distance_m.max(config.pathloss_ref_dist_m);
    config.pathloss_ref_gain * (d / config.pathloss_ref_dist_m).powf(-config.pathloss_exp)
}

/// Draws one `CN(0, 1)` sample.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Channel vectors from every device to every RRH, plus the stacked per-device
/// vectors the BBU works with.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    antennas_per_rrh: usize,
    /// `per_rrh[i][k]` is the length-`M` channel from device `k` to RRH `i`.
    per_rrh: Vec<Vec<DVector<Complex64>>>,
    /// `stacked[k]` concatenates `per_rrh[0][k], ..., per_rrh[N_A-1][k]`.
    stacked: Vec<DVector<Complex64>>,
}

impl ChannelRealization {
    /// Builds a realization from per-RRH blocks indexed `[rrh][device]`.
    pub fn from_per_rrh(per_rrh: Vec<Vec<DVector<Complex64>>>) -> Result<Self> {
        let num_rrhs = per_rrh.len();
        if num_rrhs == 0 {
            return Err(Error::DimensionMismatch("no RRH blocks".into()));
        }
        let num_devices = per_rrh[0].len();
        if num_devices == 0 {
            return Err(Error::DimensionMismatch("no devices".into()));
        }
        let antennas = per_rrh[0][0].len();
        if antennas == 0 {
            return Err(Error::DimensionMismatch("empty channel vectors".into()));
        }
        for (i, row) in per_rrh.iter().enumerate() {
            if row.len() != num_devices {
                return Err(Error::DimensionMismatch(format!(
                    "RRH {i} has {} devices, expected {num_devices}",
                    row.len()
                )));
            }
            if let Some(k) = row.iter().position(|h| h.len() != antennas) {
                return Err(Error::DimensionMismatch(format!(
                    "channel ({i}, {k}) has length {}, expected {antennas}",
                    row[k].len()
                )));
            }
        }
        if per_rrh
            .iter()
            .flatten()
            .flat_map(|h| h.iter())
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite("channel coefficients".into()));
        }
        let stacked = (0..num_devices)
            .map(|k| {
                DVector::from_iterator(
                    num_rrhs * antennas,
                    per_rrh.iter().flat_map(|row| row[k].iter().copied()),
                )
            })
            .collect();
        Ok(Self {
            antennas_per_rrh: antennas,
            per_rrh,
            stacked,
        })
    }

    /// Builds a realization from stacked per-device vectors of length `N_A * M`.
    pub fn from_stacked(stacked: Vec<DVector<Complex64>>, antennas_per_rrh: usize) -> Result<Self> {
        if antennas_per_rrh == 0 || stacked.is_empty() {
            return Err(Error::DimensionMismatch("empty channel".into()));
        }
        let dim = stacked[0].len();
        if dim == 0 || dim % antennas_per_rrh != 0 || stacked.iter().any(|h| h.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "stacked channels must share a length divisible by {antennas_per_rrh}"
            )));
        }
        let num_rrhs = dim / antennas_per_rrh;
        let per_rrh = (0..num_rrhs)
            .map(|i| {
                stacked
                    .iter()
                    .map(|h| h.rows(i * antennas_per_rrh, antennas_per_rrh).into_owned())
                    .collect()
            })
            .collect();
        Self::from_per_rrh(per_rrh)
    }

    pub fn num_devices(&self) -> usize {
        self.stacked.len()
    }

    pub fn num_rrhs(&self) -> usize {
        self.per_rrh.len()
    }

    pub fn antennas_per_rrh(&self) -> usize {
        self.antennas_per_rrh
    }

    /// Length of the stacked vectors.
    pub fn dim(&self) -> usize {
        self.num_rrhs() * self.antennas_per_rrh
    }

    pub fn per_rrh(&self, rrh: usize, device: usize) -> &DVector<Complex64> {
        &self.per_rrh[rrh][device]
    }

    pub fn stacked(&self, device: usize) -> &DVector<Complex64> {
        &self.stacked[device]
    }

    pub fn stacked_all(&self) -> &[DVector<Complex64>] {
        &self.stacked
    }

    /// Splits the stacked vectors back into `[rrh][device]` blocks.
    pub fn unstack(&self) -> Vec<Vec<DVector<Complex64>>> {
        let m = self.antennas_per_rrh;
        (0..self.num_rrhs())
            .map(|i| {
                self.stacked
                    .iter()
                    .map(|h| h.rows(i * m, m).into_owned())
                    .collect()
            })
            .collect()
    }

    pub(crate) fn check_config(&self, config: &SystemConfig) -> Result<()> {
        if self.num_devices() != config.num_devices
            || self.num_rrhs() != config.num_rrhs
            || self.antennas_per_rrh != config.antennas_per_rrh
        {
            return Err(Error::DimensionMismatch(format!(
                "channel is {}x{}x{} (devices x RRHs x antennas), config is {}x{}x{}",
                self.num_devices(),
                self.num_rrhs(),
                self.antennas_per_rrh,
                config.num_devices,
                config.num_rrhs,
                config.antennas_per_rrh
            )));
        }
        Ok(())
    }
}

/// Draws `h_{i,k} = sqrt(L(d_{i,k})) * g`, `g ~ CN(0, I)`.
///
/// Draw order is RRH, then device, then antenna, so a given seed always maps
/// to the same coefficients.
pub fn sample_channel<R: Rng + ?Sized>(
    topology: &Topology,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if topology.device_positions.len() != config.num_devices
        || topology.rrh_positions.len() != config.num_rrhs
    {
        return Err(Error::DimensionMismatch(format!(
            "topology has {} devices and {} RRHs, config expects {} and {}",
            topology.device_positions.len(),
            topology.rrh_positions.len(),
            config.num_devices,
            config.num_rrhs
        )));
    }
    let per_rrh = (0..config.num_rrhs)
        .map(|i| {
            (0..config.num_devices)
                .map(|k| {
                    let amplitude = path_loss(topology.distance(i, k), config).sqrt();
                    DVector::from_fn(config.antennas_per_rrh, |_, _| {
                        standard_complex_normal(rng) * amplitude
                    })
                })
                .collect()
        })
        .collect();
    ChannelRealization::from_per_rrh(per_rrh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_loss_config() -> SystemConfig {
        SystemConfig {
            pathloss_ref_gain: 1e-3,
            pathloss_ref_dist_m: 1.0,
            pathloss_exp: 3.0,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn topology_stays_in_disk() {
        let config = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let topo = sample_topology(&config, &mut rng);
            assert_eq!(topo.device_positions.len(), 15);
            assert_eq!(topo.rrh_positions.len(), 3);
            for p in topo.device_positions.iter().chain(&topo.rrh_positions) {
                assert!(p[0].hypot(p[1]) <= 500.0);
            }
        }
    }

    #[test]
    fn zero_radius_collapses_to_origin() {
        let config = SystemConfig {
            region_radius_m: 0.0,
            ..SystemConfig::default()
        };
        let topo = sample_topology(&config, &mut ChaCha8Rng::seed_from_u64(1));
        for p in topo.device_positions.iter().chain(&topo.rrh_positions) {
            assert_eq!(p[0].hypot(p[1]), 0.0);
        }
    }

    #[test]
    fn topology_is_seeded() {
        let config = SystemConfig::default();
        let a = sample_topology(&config, &mut ChaCha8Rng::seed_from_u64(99));
        let b = sample_topology(&config, &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn path_loss_values() {
        let config = paper_loss_config();
        assert!((path_loss(1.0, &config) - 1e-3).abs() < 1e-18);
        assert!((path_loss(100.0, &config) / 1e-9 - 1.0).abs() < 1e-12);
        assert_eq!(path_loss(0.5, &config), path_loss(1.0, &config));
        assert_eq!(path_loss(0.0, &config), 1e-3);
    }

    #[test]
    fn noise_power_from_psd() {
        // -169 + 7 + 70 = -92 dBm
        let n = noise_power_mw(-169.0, 7.0, 10e6);
        assert!((n / 6.309573444801933e-10 - 1.0).abs() < 1e-12);
        assert!((dbm_to_mw(23.0) - 199.52623149688796).abs() < 1e-9);
    }

    #[test]
    fn integer_budget_is_exact() {
        let config = SystemConfig::default().with_uniform_capacity(6.4e8);
        assert_eq!(config.integer_bit_budget(0), 32);
        let config = config.with_uniform_capacity(6.4e8 - 1.0);
        assert_eq!(config.integer_bit_budget(0), 31);
        let config = config.with_uniform_capacity(0.0);
        assert_eq!(config.integer_bit_budget(2), 0);
    }

    fn unit_gain_setup(devices: usize, antennas: usize) -> (SystemConfig, Topology) {
        let config = SystemConfig {
            num_devices: devices,
            num_rrhs: 1,
            antennas_per_rrh: antennas,
            pathloss_ref_gain: 1.0,
            max_power_mw: vec![1.0; devices],
            fronthaul_capacity_bps: vec![0.0],
            ..SystemConfig::default()
        };
        let topo = Topology {
            device_positions: vec![[0.0, 0.0]; devices],
            rrh_positions: vec![[0.0, 0.0]],
        };
        (config, topo)
    }

    fn empirical_variance(ch: &ChannelRealization) -> f64 {
        let entries: Vec<_> = ch.stacked_all().iter().flat_map(|h| h.iter()).collect();
        entries.iter().map(|c| c.norm_sqr()).sum::<f64>() / entries.len() as f64
    }

    #[test]
    fn unit_gain_entries_have_unit_variance() {
        let (config, topo) = unit_gain_setup(100, 200);
        let ch = sample_channel(&topo, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let var = empirical_variance(&ch);
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn distance_100m_variance_matches_path_loss() {
        let (mut config, mut topo) = unit_gain_setup(100, 200);
        config.pathloss_ref_gain = 1e-3;
        config.pathloss_exp = 3.0;
        topo.rrh_positions = vec![[100.0, 0.0]];
        let ch = sample_channel(&topo, &config, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let var = empirical_variance(&ch);
        assert!((var / 1e-9 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn vanishing_gain_gives_zero_channel() {
        let (mut config, mut topo) = unit_gain_setup(2, 4);
        config.pathloss_ref_gain = 1e-3;
        topo.rrh_positions = vec![[1e200, 0.0]];
        let ch = sample_channel(&topo, &config, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(ch.stacked_all().iter().all(|h| h.iter().all(|c| *c == Complex64::new(0.0, 0.0))));
    }

    #[test]
    fn stacking_round_trips() {
        let config = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let topo = sample_topology(&config, &mut rng);
        let ch = sample_channel(&topo, &config, &mut rng).unwrap();
        let blocks = ch.unstack();
        for i in 0..config.num_rrhs {
            for k in 0..config.num_devices {
                assert_eq!(&blocks[i][k], ch.per_rrh(i, k));
                for m in 0..config.antennas_per_rrh {
                    assert_eq!(ch.stacked(k)[i * 8 + m], ch.per_rrh(i, k)[m]);
                }
            }
        }
        let rebuilt = ChannelRealization::from_stacked(ch.stacked_all().to_vec(), 8).unwrap();
        assert_eq!(rebuilt, ch);
    }

    #[test]
    fn reference_gain_scales_power_exactly() {
        let config = SystemConfig::default();
        let topo = sample_topology(&config, &mut ChaCha8Rng::seed_from_u64(12));
        let scaled = SystemConfig {
            pathloss_ref_gain: config.pathloss_ref_gain * 0.25,
            ..config.clone()
        };
        let a = sample_channel(&topo, &config, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        let b = sample_channel(&topo, &scaled, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        for (ha, hb) in a.stacked_all().iter().zip(b.stacked_all()) {
            for (x, y) in ha.iter().zip(hb.iter()) {
                assert!((y.norm_sqr() - 0.25 * x.norm_sqr()).abs() <= 1e-12 * x.norm_sqr());
            }
        }
    }

    #[test]
    fn rejects_mismatched_topology() {
        let config = SystemConfig::default();
        let topo = Topology {
            device_positions: vec![[0.0, 0.0]; 2],
            rrh_positions: vec![[0.0, 0.0]; 3],
        };
        let err = sample_channel(&topo, &config, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn default_config_is_valid() {
        SystemConfig::default().validate().unwrap();
        let bad = SystemConfig {
            antennas_per_rrh: 0,
            ..SystemConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
