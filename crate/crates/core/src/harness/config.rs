use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::channel::{db_to_linear, dbm_to_mw, noise_power_mw, SystemConfig};
use crate::error::{Error, Result};
use crate::solver::SolverOptions;

/// A transceiver/fronthaul design evaluated by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Joint transceiver and bit-allocation optimization.
    Proposed,
    /// Transceivers optimized, bits split equally across antennas.
    EqualAlloc,
    /// Transceivers optimized with an ideal fronthaul.
    LowerBound,
    /// All antennas colocated at the origin, no fronthaul.
    MassiveMimo,
    /// Every antenna its own randomly placed RRH, jointly optimized.
    CloudranSingleAntenna,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::EqualAlloc,
        Scheme::LowerBound,
        Scheme::MassiveMimo,
        Scheme::CloudranSingleAntenna,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::EqualAlloc => "equal_alloc",
            Scheme::LowerBound => "lower_bound",
            Scheme::MassiveMimo => "massive_mimo",
            Scheme::CloudranSingleAntenna => "cloudran_single_antenna",
        }
    }

    /// Whether the scheme's result does not depend on the fronthaul capacity.
    pub fn capacity_independent(self) -> bool {
        matches!(self, Scheme::LowerBound | Scheme::MassiveMimo)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme `{s}`")))
    }
}

/// A full Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Network and propagation parameters. Its fronthaul capacities are
    /// replaced by each grid value in turn.
    pub base: SystemConfig,
    /// Per-RRH fronthaul capacities (bits/second), applied to all RRHs.
    pub capacity_grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub master_seed: u64,
    pub opts: SolverOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            base: SystemConfig::default(),
            capacity_grid: vec![2e7, 4e7, 8e7, 1.6e8, 3.2e8, 6.4e8, 1.28e9, 2.56e9],
            schemes: vec![Scheme::Proposed, Scheme::EqualAlloc, Scheme::LowerBound],
            trials: 100,
            master_seed: 2021,
            opts: SolverOptions::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.opts.validate()?;
        if self.trials == 0 {
            return Err(key_error("trials", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(key_error("schemes", "must name at least one scheme"));
        }
        if self.capacity_grid.is_empty() {
            return Err(key_error("capacity_grid_bps", "must not be empty"));
        }
        if self.capacity_grid.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(key_error("capacity_grid_bps", "capacities must be finite and non-negative"));
        }
        if self.capacity_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(key_error("capacity_grid_bps", "must be strictly increasing"));
        }
        Ok(())
    }
}

const KEYS: [&str; 18] = [
    "num_devices",
    "num_rrhs",
    "antennas_per_rrh",
    "bandwidth_hz",
    "tx_power_dbm",
    "noise_psd_dbm_hz",
    "noise_figure_db",
    "region_radius_m",
    "pathloss_ref_db",
    "pathloss_exp",
    "capacity_grid_bps",
    "schemes",
    "trials",
    "master_seed",
    "eps1",
    "eps2",
    "max_outer",
    "greedy_fill",
];

fn key_error(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        message: message.into(),
    }
}

struct Fields<'a>(&'a Map<String, Value>);

impl Fields<'_> {
    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| key_error(key, format!("expected a number, got {v}"))),
        }
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| key_error(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let n = self.u64(key, default as u64)?;
        usize::try_from(n).map_err(|_| key_error(key, "value too large"))
    }

    fn positive_count(&self, key: &str, default: usize) -> Result<usize> {
        let n = self.count(key, default)?;
        if n == 0 {
            return Err(key_error(key, "must be at least 1"));
        }
        Ok(n)
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| key_error(key, format!("expected true or false, got {v}"))),
        }
    }

    fn array(&self, key: &str) -> Result<Option<&Vec<Value>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => Ok(Some(items)),
            Some(v) => Err(key_error(key, format!("expected an array, got {v}"))),
        }
    }
}

/// Parses an experiment from JSON text. Missing keys take the default
/// network (15 devices, 3 RRHs x 8 antennas, 10 MHz, 23 dBm, -169 dBm/Hz,
/// 7 dB noise figure, 500 m, 30 dB at 1 m, exponent 3); unknown keys are
/// rejected; dB quantities are converted to linear mW here.
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("malformed JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(Error::InvalidConfig("top level must be a JSON object".into()));
    };
    if let Some(unknown) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(key_error(unknown, "unknown key"));
    }
    let fields = Fields(&map);
    let defaults = ExperimentSpec::default();
    let base_defaults = &defaults.base;

    let num_devices = fields.positive_count("num_devices", base_defaults.num_devices)?;
    let num_rrhs = fields.positive_count("num_rrhs", base_defaults.num_rrhs)?;
    let antennas_per_rrh = fields.positive_count("antennas_per_rrh", base_defaults.antennas_per_rrh)?;
    let bandwidth_hz = fields.f64("bandwidth_hz", base_defaults.bandwidth_hz)?;
    if bandwidth_hz <= 0.0 {
        return Err(key_error("bandwidth_hz", "must be positive"));
    }
    let tx_power_dbm = fields.f64("tx_power_dbm", 23.0)?;
    let psd = fields.f64("noise_psd_dbm_hz", -169.0)?;
    let noise_figure = fields.f64("noise_figure_db", 7.0)?;
    let region_radius_m = fields.f64("region_radius_m", base_defaults.region_radius_m)?;
    if region_radius_m <= 0.0 {
        return Err(key_error("region_radius_m", "must be positive"));
    }
    let pathloss_ref_db = fields.f64("pathloss_ref_db", 30.0)?;
    if pathloss_ref_db < 0.0 {
        return Err(key_error("pathloss_ref_db", "reference loss must be non-negative dB"));
    }
    let pathloss_exp = fields.f64("pathloss_exp", base_defaults.pathloss_exp)?;
    if pathloss_exp <= 0.0 {
        return Err(key_error("pathloss_exp", "must be positive"));
    }

    let capacity_grid = match fields.array("capacity_grid_bps")? {
        None => defaults.capacity_grid.clone(),
        Some(items) => items
            .iter()
            .map(|v| {
                v.as_f64()
                    .filter(|c| *c >= 0.0 && c.is_finite())
                    .ok_or_else(|| key_error("capacity_grid_bps", format!("invalid capacity {v}")))
            })
            .collect::<Result<_>>()?,
    };
    let schemes = match fields.array("schemes")? {
        None => defaults.schemes.clone(),
        Some(items) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .ok_or_else(|| key_error("schemes", format!("expected a scheme name, got {v}")))
                    .and_then(|s| s.parse().map_err(|e: Error| key_error("schemes", e.to_string())))
            })
            .collect::<Result<_>>()?,
    };

    let opts = SolverOptions {
        eps1: fields.f64("eps1", defaults.opts.eps1)?,
        eps2: fields.f64("eps2", defaults.opts.eps2)?,
        max_outer: fields.positive_count("max_outer", defaults.opts.max_outer)?,
        greedy_fill: fields.bool("greedy_fill", defaults.opts.greedy_fill)?,
        ..defaults.opts.clone()
    };
    if opts.eps1 <= 0.0 {
        return Err(key_error("eps1", "must be positive"));
    }
    if opts.eps2 <= 0.0 {
        return Err(key_error("eps2", "must be positive"));
    }

    let base = SystemConfig {
        num_devices,
        num_rrhs,
        antennas_per_rrh,
        bandwidth_hz,
        fronthaul_capacity_bps: vec![capacity_grid.first().copied().unwrap_or(0.0); num_rrhs],
        max_power_mw: vec![dbm_to_mw(tx_power_dbm); num_devices],
        noise_power_mw: noise_power_mw(psd, noise_figure, bandwidth_hz),
        region_radius_m,
        pathloss_ref_gain: db_to_linear(-pathloss_ref_db),
        pathloss_ref_dist_m: 1.0,
        pathloss_exp,
    };
    let spec = ExperimentSpec {
        base,
        capacity_grid,
        schemes,
        trials: fields.positive_count("trials", defaults.trials)?,
        master_seed: fields.u64("master_seed", defaults.master_seed)?,
        opts,
    };
    spec.validate()?;
    Ok(spec)
}

/// Reads and parses an experiment file.
pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_experiment(&text).map_err(|e| match e {
        Error::ConfigKey { .. } => e,
        other => Error::Parse {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}
