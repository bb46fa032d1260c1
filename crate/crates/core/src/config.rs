//! Scenario configuration, user drops and large-scale fading.
//!
//! Scenario files are flat `key = value` text. Blank lines and lines
//! starting with `#` are ignored; every key must name a [`SystemConfig`]
//! field and unknown keys are rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateUnit {
    Nats,
    #[default]
    Bits,
}

impl RateUnit {
    /// Converts a rate expressed in nats into this unit.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            RateUnit::Nats => nats,
            RateUnit::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RateUnit::Nats => "nats",
            RateUnit::Bits => "bits",
        }
    }
}

impl FromStr for RateUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nats" => Ok(RateUnit::Nats),
            "bits" => Ok(RateUnit::Bits),
            other => Err(Error::Config(format!("unknown rate unit '{other}'"))),
        }
    }
}

impl fmt::Display for RateUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// All scenario parameters of one simulated cell.
///
/// Distances are in km. `min_distance` keeps users away from the base
/// station so that path-loss variances stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_antennas: usize,
    pub n_users: usize,
    pub block_length: usize,
    pub n_blocks: usize,
    pub temporal_corr: f64,
    pub snr0_db: f64,
    pub cell_radius: f64,
    pub ref_distance: f64,
    pub path_loss_exponent: f64,
    pub min_distance: f64,
    pub rng_seed: u64,
    pub rate_unit: RateUnit,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_antennas: 100,
            n_users: 40,
            block_length: 60,
            n_blocks: 11,
            temporal_corr: 0.9881,
            snr0_db: 0.0,
            cell_radius: 1.0,
            ref_distance: 1.0,
            path_loss_exponent: 4.0,
            min_distance: 0.001,
            rng_seed: 0,
            rate_unit: RateUnit::Bits,
        }
    }
}

const KEYS: [&str; 12] = [
    "n_antennas",
    "n_users",
    "block_length",
    "n_blocks",
    "temporal_corr",
    "snr0_db",
    "cell_radius",
    "ref_distance",
    "path_loss_exponent",
    "min_distance",
    "rng_seed",
    "rate_unit",
];

impl SystemConfig {
    /// Users per channel use, `K / T0`.
    pub fn alpha(&self) -> f64 {
        self.n_users as f64 / self.block_length as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_antennas == 0 {
            return fail("n_antennas must be >= 1");
        }
        if self.n_users == 0 {
            return fail("n_users must be >= 1");
        }
        if self.block_length == 0 {
            return fail("block_length must be >= 1");
        }
        if self.n_blocks < 2 {
            return fail("n_blocks must be >= 2");
        }
        if !(0.0..=1.0).contains(&self.temporal_corr) {
            return fail("temporal_corr must lie in [0, 1]");
        }
        if !self.snr0_db.is_finite() {
            return fail("snr0_db must be finite");
        }
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return fail("cell_radius must be > 0");
        }
        if !(self.ref_distance > 0.0 && self.ref_distance.is_finite()) {
            return fail("ref_distance must be > 0");
        }
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return fail("path_loss_exponent must be > 0");
        }
        if !(self.min_distance > 0.0 && self.min_distance < self.cell_radius) {
            return fail("min_distance must lie in (0, cell_radius)");
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SystemConfig::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            seen.push(key);
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {key}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "n_antennas" => self.n_antennas = num(value)?,
            "n_users" => self.n_users = num(value)?,
            "block_length" => self.block_length = num(value)?,
            "n_blocks" => self.n_blocks = num(value)?,
            "temporal_corr" => self.temporal_corr = num(value)?,
            "snr0_db" => self.snr0_db = num(value)?,
            "cell_radius" => self.cell_radius = num(value)?,
            "ref_distance" => self.ref_distance = num(value)?,
            "path_loss_exponent" => self.path_loss_exponent = num(value)?,
            "min_distance" => self.min_distance = num(value)?,
            "rng_seed" => self.rng_seed = num(value)?,
            "rate_unit" => self.rate_unit = value.parse().map_err(|e: Error| e.to_string())?,
            _ => unreachable!("key checked against KEYS"),
        }
        Ok(())
    }
}

impl fmt::Display for SystemConfig {
    /// Writes the scenario in the same key-value format [`SystemConfig::parse`] reads.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_antennas = {}", self.n_antennas)?;
        writeln!(f, "n_users = {}", self.n_users)?;
        writeln!(f, "block_length = {}", self.block_length)?;
        writeln!(f, "n_blocks = {}", self.n_blocks)?;
        writeln!(f, "temporal_corr = {}", self.temporal_corr)?;
        writeln!(f, "snr0_db = {}", self.snr0_db)?;
        writeln!(f, "cell_radius = {}", self.cell_radius)?;
        writeln!(f, "ref_distance = {}", self.ref_distance)?;
        writeln!(f, "path_loss_exponent = {}", self.path_loss_exponent)?;
        writeln!(f, "min_distance = {}", self.min_distance)?;
        writeln!(f, "rng_seed = {}", self.rng_seed)?;
        writeln!(f, "rate_unit = {}", self.rate_unit)
    }
}

/// User positions and the per-user channel power they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    pub positions: Vec<[f64; 2]>,
    pub distances: Vec<f64>,
    pub variances: Vec<f64>,
}

impl UserDrop {
    /// Builds a drop from explicit positions.
    pub fn from_positions(positions: Vec<[f64; 2]>, config: &SystemConfig) -> Result<Self> {
        let distances: Vec<f64> = positions.iter().map(|p| p[0].hypot(p[1])).collect();
        let variances = distances
            .iter()
            .map(|&d| large_scale_variance(d, config.ref_distance, config.path_loss_exponent))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            positions,
            distances,
            variances,
        })
    }

    /// Drop with prescribed per-user variances and no geometry behind them.
    ///
    /// Distances are back-computed with the default exponent-4 law at unit
    /// reference distance, so variance ordering and distance ordering agree.
    pub fn from_variances(variances: Vec<f64>) -> Self {
        let distances: Vec<f64> = variances
            .iter()
            .map(|&v| if v > 0.0 { v.powf(-0.25) } else { f64::INFINITY })
            .collect();
        let positions = distances.iter().map(|&d| [d, 0.0]).collect();
        Self {
            positions,
            distances,
            variances,
        }
    }

    pub fn n_users(&self) -> usize {
        self.variances.len()
    }
}

/// Draws `K` users uniformly over the annulus `min_distance <= d <= cell_radius`.
///
/// Radii use the inverse-CDF transform `d = sqrt(a^2 + u (r^2 - a^2))`, so
/// no sample is rejected.
pub fn sample_user_drop<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> UserDrop {
    let r2 = config.cell_radius * config.cell_radius;
    let a2 = config.min_distance * config.min_distance;
    let positions: Vec<[f64; 2]> = (0..config.n_users)
        .map(|_| {
            let u: f64 = rng.random();
            let theta: f64 = 2.0 * PI * rng.random::<f64>();
            let d = (a2 + u * (r2 - a2)).sqrt();
            [d * theta.cos(), d * theta.sin()]
        })
        .collect();
    UserDrop::from_positions(positions, config).expect("sampled distances are positive")
}

/// Channel power at distance `d`: `(d / d0)^(-exponent)`.
pub fn large_scale_variance(d: f64, d0: f64, exponent: f64) -> Result<f64> {
    if !(d > 0.0) || !(d0 > 0.0) {
        return Err(Error::Domain(format!(
            "distances must be positive (d = {d}, d0 = {d0})"
        )));
    }
    Ok((d / d0).powf(-exponent))
}

/// Received SNR in dB of a user at distance `d`.
pub fn snr_db(d: f64, config: &SystemConfig) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(config.snr0_db - 10.0 * config.path_loss_exponent * (d / config.ref_distance).log10())
}

/// Jakes-model correlation `J0(2 pi f_D interval)` between consecutive blocks.
///
/// The result can be negative for large arguments; callers that feed it
/// into the simulator must check it lies in `[0, 1]`.
pub fn temporal_correlation_jakes(f_doppler: f64, interval: f64) -> f64 {
    libm::j0(2.0 * PI * f_doppler * interval)
}

/// First zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Finds `x` in `(0, J0_FIRST_ZERO)` with `J0(x) = c` by bisection.
///
/// `J0` is strictly decreasing on that interval, so any `c` in `(0, 1)` has
/// exactly one preimage there.
pub fn jakes_argument_for(c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Domain(format!("correlation {c} outside (0, 1)")));
    }
    let (mut lo, mut hi) = (0.0_f64, J0_FIRST_ZERO);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if libm::j0(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
