//! Experiment configuration files.
//!
//! ```toml
//! [channel]
//! L = 2
//! I = 1
//! b = [0.1, 0.5]                       # oldest first
//! sigma_sq = { "00" = 1.0, "01" = 2.0, "10" = 3.0, "11" = 4.0 }
//! signal = { linear = { weights = [2.0, 1.0], scale = 1.0 } }
//!
//! [experiment]
//! snr_grid_db = [15.0, 17.0, 19.0, 21.0]
//! payload_bits = 1000000000
//! min_error_events = 100
//! seed = 1
//! workers = 8
//! rho_mode = "optimized"
//! ```
//!
//! Pattern strings are read oldest to newest. Linear weights are indexed by
//! lag: `weights[i]` multiplies `a_{k-i}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::bound::RhoMode;
use crate::channel::{parse_pattern, ChannelParams, SignalMap};
use crate::error::{Error, Result};

/// Payload bits per simulated block.
pub const DEFAULT_BLOCK_BITS: usize = 1_000_000;
pub const MIN_PAYLOAD_BITS: u64 = 10_000;

/// Noise power used in the SNR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoisePower {
    /// Mean innovation variance over all patterns.
    #[default]
    Innovation,
    /// Stationary variance of the AR noise driven by the mean innovation variance.
    Stationary,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    #[serde(rename = "L")]
    noise_memory: usize,
    #[serde(rename = "I")]
    isi_memory: usize,
    b: Vec<f64>,
    sigma_sq: BTreeMap<String, f64>,
    signal: SignalMap,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    snr_grid_db: Option<Vec<f64>>,
    payload_bits: Option<u64>,
    min_error_events: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    rho_mode: Option<RhoMode>,
    noise_power: Option<NoisePower>,
    block_bits: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    channel: RawChannel,
    experiment: Option<RawExperiment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Channel with the signal map at unit scale; the SNR sets the scale.
    pub channel: ChannelParams,
    pub snr_grid_db: Vec<f64>,
    pub payload_bits: u64,
    pub min_error_events: u64,
    pub seed: u64,
    pub workers: usize,
    pub rho_mode: RhoMode,
    pub noise_power: NoisePower,
    pub block_bits: usize,
}

impl ExperimentConfig {
    /// Config with the default experiment settings around `channel`.
    pub fn new(channel: ChannelParams) -> Self {
        ExperimentConfig {
            channel: unit_scale(channel),
            snr_grid_db: (12..=22).map(f64::from).collect(),
            payload_bits: 1_000_000_000,
            min_error_events: 100,
            seed: 1,
            workers: 1,
            rho_mode: RhoMode::Optimized,
            noise_power: NoisePower::Innovation,
            block_bits: DEFAULT_BLOCK_BITS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("snr_grid_db is empty".into()));
        }
        if self.snr_grid_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("snr_grid_db has non-finite values".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("snr_grid_db must be strictly increasing".into()));
        }
        if self.payload_bits < MIN_PAYLOAD_BITS {
            return Err(Error::Config(format!(
                "payload_bits must be at least {MIN_PAYLOAD_BITS}"
            )));
        }
        if self.min_error_events == 0 {
            return Err(Error::Config("min_error_events must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.block_bits == 0 {
            return Err(Error::Config("block_bits must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let ch = raw.channel;
        if ch.b.len() != ch.noise_memory {
            return Err(Error::Config(format!(
                "b has {} coefficients but L = {}",
                ch.b.len(),
                ch.noise_memory
            )));
        }
        let patterns = 1usize << (ch.isi_memory + 1);
        let mut sigma_sq = vec![f64::NAN; patterns];
        for (key, value) in &ch.sigma_sq {
            if key.len() != ch.isi_memory + 1 {
                return Err(Error::Config(format!(
                    "sigma_sq key {key:?} must have {} bits",
                    ch.isi_memory + 1
                )));
            }
            sigma_sq[parse_pattern(key)?] = *value;
        }
        if ch.sigma_sq.len() != patterns {
            return Err(Error::Config(format!(
                "sigma_sq needs {patterns} patterns, got {}",
                ch.sigma_sq.len()
            )));
        }
        let channel = ChannelParams::new(ch.isi_memory, ch.b, ch.signal, sigma_sq)?;
        let mut cfg = ExperimentConfig::new(channel);
        if let Some(e) = raw.experiment {
            if let Some(v) = e.snr_grid_db {
                cfg.snr_grid_db = v;
            }
            if let Some(v) = e.payload_bits {
                cfg.payload_bits = v;
            }
            if let Some(v) = e.min_error_events {
                cfg.min_error_events = v;
            }
            if let Some(v) = e.seed {
                cfg.seed = v;
            }
            if let Some(v) = e.workers {
                cfg.workers = v;
            }
            if let Some(v) = e.rho_mode {
                cfg.rho_mode = v;
            }
            if let Some(v) = e.noise_power {
                cfg.noise_power = v;
            }
            if let Some(v) = e.block_bits {
                cfg.block_bits = v;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

fn unit_scale(channel: ChannelParams) -> ChannelParams {
    match channel.signal() {
        SignalMap::Linear { scale, .. } if *scale != 0.0 => {
            let s = *scale;
            channel.with_signal_scaled(1.0 / s)
        }
        SignalMap::Linear { weights, .. } => {
            let signal = SignalMap::Linear {
                weights: weights.clone(),
                scale: 1.0,
            };
            ChannelParams::new(channel.isi_memory(), channel.ar_coeffs().to_vec(), signal, channel.noise_vars().to_vec())
                .expect("rescaling keeps parameters valid")
        }
        SignalMap::Table(_) => channel,
    }
}
