//! SNR sweeps: Monte Carlo BER estimation next to the analytic bound.
//!
//! Each SNR point runs `workers` independent streams. A stream is seeded from
//! `(seed, snr_index, worker_index)` and produces blocks of random payload
//! bits behind an `L+I` zero preamble. Work proceeds in rounds of one block per
//! worker; after each round the counts are reduced in worker order and the
//! point stops once `min_error_events` bit errors or `payload_bits` bits are
//! reached. Results are reproducible for a fixed worker count, but changing
//! the worker count changes the streams and hence the exact counts.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bound::{build_product_trellis, ber_upper_bound, RhoMode};
use crate::channel::{generate_into, stationary_noise_variance, ChannelParams};
use crate::config::{ExperimentConfig, NoisePower};
use crate::detector::Viterbi;
use crate::error::{Error, Result};
use crate::exec::{for_each_mut, Execution};
use crate::stats::{wilson_interval, Z_95};
use crate::trellis::{StateId, Trellis};

pub const CSV_HEADER: &str = "snr_db,ber_sim,ci_low,ci_high,errors,bits,ber_bound,spectral_radius";

/// Noise power in the SNR denominator.
pub fn noise_power(params: &ChannelParams, kind: NoisePower) -> Result<f64> {
    match kind {
        NoisePower::Innovation => Ok(params.mean_innovation_var()),
        NoisePower::Stationary => stationary_noise_variance(params),
    }
}

/// Scale `c` applied to the config's unit-scale signal map so that
/// `E[y^2] / noise power = 10^(snr_db/10)`.
pub fn snr_to_scale(cfg: &ExperimentConfig, snr_db: f64) -> Result<f64> {
    let energy = cfg.channel.signal_energy();
    if !(energy > 0.0) {
        return Err(Error::Config("signal map has zero energy".into()));
    }
    let noise = noise_power(&cfg.channel, cfg.noise_power)?;
    Ok((10f64.powf(snr_db / 10.0) * noise / energy).sqrt())
}

/// Channel parameters with the signal scaled to `snr_db`.
pub fn channel_at_snr(cfg: &ExperimentConfig, snr_db: f64) -> Result<ChannelParams> {
    Ok(cfg.channel.with_signal_scaled(snr_to_scale(cfg, snr_db)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub snr_db: f64,
    pub sim: Option<SimResult>,
    pub ber_bound: Option<f64>,
    pub spectral_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SimResult {
    pub fn from_counts(errors: u64, bits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, bits, Z_95);
        let ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
        SimResult {
            errors,
            bits,
            ber,
            ci_low,
            ci_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerCurve {
    pub rows: Vec<BerRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

impl BerCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            let s = r.sim.as_ref();
            writeln!(
                w,
                "{:?},{},{},{},{},{},{},{}",
                r.snr_db,
                fmt_opt(s.map(|s| s.ber)),
                fmt_opt(s.map(|s| s.ci_low)),
                fmt_opt(s.map(|s| s.ci_high)),
                s.map(|s| s.errors.to_string()).unwrap_or_default(),
                s.map(|s| s.bits.to_string()).unwrap_or_default(),
                fmt_opt(r.ber_bound),
                fmt_opt(r.spectral_radius),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Bound at one SNR point; divergence is reported as a missing bound.
pub fn bound_point(params: &ChannelParams, mode: RhoMode) -> (Option<f64>, Option<f64>) {
    let trellis = Trellis::new(params);
    match ber_upper_bound(&build_product_trellis(&trellis, mode)) {
        Ok(r) => (Some(r.ber_bound), Some(r.spectral_radius)),
        Err(Error::BoundDiverges { spectral_radius }) => (None, Some(spectral_radius)),
        Err(_) => (None, None),
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the stream for `(seed, snr_index, worker)`.
pub fn stream_seed(seed: u64, snr_index: usize, worker: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ snr_index as u64) ^ worker as u64)
}

struct Worker {
    rng: ChaCha8Rng,
    bits: Vec<u8>,
    samples: Vec<f64>,
    errors: u64,
    count: u64,
}

impl Worker {
    fn run_block(&mut self, params: &ChannelParams, viterbi: &Viterbi<'_>, payload: usize) {
        let preamble = params.state_bits();
        self.bits.clear();
        self.bits.resize(preamble, 0);
        let mut remaining = payload;
        while remaining > 0 {
            let word = self.rng.next_u64();
            let take = remaining.min(64);
            self.bits.extend((0..take).map(|i| ((word >> i) & 1) as u8));
            remaining -= take;
        }
        let noise_seed: u64 = self.rng.random();
        generate_into(params, &self.bits, noise_seed, &mut self.samples);
        let decoded = viterbi.decode_from(&self.samples, preamble, StateId(0));
        self.errors += decoded
            .bits
            .iter()
            .zip(&self.bits[preamble..])
            .filter(|(a, b)| a != b)
            .count() as u64;
        self.count += payload as u64;
    }
}

/// Monte Carlo BER at one SNR point.
pub fn simulate_point(
    params: &ChannelParams,
    cfg: &ExperimentConfig,
    snr_index: usize,
    exec: Execution,
) -> SimResult {
    let trellis = Trellis::new(params);
    let viterbi = Viterbi::new(&trellis);
    let mut workers: Vec<Worker> = (0..cfg.workers)
        .map(|w| Worker {
            rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, snr_index, w)),
            bits: Vec::new(),
            samples: Vec::new(),
            errors: 0,
            count: 0,
        })
        .collect();

    let n_workers = cfg.workers as u64;
    let mut consumed = 0u64;
    let mut errors = 0u64;
    while consumed < cfg.payload_bits && errors < cfg.min_error_events {
        let round = (cfg.payload_bits - consumed).min(n_workers * cfg.block_bits as u64);
        let base = round / n_workers;
        let extra = round % n_workers;
        for_each_mut(exec, &mut workers, |w, worker| {
            let size = base + u64::from((w as u64) < extra);
            if size > 0 {
                worker.run_block(params, &viterbi, size as usize);
            }
        });
        consumed += round;
        errors = workers.iter().map(|w| w.errors).sum();
    }
    let bits: u64 = workers.iter().map(|w| w.count).sum();
    SimResult::from_counts(errors, bits)
}

/// Runs the configured sweep with the default execution mode.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<BerCurve> {
    run_sweep_with(cfg, Execution::default())
}

pub fn run_sweep_with(cfg: &ExperimentConfig, exec: Execution) -> Result<BerCurve> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.snr_grid_db.len());
    for (i, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let params = channel_at_snr(cfg, snr_db)?;
        let (ber_bound, spectral_radius) = bound_point(&params, cfg.rho_mode);
        let sim = simulate_point(&params, cfg, i, exec);
        rows.push(BerRow {
            snr_db,
            sim: Some(sim),
            ber_bound,
            spectral_radius,
        });
    }
    Ok(BerCurve { rows })
}

/// Bound-only curve over the given SNR points.
pub fn bound_curve(cfg: &ExperimentConfig, snrs: &[f64], mode: RhoMode) -> Result<BerCurve> {
    let mut rows = Vec::with_capacity(snrs.len());
    for &snr_db in snrs {
        let params = channel_at_snr(cfg, snr_db)?;
        let (ber_bound, spectral_radius) = bound_point(&params, mode);
        rows.push(BerRow {
            snr_db,
            sim: None,
            ber_bound,
            spectral_radius,
        });
    }
    Ok(BerCurve { rows })
}
