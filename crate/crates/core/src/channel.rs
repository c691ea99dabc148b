//! ISI channel with data-dependent Gauss-Markov noise.
//!
//! The channel output is `z_k = y(a_{k-I}^k) + n_k` where the noise follows the
//! autoregressive recursion `n_k = b^T n_{k-L}^{k-1} + sigma(a_{k-I}^k) w_k` with
//! `w_k` i.i.d. standard normal. The filter `b` is fixed (it does not depend on
//! the data); only the innovation standard deviation is pattern dependent.
//!
//! Bit patterns are packed with the newest bit in the least-significant
//! position, so the pattern `(a_{k-1}, a_k) = (0, 1)` has index 1. Pattern
//! strings such as `"01"` are read left to right as oldest to newest.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Burn-in length, in multiples of the noise memory, discarded before index 0.
pub const BURN_IN_FACTOR: usize = 10;

/// Noiseless output as a function of the `I+1` most recent bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalMap {
    /// `y = scale * sum_i weights[i] * a_{k-i}`; `weights[0]` multiplies the newest bit.
    Linear { weights: Vec<f64>, scale: f64 },
    /// One value per packed pattern index.
    Table(Vec<f64>),
}

impl SignalMap {
    fn table(&self, isi_memory: usize) -> Vec<f64> {
        let n = 1usize << (isi_memory + 1);
        match self {
            SignalMap::Linear { weights, scale } => (0..n)
                .map(|p| {
                    let s: f64 = weights
                        .iter()
                        .enumerate()
                        .map(|(lag, w)| w * ((p >> lag) & 1) as f64)
                        .sum();
                    scale * s
                })
                .collect(),
            SignalMap::Table(values) => values.clone(),
        }
    }

    /// The same map with every output multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SignalMap {
        match self {
            SignalMap::Linear { weights, scale } => SignalMap::Linear {
                weights: weights.clone(),
                scale: scale * factor,
            },
            SignalMap::Table(values) => SignalMap::Table(values.iter().map(|v| v * factor).collect()),
        }
    }
}

/// Parameters of the channel: ISI memory `I`, noise memory `L`, AR
/// coefficients, signal map and per-pattern innovation variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    isi_memory: usize,
    ar_coeffs: Vec<f64>,
    signal: SignalMap,
    signal_table: Vec<f64>,
    noise_var: Vec<f64>,
    noise_std: Vec<f64>,
}

impl ChannelParams {
    /// Builds and validates channel parameters.
    ///
    /// `ar_coeffs` is ordered oldest first: `ar_coeffs[0]` multiplies `n_{k-L}`
    /// and `ar_coeffs[L-1]` multiplies `n_{k-1}`. `noise_var[p]` is the
    /// innovation variance `sigma^2` for packed pattern `p`.
    pub fn new(
        isi_memory: usize,
        ar_coeffs: Vec<f64>,
        signal: SignalMap,
        noise_var: Vec<f64>,
    ) -> Result<Self> {
        if ar_coeffs.is_empty() {
            return Err(Error::Config("noise memory L must be positive".into()));
        }
        if isi_memory + ar_coeffs.len() > 24 {
            return Err(Error::Config(format!(
                "state memory L+I = {} is too large",
                isi_memory + ar_coeffs.len()
            )));
        }
        let patterns = 1usize << (isi_memory + 1);
        match &signal {
            SignalMap::Linear { weights, scale } => {
                if weights.len() != isi_memory + 1 {
                    return Err(Error::Config(format!(
                        "linear signal map needs {} weights, got {}",
                        isi_memory + 1,
                        weights.len()
                    )));
                }
                if !scale.is_finite() || weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::Config("non-finite signal map".into()));
                }
            }
            SignalMap::Table(values) => {
                if values.len() != patterns {
                    return Err(Error::Config(format!(
                        "signal table needs {} entries, got {}",
                        patterns,
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("non-finite signal table".into()));
                }
            }
        }
        if noise_var.len() != patterns {
            return Err(Error::Config(format!(
                "noise variance table needs {} entries, got {}",
                patterns,
                noise_var.len()
            )));
        }
        if noise_var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("noise variances must be positive".into()));
        }
        if ar_coeffs.iter().any(|b| !b.is_finite()) || !ar_is_stable(&ar_coeffs) {
            return Err(Error::UnstableFilter { coeffs: ar_coeffs });
        }
        let signal_table = signal.table(isi_memory);
        let noise_std = noise_var.iter().map(|v| v.sqrt()).collect();
        Ok(ChannelParams {
            isi_memory,
            ar_coeffs,
            signal,
            signal_table,
            noise_var,
            noise_std,
        })
    }

    pub fn isi_memory(&self) -> usize {
        self.isi_memory
    }

    pub fn noise_memory(&self) -> usize {
        self.ar_coeffs.len()
    }

    /// Number of bits in a trellis state, `L + I`.
    pub fn state_bits(&self) -> usize {
        self.isi_memory + self.ar_coeffs.len()
    }

    pub fn ar_coeffs(&self) -> &[f64] {
        &self.ar_coeffs
    }

    pub fn signal(&self) -> &SignalMap {
        &self.signal
    }

    pub fn pattern_count(&self) -> usize {
        self.signal_table.len()
    }

    /// `y(p)` for a packed `(I+1)`-bit pattern index.
    #[inline]
    pub fn signal_at(&self, pattern: usize) -> f64 {
        self.signal_table[pattern]
    }

    #[inline]
    pub fn noise_var_at(&self, pattern: usize) -> f64 {
        self.noise_var[pattern]
    }

    #[inline]
    pub fn noise_std_at(&self, pattern: usize) -> f64 {
        self.noise_std[pattern]
    }

    pub fn noise_vars(&self) -> &[f64] {
        &self.noise_var
    }

    /// Noiseless output for a pattern given as `I+1` bits, oldest first.
    pub fn noiseless_output(&self, pattern: &[u8]) -> Result<f64> {
        if pattern.len() != self.isi_memory + 1 {
            return Err(Error::Config(format!(
                "pattern has {} bits, expected {}",
                pattern.len(),
                self.isi_memory + 1
            )));
        }
        let index = pack_bits(pattern)?;
        Ok(self.signal_at(index))
    }

    /// Mean of `y^2` over equiprobable patterns.
    pub fn signal_energy(&self) -> f64 {
        self.signal_table.iter().map(|y| y * y).sum::<f64>() / self.signal_table.len() as f64
    }

    /// Mean innovation variance over all patterns.
    pub fn mean_innovation_var(&self) -> f64 {
        self.noise_var.iter().sum::<f64>() / self.noise_var.len() as f64
    }

    /// Copy with the signal map multiplied by `factor`.
    pub fn with_signal_scaled(&self, factor: f64) -> ChannelParams {
        let signal = self.signal.scaled(factor);
        ChannelParams {
            signal_table: signal.table(self.isi_memory),
            signal,
            ..self.clone()
        }
    }

    /// Packed `(I+1)`-bit pattern ending at index `k`; bits before 0 read as zero.
    #[inline]
    pub fn pattern_at(&self, bits: &[u8], k: usize) -> usize {
        let mut p = 0usize;
        for lag in 0..=self.isi_memory {
            if lag <= k {
                p |= (bits[k - lag] as usize) << lag;
            }
        }
        p
    }
}

/// Packs bits given oldest first into an index with the newest bit as LSB.
pub fn pack_bits(bits: &[u8]) -> Result<usize> {
    bits.iter().try_fold(0usize, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b as usize),
        _ => Err(Error::InvalidArgument(format!("bit value {b}"))),
    })
}

/// Parses a pattern string such as `"01"` (oldest to newest) into a packed index.
pub fn parse_pattern(s: &str) -> Result<usize> {
    let bits: Vec<u8> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::Config(format!("bad bit pattern {s:?}"))),
        })
        .collect::<Result<_>>()?;
    pack_bits(&bits)
}

/// Applies the whitening filter `[-b^T 1]` to a window `x_{k-L}^k` (oldest first).
#[inline]
pub fn whiten(ar_coeffs: &[f64], window: &[f64]) -> f64 {
    let l = ar_coeffs.len();
    debug_assert_eq!(window.len(), l + 1);
    let mut u = window[l];
    for (b, x) in ar_coeffs.iter().zip(window) {
        u -= b * x;
    }
    u
}

/// Stability of `n_k = sum_j b[L-j] n_{k-j} + e_k`: every root of the
/// characteristic polynomial `x^L - sum_j b[L-j] x^{L-j}` lies strictly inside
/// the unit disc. Checked with the Schur-Cohn step-down recursion.
pub fn ar_is_stable(ar_coeffs: &[f64]) -> bool {
    // a[j] is the coefficient of lag j in 1 + a_1 z^-1 + ... + a_L z^-L.
    let l = ar_coeffs.len();
    let mut a: Vec<f64> = (1..=l).map(|lag| -ar_coeffs[l - lag]).collect();
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let p = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1).map(|i| (a[i] - k * a[p - 2 - i]) / denom).collect();
        a = next;
    }
    true
}

/// Stationary variance of the AR process driven by innovations of variance
/// `innovation_var`, from the order-`L` Yule-Walker system.
pub fn ar_stationary_variance(ar_coeffs: &[f64], innovation_var: f64) -> Result<f64> {
    if !ar_is_stable(ar_coeffs) {
        return Err(Error::UnstableFilter {
            coeffs: ar_coeffs.to_vec(),
        });
    }
    let l = ar_coeffs.len();
    // phi[j-1] is the coefficient of lag j.
    let phi: Vec<f64> = (1..=l).map(|lag| ar_coeffs[l - lag]).collect();
    let n = l + 1;
    let mut a = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 1..=l {
            let lag = i.abs_diff(j);
            a[(i, lag)] -= phi[j - 1];
        }
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[0] = innovation_var;
    let r = a.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(r[0])
}

/// Stationary noise variance with the innovation variance averaged over all patterns.
pub fn stationary_noise_variance(params: &ChannelParams) -> Result<f64> {
    ar_stationary_variance(params.ar_coeffs(), params.mean_innovation_var())
}

/// A bit sequence whose first `preamble_len` bits are known zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence {
    bits: Vec<u8>,
    preamble_len: usize,
}

impl BitSequence {
    pub fn new(params: &ChannelParams, bits: Vec<u8>, preamble_len: usize) -> Result<Self> {
        if preamble_len < params.state_bits() {
            return Err(Error::InvalidArgument(format!(
                "preamble of {preamble_len} bits is shorter than L+I = {}",
                params.state_bits()
            )));
        }
        if preamble_len > bits.len() {
            return Err(Error::InvalidArgument("preamble longer than sequence".into()));
        }
        if bits[..preamble_len].iter().any(|&b| b != 0) {
            return Err(Error::InvalidArgument("preamble bits must be zero".into()));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(BitSequence { bits, preamble_len })
    }

    /// Prepends the minimal `L+I` zero preamble to `payload`.
    pub fn with_preamble(params: &ChannelParams, payload: &[u8]) -> Result<Self> {
        let preamble_len = params.state_bits();
        let mut bits = vec![0u8; preamble_len];
        bits.extend_from_slice(payload);
        BitSequence::new(params, bits, preamble_len)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn preamble_len(&self) -> usize {
        self.preamble_len
    }

    pub fn payload(&self) -> &[u8] {
        &self.bits[self.preamble_len..]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Channel output samples aligned index for index with the transmitted bits.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySignal {
    pub samples: Vec<f64>,
    pub rng_seed: u64,
}

/// Deterministic stream of standard normal innovations `w_k`.
///
/// [`generate`] draws `BURN_IN_FACTOR * L` values for the burn-in, then one
/// value per output sample, in order.
pub struct InnovationStream {
    rng: ChaCha8Rng,
}

impl InnovationStream {
    pub fn new(seed: u64) -> Self {
        InnovationStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Passes `bits` through the channel.
///
/// The AR state starts at zero and is run for `BURN_IN_FACTOR * L` samples
/// with the all-zero pattern statistics before index 0.
pub fn generate(params: &ChannelParams, bits: &BitSequence, seed: u64) -> NoisySignal {
    let mut samples = Vec::with_capacity(bits.len());
    generate_into(params, bits.bits(), seed, &mut samples);
    NoisySignal {
        samples,
        rng_seed: seed,
    }
}

/// Like [`generate`] but writes into a reusable buffer and skips preamble checks.
pub fn generate_into(params: &ChannelParams, bits: &[u8], seed: u64, out: &mut Vec<f64>) {
    let b = params.ar_coeffs();
    let l = b.len();
    let mask = params.pattern_count() - 1;
    let mut stream = InnovationStream::new(seed);
    // history[j] holds n_{k-L+j}
    let mut history = vec![0.0f64; l];
    let step = |history: &mut [f64], std: f64, w: f64| -> f64 {
        let mut n = std * w;
        for (c, h) in b.iter().zip(history.iter()) {
            n += c * h;
        }
        history.copy_within(1.., 0);
        history[l - 1] = n;
        n
    };
    let zero_std = params.noise_std_at(0);
    for _ in 0..BURN_IN_FACTOR * l {
        let w = stream.next_normal();
        step(&mut history, zero_std, w);
    }
    out.clear();
    out.reserve(bits.len());
    let mut pattern = 0usize;
    for &bit in bits {
        pattern = ((pattern << 1) | bit as usize) & mask;
        let w = stream.next_normal();
        let n = step(&mut history, params.noise_std_at(pattern), w);
        out.push(params.signal_at(pattern) + n);
    }
}
