//! Viterbi detection and analytic BER bounds for ISI channels with
//! data-dependent Gauss-Markov noise.
//!
//! - [`channel`]: channel parameters and the noisy-output generator.
//! - [`trellis`]: shift-register trellis and per-branch Gaussian statistics.
//! - [`detector`]: maximum-likelihood sequence detection.
//! - [`bound`]: Chernoff factors, product trellis and the closed-form BER bound.
//! - [`harness`]: SNR sweeps, Monte Carlo BER and CSV output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod channel;
pub mod config;
pub mod detector;
pub mod error;
pub mod exec;
pub mod harness;
pub mod stats;
pub mod trellis;

pub use bound::{
    ber_upper_bound, build_product_trellis, compute_bound, gaussian_pair_integral, pep_factor_w, BoundResult,
    ProductTrellis, RhoMode,
};
pub use channel::{generate, stationary_noise_variance, BitSequence, ChannelParams, NoisySignal, SignalMap};
pub use config::{ExperimentConfig, NoisePower};
pub use detector::{branch_metric, viterbi_decode, DecodeResult, Viterbi};
pub use error::{Error, Result};
pub use exec::Execution;
pub use harness::{run_sweep, snr_to_scale, BerCurve, BerRow, SimResult};
pub use trellis::{branch_covariance, build_trellis, Branch, BranchStats, StateId, Trellis};
