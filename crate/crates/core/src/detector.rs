//! Maximum-likelihood sequence detection.
//!
//! With a fixed AR filter the branch metric needs no matrix inversion: the
//! window `z_{k-L}^k` is passed through the whitening filter `[-b^T 1]` and
//! compared against the branch's filtered mean, giving
//! `ln sigma^2 + (u_k - M)^2 / sigma^2`.

use crate::channel::{whiten, NoisySignal};
use crate::trellis::{BranchStats, StateId, Trellis};

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    /// Visited states, starting with the known initial state.
    pub path: Vec<StateId>,
    pub metric: f64,
}

/// Branch cost given the already whitened sample `u`.
#[inline(always)]
fn cost(log_var: f64, inv_var: f64, filtered_mean: f64, u: f64) -> f64 {
    let d = u - filtered_mean;
    log_var + d * d * inv_var
}

/// `ln sigma^2 + ([-b^T 1](window - mu))^2 / sigma^2` for a window `z_{k-L}^k`.
pub fn branch_metric(stats: &BranchStats, ar_coeffs: &[f64], window: &[f64]) -> f64 {
    let u = whiten(ar_coeffs, window);
    cost(
        stats.innovation_var.ln(),
        1.0 / stats.innovation_var,
        stats.filtered_mean,
        u,
    )
}

/// Fills `window` with `z_{k-L}^k`, zero where the index is negative.
#[inline]
pub fn window_at(samples: &[f64], k: usize, window: &mut [f64]) {
    let l = window.len() - 1;
    for (j, w) in window.iter_mut().enumerate() {
        let idx = k + j;
        *w = if idx >= l { samples[idx - l] } else { 0.0 };
    }
}

/// Metric constants of one branch.
#[derive(Debug, Clone, Copy)]
struct BranchConst {
    log_var: f64,
    inv_var: f64,
    mean: f64,
}

/// Viterbi detector with precomputed per-branch metric constants.
///
/// States `j` and `j + M/2` both feed `2j` and `2j + 1`, so the add-compare-
/// select step runs over these butterflies. Branch constants are stored in
/// butterfly order: `(j, 0), (j, 1), (j + M/2, 0), (j + M/2, 1)`.
pub struct Viterbi<'a> {
    trellis: &'a Trellis,
    butterflies: Vec<[BranchConst; 4]>,
}

impl<'a> Viterbi<'a> {
    pub fn new(trellis: &'a Trellis) -> Self {
        let half = trellis.num_states() / 2;
        let konst = |s: usize, bit: u8| {
            let st = trellis.branch_stats(StateId(s as u32), bit);
            BranchConst {
                log_var: st.innovation_var.ln(),
                inv_var: 1.0 / st.innovation_var,
                mean: st.filtered_mean,
            }
        };
        let butterflies = (0..half)
            .map(|j| [konst(j, 0), konst(j, 1), konst(j + half, 0), konst(j + half, 1)])
            .collect();
        Viterbi { trellis, butterflies }
    }

    pub fn decode(&self, signal: &NoisySignal, known_start: StateId) -> DecodeResult {
        self.decode_from(&signal.samples, 0, known_start)
    }

    /// Decodes `samples[start..]` from `known_start`, the state after sample
    /// `start - 1`. Samples before `start` serve as filter history; indices
    /// below zero read as zero.
    pub fn decode_from(&self, samples: &[f64], start: usize, known_start: StateId) -> DecodeResult {
        let t = self.trellis;
        let m = t.num_states();
        let half = m / 2;
        let l = t.params().noise_memory();
        let b = t.params().ar_coeffs();
        let words = m.div_ceil(64);
        let steps = samples.len().saturating_sub(start);

        let mut metric = vec![f64::INFINITY; m];
        metric[known_start.index()] = 0.0;
        let mut next = vec![0.0f64; m];
        let mut decisions = vec![0u64; words * steps];
        let mut window = vec![0.0f64; l + 1];

        for (step, k) in (start..samples.len()).enumerate() {
            let u = if k >= l {
                whiten(b, &samples[k - l..=k])
            } else {
                window_at(samples, k, &mut window);
                whiten(b, &window)
            };
            let dec = &mut decisions[step * words..(step + 1) * words];
            let (lo, hi) = metric.split_at(half);
            for (j, ((bf, (&m_lo, &m_hi)), out)) in self
                .butterflies
                .iter()
                .zip(lo.iter().zip(hi))
                .zip(next.chunks_exact_mut(2))
                .enumerate()
            {
                for bit in 0..2 {
                    let c0 = m_lo + cost(bf[bit].log_var, bf[bit].inv_var, bf[bit].mean, u);
                    let c1 = m_hi + cost(bf[bit + 2].log_var, bf[bit + 2].inv_var, bf[bit + 2].mean, u);
                    let to = 2 * j + bit;
                    // ties keep the lower-numbered predecessor
                    out[bit] = c0.min(c1);
                    dec[to / 64] |= ((c1 < c0) as u64) << (to % 64);
                }
            }
            std::mem::swap(&mut metric, &mut next);
        }

        // Free terminal state: lowest metric, lowest id on ties.
        let mut end = 0usize;
        for (s, &v) in metric.iter().enumerate() {
            if v < metric[end] {
                end = s;
            }
        }

        let mut bits = vec![0u8; steps];
        let mut path = vec![StateId(0); steps + 1];
        let mut state = end;
        for step in (0..steps).rev() {
            path[step + 1] = StateId(state as u32);
            bits[step] = (state & 1) as u8;
            let d = (decisions[step * words + state / 64] >> (state % 64)) & 1;
            state = (state >> 1) + if d == 1 { half } else { 0 };
        }
        path[0] = StateId(state as u32);
        debug_assert!(steps == 0 || state == known_start.index());

        DecodeResult {
            bits,
            path,
            metric: metric[end],
        }
    }
}

/// Decodes the whole signal starting from `known_start`.
pub fn viterbi_decode(trellis: &Trellis, signal: &NoisySignal, known_start: StateId) -> DecodeResult {
    Viterbi::new(trellis).decode(signal, known_start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate, BitSequence, ChannelParams, SignalMap};
    use crate::trellis::build_trellis;

    fn config1(scale: f64) -> ChannelParams {
        ChannelParams::new(
            1,
            vec![0.1, 0.5],
            SignalMap::Linear {
                weights: vec![2.0, 1.0],
                scale,
            },
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap()
    }

    fn stats(var: f64, mean: f64) -> BranchStats {
        BranchStats {
            filtered_mean: mean,
            innovation_std: var.sqrt(),
            innovation_var: var,
            mean_vector: vec![0.0, 0.0, mean],
        }
    }

    #[test]
    fn metric_zero_at_mean() {
        let s = stats(1.0, 2.0);
        assert_eq!(branch_metric(&s, &[0.0, 0.0], &[5.0, -3.0, 2.0]), 0.0);
    }

    #[test]
    fn metric_arithmetic() {
        let s = stats(4.0, 1.0);
        let m = branch_metric(&s, &[0.0, 0.0], &[0.0, 0.0, 3.0]);
        assert!((m - (4.0f64.ln() + 1.0)).abs() < 1e-12);
        assert!((m - 2.386294361119891).abs() < 1e-12);
    }

    #[test]
    fn noiseless_signal_decodes_exactly() {
        let p = config1(1.0);
        let t = build_trellis(&p);
        let payload: Vec<u8> = (0..300u32).map(|i| (i.wrapping_mul(2654435761) >> 7) as u8 & 1).collect();
        let bits = BitSequence::with_preamble(&p, &payload).unwrap();
        let samples: Vec<f64> = (0..bits.len())
            .map(|k| p.signal_at(p.pattern_at(bits.bits(), k)))
            .collect();
        let signal = NoisySignal { samples, rng_seed: 0 };
        let r = viterbi_decode(&t, &signal, StateId(0));
        assert_eq!(r.bits, bits.bits());
        assert_eq!(r.path.len(), bits.len() + 1);
        assert_eq!(r.path[0], StateId(0));
    }

    #[test]
    fn path_is_a_trellis_walk() {
        let p = config1(0.7);
        let t = build_trellis(&p);
        let payload: Vec<u8> = (0..200u32).map(|i| (i % 5 == 1 || i % 3 == 0) as u8).collect();
        let bits = BitSequence::with_preamble(&p, &payload).unwrap();
        let signal = generate(&p, &bits, 4);
        let r = viterbi_decode(&t, &signal, StateId(0));
        for (k, pair) in r.path.windows(2).enumerate() {
            assert_eq!(t.next_state(pair[0], r.bits[k]), pair[1]);
        }
    }

    #[test]
    fn empty_signal() {
        let t = build_trellis(&config1(1.0));
        let r = viterbi_decode(&t, &NoisySignal { samples: vec![], rng_seed: 0 }, StateId(3));
        assert!(r.bits.is_empty());
        assert_eq!(r.path, vec![StateId(3)]);
        assert_eq!(r.metric, 0.0);
    }
}
