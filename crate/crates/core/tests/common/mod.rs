#![allow(dead_code, clippy::excessive_precision)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use gmviterbi::bound::pep_factor_w;
use gmviterbi::channel::{ar_is_stable, SignalMap};
use gmviterbi::detector::{branch_metric, window_at};
use gmviterbi::harness::channel_at_snr;
use gmviterbi::{BranchStats, ChannelParams, ExperimentConfig, StateId, Trellis};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(config_path(name)).unwrap()
}

pub fn params_at(name: &str, snr_db: f64) -> ChannelParams {
    channel_at_snr(&load_config(name), snr_db).unwrap()
}

/// `y = 2 a_k + a_{k-1}` with the given AR filter and `sigma^2 = {1, 2, 3, 4}`.
pub fn reference_channel(ar: &[f64]) -> ChannelParams {
    ChannelParams::new(
        1,
        ar.to_vec(),
        SignalMap::Linear {
            weights: vec![2.0, 1.0],
            scale: 1.0,
        },
        vec![1.0, 2.0, 3.0, 4.0],
    )
    .unwrap()
}

/// Random channel with `I <= 2`, `1 <= L <= 3`, a stable filter, random
/// pattern variances and a random output table.
pub fn random_channel<R: Rng>(rng: &mut R) -> ChannelParams {
    let isi = rng.random_range(0..=2usize);
    let l = rng.random_range(1..=3usize);
    let ar = loop {
        let b: Vec<f64> = (0..l).map(|_| rng.random_range(-0.9..0.9)).collect();
        if ar_is_stable(&b) {
            break b;
        }
    };
    let patterns = 1 << (isi + 1);
    let table = (0..patterns).map(|_| rng.random_range(-2.0..2.0)).collect();
    let vars = (0..patterns).map(|_| rng.random_range(0.1..3.0)).collect();
    ChannelParams::new(isi, ar, SignalMap::Table(table), vars).unwrap()
}

/// Exhaustive minimization over all `2^N` input sequences from `start`.
/// Costs accumulate left to right exactly as in the detector; the first
/// sequence in enumeration order wins ties.
pub fn brute_force(trellis: &Trellis, samples: &[f64], start: StateId) -> (Vec<u8>, f64) {
    let n = samples.len();
    let ar = trellis.params().ar_coeffs();
    let mut window = vec![0.0; ar.len() + 1];
    let costs: Vec<[Vec<f64>; 2]> = (0..n)
        .map(|k| {
            window_at(samples, k, &mut window);
            let per_bit = |bit: u8| {
                (0..trellis.num_states())
                    .map(|s| branch_metric(trellis.branch_stats(StateId(s as u32), bit), ar, &window))
                    .collect()
            };
            [per_bit(0), per_bit(1)]
        })
        .collect();
    let mut best = (vec![0u8; n], f64::INFINITY);
    for seq in 0u32..(1 << n) {
        let mut state = start;
        let mut metric = 0.0;
        for (k, cost) in costs.iter().enumerate() {
            let bit = ((seq >> (n - 1 - k)) & 1) as u8;
            metric += cost[bit as usize][state.index()];
            state = trellis.next_state(state, bit);
        }
        if metric < best.1 {
            best.1 = metric;
            best.0 = (0..n).map(|k| ((seq >> (n - 1 - k)) & 1) as u8).collect();
        }
    }
    best
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod estimate and its difference from the embedded Gauss rule.
fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let (mut k, mut g) = (WK[7] * fc, WG[3] * fc);
    for i in 0..7 {
        let pair = f(c - h * XK[i]) + f(c + h * XK[i]);
        k += WK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    (k * h, (k - g).abs() * h)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = kronrod(f, a, b);
    if err <= tol || err <= 1e-15 * k.abs() || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod quadrature with absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive(f, a, b, tol, 30)
}

/// Numerical value of
/// `int exp(-(alpha (x-m)^2 + beta (x-mh)^2) / 2) / (sqrt(2 pi) gamma) dx`.
pub fn pair_integral_quadrature(alpha: f64, beta: f64, m: f64, mh: f64, gamma: f64) -> f64 {
    let f = move |x: f64| {
        (-0.5 * (alpha * (x - m).powi(2) + beta * (x - mh).powi(2))).exp() / ((2.0 * std::f64::consts::PI).sqrt() * gamma)
    };
    let width = 1.0 / (alpha + beta).sqrt();
    let (lo, hi) = (m.min(mh) - 40.0 * width, m.max(mh) + 40.0 * width);
    // Split at the two means so each piece is smooth and unimodal or monotone.
    let peak = f(m).max(f(mh)).max(f(0.5 * (m + mh)));
    let tol = 1e-14 * peak * width;
    let mut knots = vec![lo, m.min(mh), m.max(mh), hi];
    knots.dedup();
    knots.windows(2).map(|w| integrate(&f, w[0], w[1], tol)).sum()
}

/// Unsimplified branch metric `ln(|C|/|c|) + q_C - q_c` from dense inverses.
pub fn full_metric(stats: &BranchStats, c_minor: &DMatrix<f64>, c_full: &DMatrix<f64>, window: &[f64]) -> f64 {
    let l = c_minor.nrows();
    let d = DVector::from_iterator(l + 1, window.iter().zip(&stats.mean_vector).map(|(z, mu)| z - mu));
    let d_past = d.rows(0, l).into_owned();
    let c_inv = c_full.clone().try_inverse().unwrap();
    let m_inv = c_minor.clone().try_inverse().unwrap();
    let q_full = (d.transpose() * c_inv * &d)[(0, 0)];
    let q_past = (d_past.transpose() * m_inv * &d_past)[(0, 0)];
    (c_full.determinant() / c_minor.determinant()).ln() + q_full - q_past
}

/// Random SPD `n x n` matrix with entries of order one.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Bound from explicit error-event enumeration truncated at `n_max` steps.
///
/// An event leaves a good pair on differing input bits, wanders through bad
/// pairs and remerges. The sum carries both the event weight and the number
/// of bit errors along it. Weights are `W / 2` per step from
/// [`pep_factor_w`]; no product-trellis matrices are used.
pub fn event_sum(trellis: &Trellis, n_max: usize) -> f64 {
    let m = trellis.num_states();
    let stats = trellis.stats();
    let nb = 2 * m;
    let w: Vec<f64> = (0..nb * nb)
        .map(|i| 0.5 * pep_factor_w(&stats[i / nb], &stats[i % nb]).0)
        .collect();
    let idx = |s: usize, a: u8| Trellis::branch_index(StateId(s as u32), a);
    let next = |s: usize, a: u8| trellis.next_state(StateId(s as u32), a).index();

    // mass[s][t] and errs[s][t] over bad pairs (s != t) after the current step.
    let mut mass = vec![0.0f64; m * m];
    let mut errs = vec![0.0f64; m * m];
    for s in 0..m {
        for (a, ah) in [(0u8, 1u8), (1, 0)] {
            let (ns, nt) = (next(s, a), next(s, ah));
            let x = w[idx(s, a) * nb + idx(s, ah)];
            mass[ns * m + nt] += x;
            errs[ns * m + nt] += x;
        }
    }
    let mut total = 0.0;
    for _ in 1..n_max {
        let mut mass2 = vec![0.0f64; m * m];
        let mut errs2 = vec![0.0f64; m * m];
        for s in 0..m {
            for t in 0..m {
                let (p, q) = (mass[s * m + t], errs[s * m + t]);
                if s == t || (p == 0.0 && q == 0.0) {
                    continue;
                }
                for a in 0..2u8 {
                    for ah in 0..2u8 {
                        let x = w[idx(s, a) * nb + idx(t, ah)];
                        let (ns, nt) = (next(s, a), next(t, ah));
                        let flip = (a != ah) as u8 as f64;
                        if ns == nt {
                            // remerging step; it cannot flip a bit
                            assert_eq!(a, ah);
                            total += q * x;
                        } else {
                            mass2[ns * m + nt] += p * x;
                            errs2[ns * m + nt] += q * x + flip * p * x;
                        }
                    }
                }
            }
        }
        mass = mass2;
        errs = errs2;
    }
    total / m as f64
}
