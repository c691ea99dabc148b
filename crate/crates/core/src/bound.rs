//! Analytic upper bound on the detector bit error rate.
//!
//! The pairwise error probability of an error event is bounded with a
//! Gallager-style exponent `rho_k` per step. After whitening the received
//! window, each step contributes an independent one-dimensional Gaussian
//! integral `W`, so the bound factorizes over pairs of (actual, decoded)
//! branches. Summing over all error events is done on the product trellis
//! of (actual, decoded) state pairs:
//!
//! ```text
//! P_b <= (1/M) [ b^T (I - V_BB)^-1 c + b^T (I - V_BB)^-1 V'_BB (I - V_BB)^-1 c ]
//! ```
//!
//! where `b = 1^T V_GB(1)`, `c = V_BG(1) 1` and `V'_BB` keeps only the entries
//! whose input bits differ. Good-to-good and bad-to-good transitions never
//! carry a bit error and good-to-bad transitions always do, which is why the
//! derivative terms of the first and last factor reduce as shown.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::trellis::{BranchStats, StateId, Trellis};

/// Grid resolution of the `rho` search.
pub const RHO_GRID_POINTS: usize = 1001;
/// Width at which golden-section refinement stops.
pub const RHO_TOLERANCE: f64 = 1e-9;
/// Product-trellis entries below this value are clamped to zero.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;
const POWER_ITERATIONS: usize = 200;
const POWER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RhoMode {
    /// Per-factor minimization over `rho` in `[0, 1]`.
    #[default]
    Optimized,
    /// Fixed `rho = 1/2` (Bhattacharyya factor).
    Half,
}

impl std::str::FromStr for RhoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimized" => Ok(RhoMode::Optimized),
            "half" => Ok(RhoMode::Half),
            _ => Err(Error::Config(format!("unknown rho mode {s:?}"))),
        }
    }
}

fn ln_pair_integral(alpha: f64, beta: f64, m: f64, m_hat: f64, ln_gamma: f64) -> f64 {
    let s = alpha + beta;
    let d = m - m_hat;
    // -(a m^2 + b mh^2)/2 + (a m + b mh)^2 / (2(a+b)) == -a b (m - mh)^2 / (2(a+b))
    -ln_gamma - 0.5 * s.ln() - alpha * beta * d * d / (2.0 * s)
}

/// Closed form of
/// `int (1/(sqrt(2 pi) gamma)) exp(-(alpha (x-m)^2 + beta (x-m_hat)^2)/2) dx`.
pub fn gaussian_pair_integral(alpha: f64, beta: f64, m: f64, m_hat: f64, gamma: f64) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need alpha, beta >= 0 and alpha + beta > 0 (alpha = {alpha}, beta = {beta})"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    Ok(ln_pair_integral(alpha, beta, m, m_hat, gamma.ln()).exp())
}

/// `ln W(rho)` for an (actual, decoded) branch pair.
///
/// The normalizer `-ln gamma - ln(alpha + beta) / 2` is rewritten in terms of
/// the variance ratio `r = sigma_hat^2 / sigma^2` as
/// `-(rho ln r + ln(1 + rho (1/r - 1))) / 2`, which is exactly zero for equal
/// variances.
pub fn ln_pep_factor_at(actual: &BranchStats, decoded: &BranchStats, rho: f64) -> f64 {
    let alpha = (1.0 - rho) / actual.innovation_var;
    let beta = rho / decoded.innovation_var;
    let ln_r = decoded.innovation_var.ln() - actual.innovation_var.ln();
    let norm = -0.5 * (rho * ln_r + (rho * (-ln_r).exp_m1()).ln_1p());
    let d = actual.filtered_mean - decoded.filtered_mean;
    if d == 0.0 {
        return norm;
    }
    norm - alpha * beta * d * d / (2.0 * (alpha + beta))
}

/// Minimizes `ln W(rho)` over `[0, 1]`; returns `(ln W*, rho*)`.
pub fn ln_pep_factor(actual: &BranchStats, decoded: &BranchStats) -> (f64, f64) {
    let f = |rho: f64| ln_pep_factor_at(actual, decoded, rho);
    let step = 1.0 / (RHO_GRID_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best = f(0.0);
    for i in 1..RHO_GRID_POINTS {
        let v = f(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = (best_i as f64 - 1.0).max(0.0) * step;
    let mut hi = ((best_i + 1) as f64 * step).min(1.0);
    let best_rho = best_i as f64 * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > RHO_TOLERANCE {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let rho = 0.5 * (lo + hi);
    let v = f(rho);
    if v < best {
        (v, rho)
    } else {
        (best, best_rho)
    }
}

/// Per-branch-pair Chernoff factor `W` minimized over `rho`; returns `(W*, rho*)`.
pub fn pep_factor_w(actual: &BranchStats, decoded: &BranchStats) -> (f64, f64) {
    let (v, rho) = ln_pep_factor(actual, decoded);
    (v.exp(), rho)
}

fn ln_factor(actual: &BranchStats, decoded: &BranchStats, mode: RhoMode) -> (f64, f64) {
    match mode {
        RhoMode::Optimized => ln_pep_factor(actual, decoded),
        RhoMode::Half => (ln_pep_factor_at(actual, decoded, 0.5), 0.5),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairState {
    pub actual: StateId,
    pub decoded: StateId,
    pub is_good: bool,
}

/// Weighted graph over (actual, decoded) state pairs.
///
/// Pair states are ordered with the `M` good pairs `(s, s)` first, then the
/// bad pairs in lexicographic order, so the `V_GG`, `V_GB`, `V_BG`, `V_BB`
/// blocks are contiguous.
#[derive(Debug, Clone)]
pub struct ProductTrellis {
    num_states: usize,
    mode: RhoMode,
    /// `(1/2) W` at `Z = 1`.
    weights: DMatrix<f64>,
    /// Exponent of `Z`: 1 when the actual and decoded input bits differ.
    delta: DMatrix<u8>,
    /// Optimal `rho` per (actual branch, decoded branch).
    rho: Vec<f64>,
    clamped: usize,
}

impl ProductTrellis {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_states
    }

    pub fn mode(&self) -> RhoMode {
        self.mode
    }

    pub fn pair_index(&self, actual: StateId, decoded: StateId) -> usize {
        let m = self.num_states;
        let (i, j) = (actual.index(), decoded.index());
        if i == j {
            i
        } else {
            m + i * (m - 1) + if j < i { j } else { j - 1 }
        }
    }

    pub fn pair_state(&self, index: usize) -> PairState {
        let m = self.num_states;
        if index < m {
            let s = StateId(index as u32);
            return PairState {
                actual: s,
                decoded: s,
                is_good: true,
            };
        }
        let r = index - m;
        let i = r / (m - 1);
        let mut j = r % (m - 1);
        if j >= i {
            j += 1;
        }
        PairState {
            actual: StateId(i as u32),
            decoded: StateId(j as u32),
            is_good: false,
        }
    }

    /// Full `V(1)`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn delta(&self) -> &DMatrix<u8> {
        &self.delta
    }

    /// Optimal `rho` for actual branch `a` and decoded branch `d` (branch indices).
    pub fn rho_at(&self, actual_branch: usize, decoded_branch: usize) -> f64 {
        self.rho[actual_branch * 2 * self.num_states + decoded_branch]
    }

    pub fn rho_values(&self) -> &[f64] {
        &self.rho
    }

    /// Entries clamped to zero because `W` underflowed.
    pub fn clamped_entries(&self) -> usize {
        self.clamped
    }

    fn block(&self, m: &DMatrix<f64>, rows: (usize, usize), cols: (usize, usize)) -> DMatrix<f64> {
        m.view((rows.0, cols.0), (rows.1, cols.1)).into_owned()
    }

    fn good(&self) -> (usize, usize) {
        (0, self.num_states)
    }

    fn bad(&self) -> (usize, usize) {
        (self.num_states, self.num_pairs() - self.num_states)
    }

    pub fn v_gg(&self) -> DMatrix<f64> {
        self.block(&self.weights, self.good(), self.good())
    }

    pub fn v_gb(&self) -> DMatrix<f64> {
        self.block(&self.weights, self.good(), self.bad())
    }

    pub fn v_bg(&self) -> DMatrix<f64> {
        self.block(&self.weights, self.bad(), self.good())
    }

    pub fn v_bb(&self) -> DMatrix<f64> {
        self.block(&self.weights, self.bad(), self.bad())
    }

    /// `dV_BB/dZ` at `Z = 1`.
    pub fn v_bb_prime(&self) -> DMatrix<f64> {
        let mut v = self.v_bb();
        let (off, n) = self.bad();
        for c in 0..n {
            for r in 0..n {
                if self.delta[(off + r, off + c)] == 0 {
                    v[(r, c)] = 0.0;
                }
            }
        }
        v
    }
}

/// Builds the product trellis, evaluating `W` for every pair of branches.
pub fn build_product_trellis(trellis: &Trellis, mode: RhoMode) -> ProductTrellis {
    build_product_trellis_with(trellis, mode, Execution::default())
}

pub fn build_product_trellis_with(trellis: &Trellis, mode: RhoMode, exec: Execution) -> ProductTrellis {
    let m = trellis.num_states();
    let nb = 2 * m;
    let stats = trellis.stats();
    // W depends only on the two branches, so tabulate it over branch pairs.
    let table: Vec<(f64, f64)> = map_indexed(exec, nb * nb, |idx| {
        ln_factor(&stats[idx / nb], &stats[idx % nb], mode)
    });

    let pairs = m * m;
    let mut pt = ProductTrellis {
        num_states: m,
        mode,
        weights: DMatrix::zeros(pairs, pairs),
        delta: DMatrix::zeros(pairs, pairs),
        rho: table.iter().map(|&(_, rho)| rho).collect(),
        clamped: 0,
    };
    let ln_floor = UNDERFLOW_THRESHOLD.ln();
    for si in 0..m as u32 {
        for sj in 0..m as u32 {
            let src = pt.pair_index(StateId(si), StateId(sj));
            for ai in 0..2u8 {
                for aj in 0..2u8 {
                    let bi = Trellis::branch_index(StateId(si), ai);
                    let bj = Trellis::branch_index(StateId(sj), aj);
                    let dst = pt.pair_index(trellis.next_state(StateId(si), ai), trellis.next_state(StateId(sj), aj));
                    let ln_w = table[bi * nb + bj].0;
                    let w = if ln_w < ln_floor {
                        pt.clamped += 1;
                        0.0
                    } else {
                        0.5 * ln_w.exp()
                    };
                    pt.weights[(src, dst)] = w;
                    pt.delta[(src, dst)] = (ai != aj) as u8;
                }
            }
        }
    }
    pt
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub ber_bound: f64,
    pub spectral_radius: f64,
    pub rho_values: Option<Vec<f64>>,
    pub clamped_entries: usize,
}

/// Power-iteration estimate of the spectral radius of a non-negative matrix.
///
/// Iterates on `A + sI` with `s` half the largest row sum. The shifted matrix
/// shares the Perron vector of `A` but is aperiodic, so the ratio converges
/// even for periodic `A`.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let row_max = a.column_sum().max();
    if row_max == 0.0 {
        return 0.0;
    }
    let shift = 0.5 * row_max;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = f64::NAN;
    for _ in 0..POWER_ITERATIONS {
        let y = a * &x + &x * shift;
        let norm = y.lp_norm(1);
        if !(norm > 0.0) || !norm.is_finite() {
            return norm - shift;
        }
        let next = norm - shift;
        x = y / norm;
        if (next - estimate).abs() < POWER_TOLERANCE {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Evaluates the closed-form bound on the product trellis.
pub fn ber_upper_bound(pt: &ProductTrellis) -> Result<BoundResult> {
    let v_bb = pt.v_bb();
    let radius = spectral_radius(&v_bb);
    if !(radius < 1.0) {
        return Err(Error::BoundDiverges { spectral_radius: radius });
    }
    let n = v_bb.nrows();
    let b: DVector<f64> = pt.v_gb().row_sum().transpose();
    let c: DVector<f64> = pt.v_bg().column_sum();
    let lu = (DMatrix::identity(n, n) - &v_bb).lu();
    let x = lu.solve(&c).ok_or(Error::Singular)?;
    let z = lu.solve(&(pt.v_bb_prime() * &x)).ok_or(Error::Singular)?;
    let value = (b.dot(&x) + b.dot(&z)) / pt.num_states() as f64;
    if !value.is_finite() || value < 0.0 || x.iter().any(|v| *v < 0.0) {
        return Err(Error::BoundDiverges { spectral_radius: radius });
    }
    Ok(BoundResult {
        ber_bound: value,
        spectral_radius: radius,
        rho_values: Some(pt.rho_values().to_vec()),
        clamped_entries: pt.clamped_entries(),
    })
}

/// Builds the trellis and product trellis for `params` and evaluates the bound.
pub fn compute_bound(params: &crate::channel::ChannelParams, mode: RhoMode) -> Result<BoundResult> {
    let trellis = Trellis::new(params);
    ber_upper_bound(&build_product_trellis(&trellis, mode))
}
