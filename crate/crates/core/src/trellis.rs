//! Shift-register trellis over states `S_k = a_{k-L-I+1}^k`.
//!
//! A state packs `L+I` bits with the newest bit in the LSB. A branch carries
//! the `L+I+1`-bit history `a_{k-L-I}^k`, which determines the mean vector of
//! the window `z_{k-L}^k` and the innovation variance of the current sample.

use nalgebra::DMatrix;

use crate::channel::{whiten, ChannelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branch {
    pub from: StateId,
    pub to: StateId,
    /// `a_{k-L-I}^k`, newest bit in the LSB.
    pub history: u32,
    pub input_bit: u8,
}

/// Gaussian statistics of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchStats {
    /// `[-b^T 1] . mean_vector`
    pub filtered_mean: f64,
    pub innovation_std: f64,
    pub innovation_var: f64,
    /// Noiseless window `y` values for `z_{k-L}^k`, oldest first.
    pub mean_vector: Vec<f64>,
}

/// Immutable trellis with per-branch statistics. Branch `2*s + a` leaves state
/// `s` on input bit `a`.
#[derive(Debug, Clone)]
pub struct Trellis {
    params: ChannelParams,
    state_bits: usize,
    branches: Vec<Branch>,
    stats: Vec<BranchStats>,
}

impl Trellis {
    pub fn new(params: &ChannelParams) -> Trellis {
        let state_bits = params.state_bits();
        let num_states = 1usize << state_bits;
        let l = params.noise_memory();
        let pattern_mask = (1u32 << (params.isi_memory() + 1)) - 1;
        let state_mask = (num_states - 1) as u32;

        let mut branches = Vec::with_capacity(2 * num_states);
        let mut stats = Vec::with_capacity(2 * num_states);
        for s in 0..num_states as u32 {
            for a in 0..2u8 {
                let history = (s << 1) | a as u32;
                let to = StateId(history & state_mask);
                branches.push(Branch {
                    from: StateId(s),
                    to,
                    history,
                    input_bit: a,
                });
                let mean_vector: Vec<f64> = (0..=l)
                    .map(|j| params.signal_at(((history >> (l - j)) & pattern_mask) as usize))
                    .collect();
                let p = (history & pattern_mask) as usize;
                stats.push(BranchStats {
                    filtered_mean: whiten(params.ar_coeffs(), &mean_vector),
                    innovation_std: params.noise_std_at(p),
                    innovation_var: params.noise_var_at(p),
                    mean_vector,
                });
            }
        }
        Trellis {
            params: params.clone(),
            state_bits,
            branches,
            stats,
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn num_states(&self) -> usize {
        1 << self.state_bits
    }

    pub fn state_bits(&self) -> usize {
        self.state_bits
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn stats(&self) -> &[BranchStats] {
        &self.stats
    }

    #[inline]
    pub fn branch_index(from: StateId, bit: u8) -> usize {
        2 * from.index() + bit as usize
    }

    #[inline]
    pub fn branch(&self, from: StateId, bit: u8) -> &Branch {
        &self.branches[Self::branch_index(from, bit)]
    }

    #[inline]
    pub fn branch_stats(&self, from: StateId, bit: u8) -> &BranchStats {
        &self.stats[Self::branch_index(from, bit)]
    }

    #[inline]
    pub fn next_state(&self, from: StateId, bit: u8) -> StateId {
        StateId(((from.0 << 1) | bit as u32) & (self.num_states() as u32 - 1))
    }

    /// The two predecessors of `to`, lower-numbered first. Both enter `to`
    /// on input bit `to & 1`.
    #[inline]
    pub fn predecessors(&self, to: StateId) -> [StateId; 2] {
        let low = to.0 >> 1;
        [StateId(low), StateId(low | (1 << (self.state_bits - 1)))]
    }
}

/// Builds the trellis for `params`.
pub fn build_trellis(params: &ChannelParams) -> Trellis {
    Trellis::new(params)
}

/// Full `(L+1)x(L+1)` covariance of `z_{k-L}^k` for a branch, given the
/// `L x L` covariance of the past window.
///
/// The border is `c_minor * b` and the corner `sigma^2 + b^T c_minor b`, which
/// is what the AR recursion implies. Its inverse then splits as
/// `blockdiag(c_minor^-1, 0) + w w^T / sigma^2` with `w = [-b; 1]`.
pub fn branch_covariance(stats: &BranchStats, c_minor: &DMatrix<f64>, ar_coeffs: &[f64]) -> Result<DMatrix<f64>> {
    let l = ar_coeffs.len();
    if c_minor.nrows() != l || c_minor.ncols() != l {
        return Err(Error::InvalidArgument(format!(
            "minor is {}x{}, expected {l}x{l}",
            c_minor.nrows(),
            c_minor.ncols()
        )));
    }
    let scale = c_minor.amax().max(1.0);
    for i in 0..l {
        for j in 0..i {
            if (c_minor[(i, j)] - c_minor[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    if c_minor.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let b = nalgebra::DVector::from_column_slice(ar_coeffs);
    let border = c_minor * &b;
    let corner = stats.innovation_var + b.dot(&border);
    let mut c = DMatrix::<f64>::zeros(l + 1, l + 1);
    c.view_mut((0, 0), (l, l)).copy_from(c_minor);
    for i in 0..l {
        c[(i, l)] = border[i];
        c[(l, i)] = border[i];
    }
    c[(l, l)] = corner;
    Ok(c)
}
