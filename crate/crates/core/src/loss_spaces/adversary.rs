//! Randomized hypercube adversary for the `2s√(VT/8)` regret lower bound.
//!
//! Rows `0..2^V` of `U` enumerate `{±1}^V`; the remaining rows are zero. The
//! horizon is split into `V` blocks of length `k = ⌊T/V⌋`. In block `b` every
//! loss is `±s·U[:, b]` with a fair random sign, and leftover rounds after the
//! last block are zero.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::experts::LossVector;

#[derive(Debug, Clone)]
pub struct AdversaryState {
    pub v: usize,
    pub s: f64,
    pub n: usize,
    pub t: usize,
    pub u: DMatrix<f64>,
    pub block_length: usize,
    pub current_round: usize,
    pub rng_seed: u64,
}

impl AdversaryState {
    pub fn new(v: usize, s: f64, n: usize, t: usize, seed: u64) -> Result<Self> {
        if v == 0 {
            return Err(Error::param("V must be at least 1"));
        }
        if v >= usize::BITS as usize - 1 || (1usize << v) > n {
            return Err(Error::param(format!("2^V exceeds N (V={v}, N={n})")));
        }
        if t < v {
            return Err(Error::param(format!("horizon {t} is shorter than V={v}")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::param(format!("s must be positive, got {s}")));
        }
        let u = DMatrix::from_fn(n, v, |i, j| {
            if i >= 1 << v {
                0.0
            } else if (i >> j) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        Ok(Self {
            v,
            s,
            n,
            t,
            u,
            block_length: t / v,
            current_round: 0,
            rng_seed: seed,
        })
    }

    /// Rounds left over after the last full block.
    pub fn remainder(&self) -> usize {
        self.t - self.v * self.block_length
    }

    /// Block of the next round, or `None` during the zero-padded tail.
    pub fn current_block(&self) -> Option<usize> {
        let b = self.current_round / self.block_length;
        (b < self.v).then_some(b)
    }

    pub fn next_loss<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<LossVector> {
        if self.current_round >= self.t {
            return Err(Error::HorizonExhausted(self.t));
        }
        let l = match self.current_block() {
            Some(b) => {
                let y = if rng.random::<bool>() { self.s } else { 0.0 };
                self.u.column(b) * (self.s - 2.0 * y)
            }
            None => DVector::zeros(self.n),
        };
        self.current_round += 1;
        LossVector::new(l)
    }

    /// Expected regret of any learner against this adversary:
    /// `V·2s·E|Bin(k,½) − k/2|`.
    pub fn predicted_mean_regret(&self) -> f64 {
        self.v as f64 * 2.0 * self.s * expected_block_deviation(self.block_length)
    }
}

/// `2s√(VT/8)`.
pub fn lower_bound_value(v: usize, s: f64, t: usize) -> f64 {
    2.0 * s * (v as f64 * t as f64 / 8.0).sqrt()
}

/// `E|r − k/2|` for `r ~ Binomial(k, ½)`, summed exactly with log-space
/// binomial weights.
pub fn expected_block_deviation(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    let ln2k = kf * std::f64::consts::LN_2;
    let mut ln_c = 0.0f64;
    let mut acc = 0.0;
    for r in 0..=k {
        acc += (ln_c - ln2k).exp() * (r as f64 - kf / 2.0).abs();
        if r < k {
            ln_c += ((k - r) as f64).ln() - ((r + 1) as f64).ln();
        }
    }
    acc
}
