//! Simplex points, loss sequences and regret accounting.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Entries below `-HARD_TOL` are rejected outright.
pub const HARD_TOL: f64 = 1e-9;
/// Sums within this distance of one are repaired by renormalizing.
pub const REPAIR_TOL: f64 = 1e-6;

/// A probability distribution over `N` experts.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(DVector<f64>);

impl SimplexPoint {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("simplex point"));
        }
        Ok(Self(DVector::from_element(n, 1.0 / n as f64)))
    }

    pub fn vertex(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::param(format!("vertex {i} out of range for N={n}")));
        }
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        Ok(Self(v))
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, loss: &LossVector) -> f64 {
        self.0.dot(loss.entries())
    }
}

/// Validates `x` as a point of the probability simplex.
///
/// Feasible input is returned unchanged. Input that is off by at most
/// [`REPAIR_TOL`] in its sum (and no worse than `-HARD_TOL` in any entry) is
/// clamped at zero and renormalized.
pub fn validate_simplex(x: &[f64]) -> Result<SimplexPoint> {
    validate_simplex_vec(DVector::from_column_slice(x))
}

pub fn validate_simplex_vec(mut x: DVector<f64>) -> Result<SimplexPoint> {
    if x.is_empty() {
        return Err(Error::Empty("simplex point"));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| **v < -HARD_TOL) {
        return Err(Error::InvalidSimplex(format!("entry {i} is {v:e}")));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > REPAIR_TOL {
        return Err(Error::InvalidSimplex(format!("entries sum to {sum}")));
    }
    let nonneg = x.iter().all(|v| *v >= 0.0);
    if nonneg && (sum - 1.0).abs() <= HARD_TOL {
        return Ok(SimplexPoint(x));
    }
    x.apply(|v| *v = v.max(0.0));
    let s: f64 = x.iter().sum();
    x /= s;
    Ok(SimplexPoint(x))
}

/// One round of expert losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector(DVector<f64>);

impl LossVector {
    pub fn new(entries: DVector<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("loss vector"));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(entries))
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(x))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// A nonempty sequence of loss vectors of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSequence {
    rounds: Vec<LossVector>,
}

impl LossSequence {
    pub fn new(rounds: Vec<LossVector>) -> Result<Self> {
        let first = rounds.first().ok_or(Error::Empty("loss sequence"))?;
        let n = first.dim();
        for r in &rounds {
            check_dim(n, r.dim())?;
        }
        Ok(Self { rounds })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| LossVector::from_slice(r))
                .collect::<Result<_>>()?,
        )
    }

    pub fn rounds(&self) -> &[LossVector] {
        &self.rounds
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn dim(&self) -> usize {
        self.rounds[0].dim()
    }

    pub fn column_sums(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for r in &self.rounds {
            acc += r.entries();
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub cumulative_algorithm_loss: f64,
    pub best_expert_index: usize,
    pub best_expert_loss: f64,
    pub regret: f64,
    /// Regret of every prefix of the sequence, measured against the best
    /// expert of that prefix.
    pub per_round_regret: Vec<f64>,
}

/// Expert with the smallest cumulative loss; ties go to the lowest index.
pub fn best_expert(seq: &LossSequence) -> (usize, f64) {
    argmin_first(seq.column_sums().as_slice())
}

fn argmin_first(x: &[f64]) -> (usize, f64) {
    let mut best = (0, x[0]);
    for (i, &v) in x.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn regret_of(decisions: &[SimplexPoint], seq: &LossSequence) -> Result<RegretReport> {
    if decisions.len() != seq.horizon() {
        return Err(Error::LengthMismatch {
            expected: seq.horizon(),
            found: decisions.len(),
        });
    }
    let n = seq.dim();
    let mut cols = DVector::zeros(n);
    let mut alg = 0.0;
    let mut per_round = Vec::with_capacity(seq.horizon());
    for (p, l) in decisions.iter().zip(seq.rounds()) {
        check_dim(n, p.dim())?;
        alg += p.dot(l);
        cols += l.entries();
        per_round.push(alg - cols.min());
    }
    let (best_expert_index, best_expert_loss) = argmin_first(cols.as_slice());
    Ok(RegretReport {
        cumulative_algorithm_loss: alg,
        best_expert_index,
        best_expert_loss,
        regret: alg - best_expert_loss,
        per_round_regret: per_round,
    })
}
