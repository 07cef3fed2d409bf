//! Small dense helpers shared by the geometry and solver modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Chol = Cholesky<f64, Dyn>;

const SYM_TOL: f64 = 1e-12;

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn spd_factor(m: &DMatrix<f64>, what: &str) -> Result<Chol> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if let Some(i) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYM_TOL * scale {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let sym = symmetrize(m);
    Cholesky::new(sym).ok_or_else(|| Error::NotPositiveDefinite(format!("{what} failed to factor")))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of `A^{-1}` by power iteration on the factored `A`.
pub fn lambda_max_inverse(chol: &Chol, tol: f64) -> f64 {
    let n = chol.l_dirty().nrows();
    // a deterministic start with components along every eigenvector in practice
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_749).fract());
    v /= v.norm();
    let mut lam = 0.0;
    for _ in 0..10_000 {
        let w = chol.solve(&v);
        let next = v.dot(&w);
        let nw = w.norm();
        v = w / nw;
        if (next - lam).abs() <= tol * next.abs().max(1.0) {
            // Rayleigh quotient of the converged vector
            return v.dot(&chol.solve(&v)).max(next);
        }
        lam = next;
    }
    lam
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}

pub fn lambda_min_sym(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    DVector::from_fn(n, |i, _| (v[i] - theta).max(0.0))
}

/// `ln(exp(a) + exp(b))` evaluated without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
