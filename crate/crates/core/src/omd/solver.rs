//! Minimizers of `R(p) − θ·p` over the probability simplex.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{project_simplex, spd_factor};
use crate::regularizers::{Regularizer, RegularizerKind};

/// Frank–Wolfe gap at which the Newton solver stops.
pub const NEWTON_GAP_TOL: f64 = 1e-10;
const HESSIAN_FLOOR: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
/// Relative Newton-decrement level at which entropy-free problems also stop.
/// Near the boundary the q-norm terms have unbounded curvature, so the
/// Frank–Wolfe gap can stay large while the attainable decrease is far below
/// rounding.
const NEWTON_DECREMENT_TOL: f64 = 1e-15;

/// `argmin_{p in Δ} R(p) − θ·p`, warm-started from `warm` where the solver
/// can use it.
pub fn argmin_tilted(
    reg: &Regularizer,
    theta: &DVector<f64>,
    warm: &DVector<f64>,
) -> Result<DVector<f64>> {
    if let RegularizerKind::NegEntropy = reg.kind() {
        return Ok(softmax(theta));
    }
    if let Some(c) = reg.isotropic_coefficient() {
        return Ok(project_simplex(&(theta / (2.0 * c))));
    }
    if let RegularizerKind::SquaredQNorm { q } = reg.kind() {
        return Ok(qnorm_argmin(*q, theta));
    }
    if let Some(k) = reg.quadratic_matrix() {
        return simplex_qp(&(k * 2.0), &(-theta), warm);
    }
    newton_argmin(reg, theta, warm)
}

pub fn softmax(z: &DVector<f64>) -> DVector<f64> {
    let m = z.max();
    let w = z.map(|v| (v - m).exp());
    let s = w.sum();
    w / s
}

/// Minimizer of `‖p‖_q² − θ·p` on the simplex.
///
/// The optimum has `p ∝ (θ + μ)_+^{1/(q−1)}` where `μ` solves
/// `φ(μ) = Σz / ‖z‖_q^{2−q} = 2`; `φ` is increasing, so bisection finds it.
pub fn qnorm_argmin(q: f64, theta: &DVector<f64>) -> DVector<f64> {
    let expo = 1.0 / (q - 1.0);
    let z_of = |mu: f64| -> (DVector<f64>, f64) {
        let shifted = theta.map(|t| (t + mu).max(0.0));
        let m = shifted.max();
        if m <= 0.0 {
            return (shifted, 0.0);
        }
        let z = shifted.map(|v| (v / m).powf(expo));
        let sum = z.sum();
        let nq = z.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q);
        (z, m * sum / nq.powf(2.0 - q))
    };
    let tmax = theta.max();
    let mut lo = -tmax;
    let mut step = 1.0f64.max(tmax.abs());
    let mut hi = lo + step;
    while z_of(hi).1 < 2.0 {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if z_of(mid).1 < 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (z, _) = z_of(hi);
    let s = z.sum();
    z / s
}

/// Active-set solver for `min ½x'Bx + c'x` over the simplex, `B` SPD.
///
/// Exact up to rounding; terminates in a finite number of pivots.
pub fn simplex_qp(b: &DMatrix<f64>, c: &DVector<f64>, warm: &DVector<f64>) -> Result<DVector<f64>> {
    let n = c.len();
    let mut x =
        if warm.len() == n && warm.iter().all(|v| *v >= 0.0) && (warm.sum() - 1.0).abs() < 1e-9 {
            warm.clone()
        } else {
            DVector::from_element(n, 1.0 / n as f64)
        };
    let mut free: Vec<bool> = x.iter().map(|v| *v > 0.0).collect();
    let scale = 1f64.max(c.amax()).max(b.amax());
    let tol = 1e-12 * scale;
    let cap = 10 * n + 100;
    for _ in 0..cap {
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let k = idx.len();
        let bff = DMatrix::from_fn(k, k, |i, j| b[(idx[i], idx[j])]);
        let cf = DVector::from_fn(k, |i, _| c[idx[i]]);
        let chol = spd_factor(&bff, "QP block")?;
        let a = chol.solve(&cf);
        let ones = chol.solve(&DVector::from_element(k, 1.0));
        let lambda = (1.0 + a.sum()) / ones.sum();
        let xf = &ones * lambda - a;

        if xf.iter().all(|v| *v >= 0.0) {
            x.fill(0.0);
            for (i, &j) in idx.iter().enumerate() {
                x[j] = xf[i];
            }
            let grad = b * &x + c;
            let mut worst = (usize::MAX, -tol);
            for i in 0..n {
                if !free[i] {
                    let nu = grad[i] - lambda;
                    if nu < worst.1 {
                        worst = (i, nu);
                    }
                }
            }
            if worst.0 == usize::MAX {
                return Ok(x);
            }
            free[worst.0] = true;
        } else {
            let mut alpha = 1.0;
            for (i, &j) in idx.iter().enumerate() {
                if xf[i] < 0.0 {
                    let a = x[j] / (x[j] - xf[i]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            for (i, &j) in idx.iter().enumerate() {
                x[j] += alpha * (xf[i] - x[j]);
            }
            let mut dropped = false;
            for (i, &j) in idx.iter().enumerate() {
                if xf[i] < 0.0 && x[j] <= 1e-15 {
                    x[j] = 0.0;
                    free[j] = false;
                    dropped = true;
                }
            }
            if !dropped {
                // rounding left the blocker slightly positive
                let (i, _) = idx
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| xf[*i] < 0.0)
                    .map(|(_, &j)| (j, x[j]))
                    .fold((usize::MAX, f64::INFINITY), |b, (j, v)| {
                        if v < b.1 {
                            (j, v)
                        } else {
                            b
                        }
                    });
                x[i] = 0.0;
                free[i] = false;
            }
            let s = x.sum();
            x /= s;
        }
    }
    Err(Error::NonConvergence {
        solver: "simplex active-set QP",
        iterations: cap,
        residual: f64::NAN,
    })
}

/// Projected Newton on the simplex: each step minimizes the local quadratic
/// model with the active-set QP, followed by an Armijo backtrack.
pub fn newton_argmin(
    reg: &Regularizer,
    theta: &DVector<f64>,
    warm: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = theta.len();
    let entropy = reg.has_entropy();
    let mut x = if warm.len() == n && warm.iter().all(|v| *v > 0.0 || (!entropy && *v >= 0.0)) {
        warm.clone()
    } else {
        DVector::from_element(n, 1.0 / n as f64)
    };
    let obj = |p: &DVector<f64>| -> Result<f64> { Ok(reg.value(p)? - theta.dot(p)) };
    let mut f = obj(&x)?;
    let cap = 50 * n.max(1);
    let mut gap = f64::INFINITY;
    for _ in 0..cap {
        let g = reg.gradient(&x)? - theta;
        gap = g.dot(&x) - g.min();
        if gap <= NEWTON_GAP_TOL {
            return Ok(x);
        }
        let h = reg.hessian(&x, HESSIAN_FLOOR)?;
        let c = &g - &h * &x;
        let y = simplex_qp(&h, &c, &x)?;
        let d = &y - &x;
        let slope = g.dot(&d);
        let decrement = -(slope + 0.5 * d.dot(&(&h * &d)));
        if d.amax() <= f64::EPSILON {
            break;
        }
        if !entropy && decrement <= NEWTON_DECREMENT_TOL * f.abs().max(1.0) {
            return Ok(y);
        }
        let mut t = 1.0;
        if entropy {
            // keep every coordinate strictly positive
            for i in 0..n {
                if d[i] < 0.0 {
                    t = f64::min(t, 0.99 * x[i] / -d[i]);
                }
            }
        }
        if -slope * t <= 1e-13 * f.abs().max(1.0) {
            // decrease is below the resolution of f; trust the local model
            x += &d * t;
            f = obj(&x)?;
            continue;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x + &d * t;
            let fc = obj(&cand)?;
            if fc <= f + ARMIJO * t * slope {
                x = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let g = reg.gradient(&x)? - theta;
    let final_gap = g.dot(&x) - g.min();
    if final_gap <= NEWTON_GAP_TOL.max(1e-9 * f.abs().max(1.0)) {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        solver: "projected Newton",
        iterations: cap,
        residual: final_gap.min(gap),
    })
}
