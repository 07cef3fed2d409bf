//! Gauges of centrally symmetric convex bodies, their support functions, and
//! the gauge of a Minkowski sum.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{lambda_min_sym, spd_factor, Chol};

pub const DEFAULT_MINKOWSKI_TOL: f64 = 1e-9;
pub const MINKOWSKI_MAX_ITER: usize = 10_000;

/// Ellipsoid `{x : x'Qx <= 1}` with a cached Cholesky factor of `Q`.
#[derive(Debug, Clone)]
pub struct EllipsoidBody {
    q: DMatrix<f64>,
    chol: Chol,
}

impl EllipsoidBody {
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn factor(&self) -> &Chol {
        &self.chol
    }
}

#[derive(Debug, Clone)]
pub enum AtomicSet {
    /// `{x : ||x||_p <= radius}`. `p = f64::INFINITY` is the max-norm ball.
    PNormBall {
        p: f64,
        radius: f64,
        dim: usize,
    },
    Ellipsoid(Arc<EllipsoidBody>),
    MinkowskiSum(Box<AtomicSet>, Box<AtomicSet>),
}

impl AtomicSet {
    pub fn p_norm_ball(p: f64, radius: f64, dim: usize) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::param(format!("p must be >= 1, got {p}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if dim == 0 {
            return Err(Error::Empty("atomic set dimension"));
        }
        Ok(AtomicSet::PNormBall { p, radius, dim })
    }

    pub fn ellipsoid(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() == 0 {
            return Err(Error::Empty("atomic set dimension"));
        }
        let chol = spd_factor(&q, "ellipsoid matrix")?;
        Ok(AtomicSet::Ellipsoid(Arc::new(EllipsoidBody { q, chol })))
    }

    pub fn minkowski_sum(left: AtomicSet, right: AtomicSet) -> Result<Self> {
        check_dim(left.dim(), right.dim())?;
        Ok(AtomicSet::MinkowskiSum(Box::new(left), Box::new(right)))
    }

    pub fn dim(&self) -> usize {
        match self {
            AtomicSet::PNormBall { dim, .. } => *dim,
            AtomicSet::Ellipsoid(e) => e.q.nrows(),
            AtomicSet::MinkowskiSum(l, _) => l.dim(),
        }
    }

    /// Gauge `inf {t > 0 : x in tA}`, with `norm(0) = 0`.
    ///
    /// Minkowski sums are solved numerically to [`DEFAULT_MINKOWSKI_TOL`].
    pub fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        match self {
            AtomicSet::MinkowskiSum(..) => {
                Ok(minkowski_leaves(&self.leaves(), x, DEFAULT_MINKOWSKI_TOL)?.value)
            }
            leaf => Ok(leaf.leaf_gauge(x)),
        }
    }

    /// Support function `sup {x.z : z in A}`.
    pub fn dual_norm(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.support(x))
    }

    pub(crate) fn support(&self, x: &DVector<f64>) -> f64 {
        match self {
            AtomicSet::PNormBall { p, radius, .. } => radius * p_norm(x, conjugate_exponent(*p)),
            AtomicSet::Ellipsoid(e) => e
                .chol
                .l_dirty()
                .solve_lower_triangular(x)
                .map_or(f64::INFINITY, |y| y.norm()),
            AtomicSet::MinkowskiSum(l, r) => l.support(x) + r.support(x),
        }
    }

    /// Leaf sets of a (possibly nested) Minkowski sum, left to right.
    pub fn leaves(&self) -> Vec<&AtomicSet> {
        match self {
            AtomicSet::MinkowskiSum(l, r) => {
                let mut v = l.leaves();
                v.extend(r.leaves());
                v
            }
            leaf => vec![leaf],
        }
    }

    fn leaf_gauge(&self, x: &DVector<f64>) -> f64 {
        match self {
            AtomicSet::PNormBall { p, radius, .. } => p_norm(x, *p) / radius,
            AtomicSet::Ellipsoid(e) => x.dot(&(&e.q * x)).max(0.0).sqrt(),
            AtomicSet::MinkowskiSum(..) => unreachable!("gauge of a leaf"),
        }
    }

    fn leaf_subgradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        match self {
            AtomicSet::PNormBall { p, radius, .. } => {
                let mut g = DVector::zeros(n);
                if *p == 1.0 {
                    g = x.map(|v| {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    });
                } else if p.is_infinite() {
                    let i = x.iamax();
                    if x[i] != 0.0 {
                        g[i] = x[i].signum();
                    }
                } else {
                    let norm = p_norm(x, *p);
                    if norm > 0.0 {
                        g = x.map(|v| v.signum() * (v.abs() / norm).powf(p - 1.0));
                    }
                }
                g / *radius
            }
            AtomicSet::Ellipsoid(e) => {
                let qx = &e.q * x;
                let val = x.dot(&qx);
                if val > 0.0 {
                    qx / val.sqrt()
                } else {
                    DVector::zeros(n)
                }
            }
            AtomicSet::MinkowskiSum(..) => unreachable!("subgradient of a leaf"),
        }
    }

    /// Largest Euclidean norm of a point of a leaf set.
    fn leaf_euclidean_radius(&self) -> f64 {
        match self {
            AtomicSet::PNormBall { p, radius, dim } => {
                if *p <= 2.0 {
                    *radius
                } else {
                    let e = if p.is_infinite() { 0.5 } else { 0.5 - 1.0 / p };
                    radius * (*dim as f64).powf(e)
                }
            }
            AtomicSet::Ellipsoid(e) => 1.0 / lambda_min_sym(&e.q).sqrt(),
            AtomicSet::MinkowskiSum(..) => unreachable!("radius of a leaf"),
        }
    }
}

/// `q` with `1/p + 1/q = 1`, using the limit cases at 1 and infinity.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

pub fn p_norm(x: &DVector<f64>, p: f64) -> f64 {
    if p == 1.0 {
        x.lp_norm(1)
    } else if p == 2.0 {
        x.norm()
    } else if p.is_infinite() {
        x.amax()
    } else {
        let m = x.amax();
        if m == 0.0 {
            return 0.0;
        }
        m * x
            .iter()
            .map(|v| (v.abs() / m).powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Result of minimizing `max_j ||x_j||_{A_j}` over splits `x = sum_j x_j`.
#[derive(Debug, Clone)]
pub struct MinkowskiDecomposition {
    /// Objective at the best split found; an upper bound on the gauge.
    pub value: f64,
    /// Certified lower bound; `value - lower_bound <= tol` on return.
    pub lower_bound: f64,
    pub parts: Vec<DVector<f64>>,
    pub iterations: usize,
}

/// Gauge of `left + right` at `x`, with an explicit split witness.
pub fn minkowski_norm(
    left: &AtomicSet,
    right: &AtomicSet,
    x: &DVector<f64>,
    tol: f64,
) -> Result<MinkowskiDecomposition> {
    check_dim(left.dim(), right.dim())?;
    check_dim(left.dim(), x.len())?;
    let mut leaves = left.leaves();
    leaves.extend(right.leaves());
    minkowski_leaves(&leaves, x, tol)
}

/// Central-cut ellipsoid method over the free parts `x_1..x_{k-1}`; the last
/// part absorbs the remainder.
fn minkowski_leaves(
    leaves: &[&AtomicSet],
    x: &DVector<f64>,
    tol: f64,
) -> Result<MinkowskiDecomposition> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = x.len();
    let k = leaves.len();
    if x.iter().all(|v| *v == 0.0) {
        return Ok(MinkowskiDecomposition {
            value: 0.0,
            lower_bound: 0.0,
            parts: vec![DVector::zeros(n); k],
            iterations: 0,
        });
    }
    let radii: Vec<f64> = leaves.iter().map(|a| a.leaf_euclidean_radius()).collect();
    if n == 1 {
        // every leaf is a symmetric interval [-r_j, r_j]
        let total: f64 = radii.iter().sum();
        let parts = radii.iter().map(|r| x * (r / total)).collect();
        let value = x[0].abs() / total;
        return Ok(MinkowskiDecomposition {
            value,
            lower_bound: value,
            parts,
            iterations: 0,
        });
    }

    let dim = n * (k - 1);
    let split = |y: &DVector<f64>| -> Vec<DVector<f64>> {
        let mut parts: Vec<DVector<f64>> =
            (0..k - 1).map(|j| y.rows(j * n, n).into_owned()).collect();
        let mut last = x.clone();
        for p in &parts {
            last -= p;
        }
        parts.push(last);
        parts
    };
    let eval = |y: &DVector<f64>| -> (f64, usize, Vec<DVector<f64>>) {
        let parts = split(y);
        let mut best = (f64::NEG_INFINITY, 0);
        for (j, (a, p)) in leaves.iter().zip(&parts).enumerate() {
            let g = a.leaf_gauge(p);
            if g > best.0 {
                best = (g, j);
            }
        }
        (best.0, best.1, parts)
    };

    let mut c = DVector::from_fn(dim, |i, _| x[i % n] / k as f64);
    let (f0, _, _) = eval(&c);
    let xk = x.norm() / k as f64;
    let r2: f64 = radii[..k - 1].iter().map(|r| (f0 * r + xk).powi(2)).sum();
    let mut p = DMatrix::identity(dim, dim) * r2.max(f64::MIN_POSITIVE);

    let mut best_val = f64::INFINITY;
    let mut best_parts = Vec::new();
    let mut lower = 0.0f64;
    let nf = dim as f64;
    for it in 0..MINKOWSKI_MAX_ITER {
        let (f, j, parts) = eval(&c);
        if f < best_val {
            best_val = f;
            best_parts = parts.clone();
        }
        let gj = leaves[j].leaf_subgradient(&parts[j]);
        let mut g = DVector::zeros(dim);
        if j + 1 < k {
            g.rows_mut(j * n, n).copy_from(&gj);
        } else {
            for b in 0..k - 1 {
                g.rows_mut(b * n, n).copy_from(&(-&gj));
            }
        }
        let pg = &p * &g;
        let gpg = g.dot(&pg);
        if gpg <= 0.0 || !gpg.is_finite() {
            // zero subgradient: the current split is optimal
            lower = lower.max(f);
        } else {
            lower = lower.max(f - gpg.sqrt());
        }
        if best_val - lower <= tol {
            return Ok(MinkowskiDecomposition {
                value: best_val,
                lower_bound: lower,
                parts: best_parts,
                iterations: it + 1,
            });
        }
        let s = gpg.sqrt();
        let b = pg / s;
        c -= &b * (1.0 / (nf + 1.0));
        p = (p - (&b * b.transpose()) * (2.0 / (nf + 1.0))) * (nf * nf / (nf * nf - 1.0));
        p = (&p + p.transpose()) * 0.5;
    }
    Err(Error::NonConvergence {
        solver: "minkowski_norm",
        iterations: MINKOWSKI_MAX_ITER,
        residual: best_val - lower,
    })
}
