//! Mirror-descent regularizers and their regret certificates.
//!
//! Every regularizer carries a [`Certificate`]: a diameter bound `D²`, a
//! strong-convexity modulus `α` with respect to the support function of a
//! loss atom set, and the loss-norm bound `G`. These feed the mirror-descent
//! regret bound `D·G·√(2T/α)`.

use nalgebra::{DMatrix, DVector};

use crate::atomic_norms::{conjugate_exponent, p_norm, AtomicSet};
use crate::error::{check_dim, Error, Result};
use crate::experts::SimplexPoint;
use crate::linalg::{lambda_max_inverse, spd_factor};

const POWER_ITERATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Certificate {
    pub d_squared: f64,
    pub alpha: f64,
    /// Loss atom set; its support function is the norm `R` is strongly
    /// convex in.
    pub dual_set: AtomicSet,
    pub g: f64,
    /// False when the parameters sit outside the range where the constants
    /// are known to hold (q-norm with `q > 2`).
    pub within_proven_range: bool,
}

impl Certificate {
    pub fn new(d_squared: f64, alpha: f64, dual_set: AtomicSet, g: f64) -> Result<Self> {
        if !(d_squared >= 0.0 && d_squared.is_finite()) {
            return Err(Error::param(format!(
                "D² must be finite and >= 0, got {d_squared}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be positive, got {alpha}")));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::param(format!("G must be positive, got {g}")));
        }
        Ok(Self {
            d_squared,
            alpha,
            dual_set,
            g,
            within_proven_range: true,
        })
    }

    pub fn d(&self) -> f64 {
        self.d_squared.sqrt()
    }

    /// The norm the regularizer is strongly convex in.
    pub fn dual_norm(&self, z: &DVector<f64>) -> f64 {
        self.dual_set.support(z)
    }

    /// `D·G·√(2T/α)`.
    pub fn regret_bound(&self, t: usize) -> f64 {
        self.d() * self.g * (2.0 * t as f64 / self.alpha).sqrt()
    }
}

#[derive(Debug, Clone)]
pub enum RegularizerKind {
    /// `Σ x ln x − Σ x`.
    NegEntropy,
    /// `‖x‖_q²`.
    SquaredQNorm {
        q: f64,
    },
    /// `ε‖x‖²`.
    ScaledEuclidean {
        eps: f64,
    },
    /// `ε·x'A⁻¹x`. `k` caches `εA⁻¹`.
    EllipsoidalQuadratic {
        a: DMatrix<f64>,
        eps: f64,
        k: DMatrix<f64>,
    },
    /// `x'Hx` for a low-rank geometry of rank `d`.
    LowRankQuadratic {
        h: DMatrix<f64>,
        rank: usize,
    },
    Composite(Box<Regularizer>, Box<Regularizer>),
}

#[derive(Debug, Clone)]
pub struct Regularizer {
    kind: RegularizerKind,
    dim: usize,
    certificate: Certificate,
}

impl Regularizer {
    pub fn neg_entropy(n: usize) -> Result<Self> {
        nonzero(n)?;
        let cert = Certificate::new(
            (n as f64).ln(),
            1.0,
            AtomicSet::p_norm_ball(f64::INFINITY, 1.0, n)?,
            1.0,
        )?;
        Ok(Self {
            kind: RegularizerKind::NegEntropy,
            dim: n,
            certificate: cert,
        })
    }

    /// `‖x‖_q²`; `q` must exceed 1. The constants are only proven for
    /// `q <= 2`, which the certificate records.
    pub fn squared_q_norm(q: f64, n: usize) -> Result<Self> {
        nonzero(n)?;
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::param(format!("q must be in (1, inf), got {q}")));
        }
        let mut cert = Certificate::new(
            1.0,
            q - 1.0,
            AtomicSet::p_norm_ball(conjugate_exponent(q), 2f64.sqrt(), n)?,
            1.0,
        )?;
        cert.within_proven_range = q <= 2.0;
        Ok(Self {
            kind: RegularizerKind::SquaredQNorm { q },
            dim: n,
            certificate: cert,
        })
    }

    pub fn scaled_euclidean(eps: f64, n: usize) -> Result<Self> {
        nonzero(n)?;
        positive("eps", eps)?;
        let cert = Certificate::new(eps, 2.0, AtomicSet::p_norm_ball(2.0, eps.sqrt(), n)?, 1.0)?;
        Ok(Self {
            kind: RegularizerKind::ScaledEuclidean { eps },
            dim: n,
            certificate: cert,
        })
    }

    /// `ε·x'A⁻¹x` for SPD `A`.
    pub fn ellipsoidal_quadratic(a: DMatrix<f64>, eps: f64) -> Result<Self> {
        positive("eps", eps)?;
        let n = a.nrows();
        nonzero(n)?;
        let chol = spd_factor(&a, "A")?;
        let lam = lambda_max_inverse(&chol, POWER_ITERATION_TOL);
        let k = chol.inverse() * eps;
        let k = (&k + k.transpose()) * 0.5;
        let cert = Certificate::new(eps * lam, 2.0, AtomicSet::ellipsoid(&a / eps)?, 1.0)?;
        Ok(Self {
            kind: RegularizerKind::EllipsoidalQuadratic { a, eps, k },
            dim: n,
            certificate: cert,
        })
    }

    /// `x'Hx` with `H` built from a rank-`d` subspace.
    pub fn low_rank_quadratic(h: DMatrix<f64>, rank: usize) -> Result<Self> {
        let n = h.nrows();
        nonzero(n)?;
        if rank == 0 || rank > n {
            return Err(Error::param(format!(
                "rank must be in [1, {n}], got {rank}"
            )));
        }
        let chol = spd_factor(&h, "H")?;
        let h_inv = chol.inverse();
        let h_inv = (&h_inv + h_inv.transpose()) * 0.5;
        let cert = Certificate::new(16.0 * rank as f64, 2.0, AtomicSet::ellipsoid(h_inv)?, 1.0)?;
        Ok(Self {
            kind: RegularizerKind::LowRankQuadratic { h, rank },
            dim: n,
            certificate: cert,
        })
    }

    pub fn kind(&self) -> &RegularizerKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn value_at(&self, p: &SimplexPoint) -> Result<f64> {
        self.value(p.weights())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.kind {
            RegularizerKind::NegEntropy => {
                let mut acc = 0.0;
                for (i, &v) in x.iter().enumerate() {
                    if v < 0.0 {
                        return Err(Error::DomainBoundary(i));
                    }
                    if v > 0.0 {
                        acc += v * v.ln();
                    }
                    acc -= v;
                }
                acc
            }
            RegularizerKind::SquaredQNorm { q } => p_norm(x, *q).powi(2),
            RegularizerKind::ScaledEuclidean { eps } => eps * x.norm_squared(),
            RegularizerKind::EllipsoidalQuadratic { k, .. } => x.dot(&(k * x)),
            RegularizerKind::LowRankQuadratic { h, .. } => x.dot(&(h * x)),
            RegularizerKind::Composite(l, r) => l.value(x)? + r.value(x)?,
        })
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.kind {
            RegularizerKind::NegEntropy => {
                if let Some(i) = x.iter().position(|v| *v <= 0.0) {
                    return Err(Error::DomainBoundary(i));
                }
                x.map(f64::ln)
            }
            RegularizerKind::SquaredQNorm { q } => {
                let nq = p_norm(x, *q);
                if nq == 0.0 {
                    return Ok(DVector::zeros(self.dim));
                }
                // 2‖x‖^{2-q} |x_i|^{q-1} sign(x_i), evaluated as 2‖x‖ (|x_i|/‖x‖)^{q-1}
                x.map(|v| 2.0 * nq * v.signum() * (v.abs() / nq).powf(q - 1.0))
            }
            RegularizerKind::ScaledEuclidean { eps } => x * (2.0 * eps),
            RegularizerKind::EllipsoidalQuadratic { k, .. } => (k * x) * 2.0,
            RegularizerKind::LowRankQuadratic { h, .. } => (h * x) * 2.0,
            RegularizerKind::Composite(l, r) => l.gradient(x)? + r.gradient(x)?,
        })
    }

    /// Hessian at an interior point. Coordinates are floored at `floor` for
    /// the terms that blow up on the boundary.
    pub fn hessian(&self, x: &DVector<f64>, floor: f64) -> Result<DMatrix<f64>> {
        check_dim(self.dim, x.len())?;
        let n = self.dim;
        Ok(match &self.kind {
            RegularizerKind::NegEntropy => DMatrix::from_diagonal(&x.map(|v| 1.0 / v.max(floor))),
            RegularizerKind::SquaredQNorm { q } => {
                let y = x.map(|v| v.abs().max(floor));
                let nq = p_norm(&y, *q);
                let r = y.map(|v| v / nq);
                let w = r.map(|v| v.powf(q - 1.0));
                let mut m = &w * w.transpose() * (2.0 * (2.0 - q));
                for i in 0..n {
                    m[(i, i)] += 2.0 * (q - 1.0) * r[i].powf(q - 2.0);
                }
                m
            }
            RegularizerKind::Composite(l, r) => l.hessian(x, floor)? + r.hessian(x, floor)?,
            _ => self.quadratic_matrix().expect("quadratic variant") * 2.0,
        })
    }

    /// `K` with `R(x) = x'Kx` when every component is quadratic.
    pub fn quadratic_matrix(&self) -> Option<DMatrix<f64>> {
        match &self.kind {
            RegularizerKind::ScaledEuclidean { eps } => {
                Some(DMatrix::identity(self.dim, self.dim) * *eps)
            }
            RegularizerKind::EllipsoidalQuadratic { k, .. } => Some(k.clone()),
            RegularizerKind::LowRankQuadratic { h, .. } => Some(h.clone()),
            RegularizerKind::Composite(l, r) => Some(l.quadratic_matrix()? + r.quadratic_matrix()?),
            _ => None,
        }
    }

    /// `c` with `R(x) = c‖x‖²` when every component is a scaled Euclidean term.
    pub fn isotropic_coefficient(&self) -> Option<f64> {
        match &self.kind {
            RegularizerKind::ScaledEuclidean { eps } => Some(*eps),
            RegularizerKind::Composite(l, r) => {
                Some(l.isotropic_coefficient()? + r.isotropic_coefficient()?)
            }
            _ => None,
        }
    }

    /// True when the regularizer is invariant under permuting coordinates,
    /// so its minimizer over the simplex is the uniform point.
    pub fn is_permutation_symmetric(&self) -> bool {
        match &self.kind {
            RegularizerKind::NegEntropy
            | RegularizerKind::SquaredQNorm { .. }
            | RegularizerKind::ScaledEuclidean { .. } => true,
            RegularizerKind::Composite(l, r) => {
                l.is_permutation_symmetric() && r.is_permutation_symmetric()
            }
            _ => false,
        }
    }

    /// True when the domain of the regularizer is the positive orthant.
    pub fn has_entropy(&self) -> bool {
        match &self.kind {
            RegularizerKind::NegEntropy => true,
            RegularizerKind::Composite(l, r) => l.has_entropy() || r.has_entropy(),
            _ => false,
        }
    }

    pub fn bregman(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let g = self.gradient(y)?;
        Ok(self.value(x)? - self.value(y)? - g.dot(&(x - y)))
    }

    /// Short human-readable name.
    pub fn describe(&self) -> String {
        match &self.kind {
            RegularizerKind::NegEntropy => "negentropy".into(),
            RegularizerKind::SquaredQNorm { q } => format!("qnorm(q={q})"),
            RegularizerKind::ScaledEuclidean { eps } => format!("euclidean(eps={eps})"),
            RegularizerKind::EllipsoidalQuadratic { eps, .. } => format!("ellipsoidal(eps={eps})"),
            RegularizerKind::LowRankQuadratic { rank, .. } => format!("lowrank(d={rank})"),
            RegularizerKind::Composite(l, r) => format!("{}+{}", l.describe(), r.describe()),
        }
    }
}

/// `R1 + R2` with certificate `(D1² + D2², min(α1, α2)/2)` in the sum of the
/// children's dual norms.
pub fn compose(r1: Regularizer, r2: Regularizer) -> Result<Regularizer> {
    check_dim(r1.dim, r2.dim)?;
    let c1 = &r1.certificate;
    let c2 = &r2.certificate;
    let mut cert = Certificate::new(
        c1.d_squared + c2.d_squared,
        c1.alpha.min(c2.alpha) / 2.0,
        AtomicSet::minkowski_sum(c1.dual_set.clone(), c2.dual_set.clone())?,
        1.0,
    )?;
    cert.within_proven_range = c1.within_proven_range && c2.within_proven_range;
    Ok(Regularizer {
        dim: r1.dim,
        kind: RegularizerKind::Composite(Box::new(r1), Box::new(r2)),
        certificate: cert,
    })
}

/// The q-norm exponent matched to `s`-sparse losses: `q = p/(p-1)` with
/// `p = 2 ln(s+1)`. Accepts real `s` so the `p = 2` boundary is reachable.
pub fn qnorm_exponent_for_sparsity(s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::param(format!("sparsity must be positive, got {s}")));
    }
    let p = 2.0 * (s + 1.0).ln();
    if p <= 1.0 {
        return Err(Error::param(format!("sparsity {s} gives p = {p} <= 1")));
    }
    Ok(p / (p - 1.0))
}

pub fn make_qnorm_for_sparsity(s: usize, n: usize) -> Result<Regularizer> {
    if s < 1 || s > n {
        return Err(Error::param(format!(
            "sparsity must be in [1, {n}], got {s}"
        )));
    }
    Regularizer::squared_q_norm(qnorm_exponent_for_sparsity(s as f64)?, n)
}

fn nonzero(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("regularizer dimension"));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::param(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}
