//! Minimum-volume enclosing ellipsoids and the low-rank quadratic geometry.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::spd_factor;

pub const DEFAULT_MVEE_TOL: f64 = 1e-7;
pub const MVEE_MAX_ITER: usize = 100_000;
pub const MAX_RANK: usize = 10;
pub const MAX_DIM: usize = 4096;
/// Vertex enumeration is used when it solves at most this many systems.
pub const VERTEX_ENUMERATION_LIMIT: usize = 200_000;

const RANK_TOL: f64 = 1e-10;

/// An `N×d` basis of full column rank.
#[derive(Debug, Clone)]
pub struct SubspaceSpec {
    u: DMatrix<f64>,
}

impl SubspaceSpec {
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        let (n, d) = u.shape();
        if d == 0 || n == 0 {
            return Err(Error::Empty("subspace basis"));
        }
        if d > n {
            return Err(Error::param(format!("rank {d} exceeds dimension {n}")));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let sv = u.clone().singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if lo.is_nan() || lo <= RANK_TOL * hi {
            return Err(Error::Degenerate(format!(
                "basis is rank deficient (singular values {lo:e} / {hi:e})"
            )));
        }
        Ok(Self { u })
    }

    /// Nonnegative basis with unit row sums, so that every `v` in `[0,1]^d`
    /// maps into `[0,1]^N`.
    pub fn random_nonnegative<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        let mut u = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
        for mut row in u.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        Self::new(u)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn d(&self) -> usize {
        self.u.ncols()
    }
}

/// Ellipsoid `{x : (x−c)'M(x−c) <= 1}`.
#[derive(Debug, Clone)]
pub struct EllipsoidResult {
    pub m: DMatrix<f64>,
    pub center: DVector<f64>,
    pub iterations: usize,
    /// `max_j (x_j−c)'M(x_j−c) − 1`.
    pub gap: f64,
}

/// Khachiyan's barycentric algorithm with Todd–Yildirim away steps.
pub fn mvee(points: &[DVector<f64>], tol: f64) -> Result<EllipsoidResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let m = points.len();
    let d = points.first().ok_or(Error::Empty("point set"))?.len();
    if d == 0 {
        return Err(Error::Empty("point dimension"));
    }
    if m < d + 1 {
        return Err(Error::Degenerate(format!(
            "{m} points cannot span dimension {d}"
        )));
    }
    let k = d + 1;
    let kf = k as f64;
    let mut q = DMatrix::zeros(k, m);
    for (j, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        q.view_mut((0, j), (d, 1)).copy_from(p);
        q[(d, j)] = 1.0;
    }

    let mut u = DVector::from_element(m, 1.0 / m as f64);
    let mut x_inv = DMatrix::zeros(k, k);
    let mut g = DVector::zeros(m);
    let refresh =
        |u: &DVector<f64>, x_inv: &mut DMatrix<f64>, g: &mut DVector<f64>| -> Result<()> {
            let x = &q * DMatrix::from_diagonal(u) * q.transpose();
            let chol = spd_factor(&((&x + x.transpose()) * 0.5), "lifted scatter")
                .map_err(|_| Error::Degenerate("points are affinely dependent".into()))?;
            *x_inv = chol.inverse();
            let w = &*x_inv * &q;
            for j in 0..m {
                g[j] = q.column(j).dot(&w.column(j));
            }
            Ok(())
        };
    refresh(&u, &mut x_inv, &mut g)?;

    for it in 0..MVEE_MAX_ITER {
        let (jmax, kmax) = argmax(&g);
        let (jmin, kmin) = g.iter().enumerate().filter(|(j, _)| u[*j] > 0.0).fold(
            (0, f64::INFINITY),
            |b, (j, &v)| if v < b.1 { (j, v) } else { b },
        );
        let gap = (kmax - kf) / d as f64;
        if gap <= tol {
            return Ok(recover(points, &u, d, it));
        }
        let (j, kappa, tau) = if kmax - kf >= kf - kmin {
            (jmax, kmax, (kmax - kf) / (kf * (kmax - 1.0)))
        } else {
            let step = (kmin - kf) / (kf * (kmin - 1.0));
            let floor = -u[jmin] / (1.0 - u[jmin]);
            (jmin, kmin, step.max(floor))
        };
        // rank-one update of X⁻¹ for X' = (1−τ)X + τ q_j q_j'
        let w = &x_inv * q.column(j);
        let denom = 1.0 - tau + tau * kappa;
        let qw = q.transpose() * &w;
        x_inv = (&x_inv - (&w * w.transpose()) * (tau / denom)) / (1.0 - tau);
        for i in 0..m {
            g[i] = (g[i] - tau * qw[i] * qw[i] / denom) / (1.0 - tau);
        }
        u *= 1.0 - tau;
        u[j] += tau;
        if u[j] < 0.0 || (tau < 0.0 && u[j] < 1e-300) {
            u[j] = 0.0;
        }
        if (it + 1) % 200 == 0 || u[j] == 0.0 {
            let s = u.sum();
            u /= s;
            refresh(&u, &mut x_inv, &mut g)?;
        }
    }
    let (_, kmax) = argmax(&g);
    Err(Error::NonConvergence {
        solver: "mvee",
        iterations: MVEE_MAX_ITER,
        residual: (kmax - kf) / d as f64,
    })
}

fn argmax(g: &DVector<f64>) -> (usize, f64) {
    g.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |b, (j, &v)| if v > b.1 { (j, v) } else { b },
    )
}

fn recover(
    points: &[DVector<f64>],
    u: &DVector<f64>,
    d: usize,
    iterations: usize,
) -> EllipsoidResult {
    let mut c = DVector::zeros(d);
    for (p, w) in points.iter().zip(u.iter()) {
        c += p * *w;
    }
    let mut s = DMatrix::zeros(d, d);
    for (p, w) in points.iter().zip(u.iter()) {
        if *w > 0.0 {
            let r = p - &c;
            s += &r * r.transpose() * *w;
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let m = s
        .try_inverse()
        .map(|inv| inv / d as f64)
        .unwrap_or_else(|| DMatrix::from_element(d, d, f64::NAN));
    let m = (&m + m.transpose()) * 0.5;
    let gap = points
        .iter()
        .map(|p| {
            let r = p - &c;
            r.dot(&(&m * &r))
        })
        .fold(f64::NEG_INFINITY, f64::max)
        - 1.0;
    EllipsoidResult {
        m,
        center: c,
        iterations,
        gap,
    }
}

/// `{v : 0 <= Uv <= 1}` for a full-column-rank `U`.
#[derive(Debug, Clone)]
pub struct CoefficientPolytope {
    /// Distinct nonzero rows of `U`.
    rows: Vec<DVector<f64>>,
    d: usize,
    /// Vertices when enumeration was tractable.
    vertices: Option<Vec<DVector<f64>>>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl CoefficientPolytope {
    pub fn new(sub: &SubspaceSpec) -> Result<Self> {
        let u = sub.basis();
        let d = sub.d();
        let mut rows: Vec<DVector<f64>> = Vec::new();
        for r in u.row_iter() {
            let r = r.transpose();
            if r.iter().all(|v| *v == 0.0) || rows.contains(&r) {
                continue;
            }
            rows.push(r);
        }
        let systems = binomial(rows.len(), d).saturating_mul(1 << d);
        let vertices = if d <= 4 && systems <= VERTEX_ENUMERATION_LIMIT {
            Some(enumerate_vertices(&rows, d))
        } else {
            None
        };
        let (lower, upper) = match &vertices {
            Some(vs) if !vs.is_empty() => {
                let mut lo = vs[0].clone();
                let mut hi = vs[0].clone();
                for v in vs {
                    lo = lo.inf(v);
                    hi = hi.sup(v);
                }
                (lo, hi)
            }
            Some(_) => {
                return Err(Error::Degenerate(
                    "coefficient polytope has no vertices".into(),
                ))
            }
            None => {
                // |v_k| <= ‖row_k(U⁺)‖₁ because ‖Uv‖_∞ <= 1 on the polytope
                let pinv = u
                    .clone()
                    .pseudo_inverse(1e-12)
                    .map_err(|e| Error::Degenerate(e.to_string()))?;
                let r = DVector::from_fn(d, |k, _| pinv.row(k).iter().map(|v| v.abs()).sum());
                (-&r, r)
            }
        };
        Ok(Self {
            rows,
            d,
            vertices,
            lower,
            upper,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn vertices(&self) -> Option<&[DVector<f64>]> {
        self.vertices.as_deref()
    }

    /// A box containing the polytope.
    pub fn bounding_box(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.lower, &self.upper)
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.rows.iter().all(|a| {
            let t = a.dot(v);
            t >= -tol && t <= 1.0 + tol
        })
    }

    fn min_slack(&self, v: &DVector<f64>) -> (f64, DVector<f64>) {
        let mut best = (f64::INFINITY, DVector::zeros(self.d));
        for a in &self.rows {
            let t = a.dot(v);
            if t < best.0 {
                best = (t, a.clone());
            }
            if 1.0 - t < best.0 {
                best = (1.0 - t, -a);
            }
        }
        best
    }

    /// A point with strictly positive slack in every constraint.
    pub fn interior_point(&self) -> Result<DVector<f64>> {
        let mut v = (&self.lower + &self.upper) * 0.5;
        let mut best = v.clone();
        let mut best_s = self.min_slack(&v).0;
        for it in 0..20_000 {
            if best_s > 1e-6 {
                return Ok(best);
            }
            let (s, g) = self.min_slack(&v);
            if s > best_s {
                best_s = s;
                best = v.clone();
            }
            let gn = g.norm();
            if gn == 0.0 {
                break;
            }
            v += g * (0.1 / ((it + 1) as f64).sqrt() / gn);
        }
        if best_s > 0.0 {
            Ok(best)
        } else {
            Err(Error::Degenerate(
                "coefficient polytope has empty interior".into(),
            ))
        }
    }

    /// Boundary points from hit-and-run chords, two per chord.
    pub fn sample_boundary<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<DVector<f64>>> {
        let mut v = self.interior_point()?;
        let mut out = Vec::with_capacity(count + 1);
        while out.len() < count {
            let mut dir = DVector::from_fn(self.d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = dir.norm();
            if n == 0.0 {
                continue;
            }
            dir /= n;
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for a in &self.rows {
                let ad = a.dot(&dir);
                if ad.abs() < 1e-15 {
                    continue;
                }
                let av = a.dot(&v);
                let (t0, t1) = ((-av) / ad, (1.0 - av) / ad);
                let (a0, a1) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                lo = lo.max(a0);
                hi = hi.min(a1);
            }
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::Degenerate("unbounded or empty chord".into()));
            }
            out.push(&v + &dir * lo);
            out.push(&v + &dir * hi);
            v += &dir * rng.random_range(lo..hi);
        }
        out.truncate(count);
        Ok(out)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc: usize = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return usize::MAX,
        };
    }
    acc
}

fn enumerate_vertices(rows: &[DVector<f64>], d: usize) -> Vec<DVector<f64>> {
    let m = rows.len();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    if m < d {
        return out;
    }
    loop {
        let a = DMatrix::from_fn(d, d, |i, j| rows[idx[i]][j]);
        if let Some(lu) = Some(a.lu()).filter(|lu| lu.determinant().abs() > 1e-12) {
            for mask in 0..(1u32 << d) {
                let b = DVector::from_fn(d, |i, _| f64::from((mask >> i) & 1));
                if let Some(v) = lu.solve(&b) {
                    let feasible = rows.iter().all(|r| {
                        let t = r.dot(&v);
                        (-1e-9..=1.0 + 1e-9).contains(&t)
                    });
                    if feasible && !out.iter().any(|w| (w - &v).amax() < 1e-9) {
                        out.push(v);
                    }
                }
            }
        }
        // next combination
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < m - d + i {
                idx[i] += 1;
                for j in i + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `H` together with the ellipsoid it was built from.
#[derive(Debug, Clone)]
pub struct LowRankGeometry {
    pub h: DMatrix<f64>,
    pub ellipsoid: EllipsoidResult,
    pub points_used: usize,
}

/// `H = I_N + U M⁻¹ U'`, where `{v : v'Mv <= 1}` is the minimum-volume
/// ellipsoid of the coefficient polytope symmetrized about the origin.
///
/// With this orientation every loss `Uv` has `‖Uv‖_{H⁻¹} <= 1`.
pub fn build_h<R: Rng + ?Sized>(
    subspace: &SubspaceSpec,
    sample_count: usize,
    tol: f64,
    rng: &mut R,
) -> Result<LowRankGeometry> {
    let (n, d) = (subspace.n(), subspace.d());
    if d > MAX_RANK || n > MAX_DIM {
        return Err(Error::param(format!(
            "low-rank geometry is limited to d <= {MAX_RANK}, N <= {MAX_DIM} (got d={d}, N={n})"
        )));
    }
    let poly = CoefficientPolytope::new(subspace)?;
    let pts = match poly.vertices() {
        Some(v) => v.to_vec(),
        None => poly.sample_boundary(sample_count.max(2 * (d + 1)), rng)?,
    };
    let mut sym = Vec::with_capacity(2 * pts.len());
    for p in &pts {
        if p.iter().any(|x| *x != 0.0) {
            sym.push(p.clone());
            sym.push(-p);
        }
    }
    let ell = mvee(&sym, tol)?;
    let shape = ell
        .m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("ellipsoid matrix is singular".into()))?;
    let u = subspace.basis();
    let mut h = u * shape * u.transpose();
    h = (&h + h.transpose()) * 0.5;
    for i in 0..n {
        h[(i, i)] += 1.0;
    }
    Ok(LowRankGeometry {
        h,
        ellipsoid: ell,
        points_used: sym.len(),
    })
}
