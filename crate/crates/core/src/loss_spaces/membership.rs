use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{LossSpace, LowRankSpace, SphericalSpace};
use crate::error::{check_dim, Result};
use crate::experts::LossVector;

/// Alternating-projection rounds before an additive test gives up.
pub const ADDITIVE_MAX_ITER: usize = 10_000;
const DYKSTRA_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Yes,
    No,
    /// The iteration cap was reached without a decision.
    Indeterminate,
}

impl Membership {
    pub fn is_yes(self) -> bool {
        self == Membership::Yes
    }
}

impl From<bool> for Membership {
    fn from(b: bool) -> Self {
        if b {
            Membership::Yes
        } else {
            Membership::No
        }
    }
}

impl LossSpace {
    /// Tests `l ∈ L` up to `tol`. Additive spaces search for a decomposition
    /// by alternating projections and may return `Indeterminate`.
    pub fn member(&self, l: &LossVector, tol: f64) -> Result<Membership> {
        check_dim(self.dim(), l.dim())?;
        let x = l.entries();
        match self {
            LossSpace::Additive(..) => Ok(additive_member(&self.leaves(), x, tol)),
            leaf => Ok(leaf_member(leaf, x, tol).into()),
        }
    }
}

fn in_box(x: &DVector<f64>, tol: f64) -> bool {
    x.iter().all(|v| *v >= -tol && *v <= 1.0 + tol)
}

fn leaf_member(leaf: &LossSpace, x: &DVector<f64>, tol: f64) -> bool {
    if !in_box(x, tol) {
        return false;
    }
    match leaf {
        LossSpace::Standard { .. } => true,
        LossSpace::Sparse { s, .. } => x.iter().filter(|v| v.abs() > tol).count() <= *s,
        LossSpace::Noisy { eps, .. } => x.norm_squared() <= eps + tol,
        LossSpace::Spherical(sp) => x.dot(&(&sp.a * x)) <= sp.eps + tol,
        LossSpace::LowRank(lr) => lowrank_residual(lr, x) <= tol,
        LossSpace::Additive(..) => unreachable!("leaf expected"),
    }
}

fn lowrank_residual(lr: &LowRankSpace, x: &DVector<f64>) -> f64 {
    let proj = &lr.q * (lr.q.transpose() * x);
    (x - proj).norm()
}

fn clip(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| v.clamp(0.0, 1.0))
}

/// Projection onto `[0,1]^N ∩ {‖y‖² <= ε}`: `y = clip(x/(1+λ))` with the
/// smallest feasible `λ >= 0`.
fn project_box_ball(x: &DVector<f64>, eps: f64) -> DVector<f64> {
    let y0 = clip(x);
    if y0.norm_squared() <= eps {
        return y0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while clip(&(x / (1.0 + hi))).norm_squared() > eps {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if clip(&(x / (1.0 + mid))).norm_squared() > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(&(x / (1.0 + hi)))
}

/// Projection onto `{y'Ay <= ε}` in the eigenbasis of `A`.
fn project_ellipsoid(sp: &SphericalSpace, x: &DVector<f64>) -> DVector<f64> {
    if x.dot(&(&sp.a * x)) <= sp.eps {
        return x.clone();
    }
    let z = sp.eigvecs.transpose() * x;
    let lam = &sp.eigvals;
    let val = |mu: f64| -> f64 {
        z.iter()
            .zip(lam.iter())
            .map(|(zi, li)| li * (zi / (1.0 + mu * li)).powi(2))
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while val(hi) > sp.eps {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if val(mid) > sp.eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = DVector::from_fn(z.len(), |i, _| z[i] / (1.0 + hi * lam[i]));
    &sp.eigvecs * y
}

/// Dykstra's algorithm for the projection onto the intersection of two
/// convex sets.
fn dykstra(
    x: &DVector<f64>,
    pa: impl Fn(&DVector<f64>) -> DVector<f64>,
    pb: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> DVector<f64> {
    let mut y = x.clone();
    let mut p = DVector::zeros(x.len());
    let mut q = DVector::zeros(x.len());
    for _ in 0..DYKSTRA_ITER {
        let a = pa(&(&y + &p));
        p = &y + &p - &a;
        let b = pb(&(&a + &q));
        q = &a + &q - &b;
        let moved = (&b - &y).amax();
        y = b;
        if moved < 1e-15 {
            break;
        }
    }
    y
}

fn project_leaf(leaf: &LossSpace, x: &DVector<f64>) -> DVector<f64> {
    match leaf {
        LossSpace::Standard { .. } => clip(x),
        LossSpace::Sparse { s, .. } => {
            // keep the s coordinates whose clipped value buys the most
            let c = clip(x);
            let mut gain: Vec<(f64, usize)> = (0..x.len())
                .map(|i| (x[i] * x[i] - (x[i] - c[i]).powi(2), i))
                .collect();
            gain.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut y = DVector::zeros(x.len());
            for &(_, i) in gain.iter().take(*s) {
                y[i] = c[i];
            }
            y
        }
        LossSpace::Noisy { eps, .. } => project_box_ball(x, *eps),
        LossSpace::Spherical(sp) => dykstra(x, clip, |y| project_ellipsoid(sp, y)),
        LossSpace::LowRank(lr) => dykstra(x, clip, |y| &lr.q * (lr.q.transpose() * y)),
        LossSpace::Additive(..) => unreachable!("leaf expected"),
    }
}

/// Searches for `l = Σ_j l_j` with `l_j ∈ L_j`.
fn additive_member(leaves: &[&LossSpace], l: &DVector<f64>, tol: f64) -> Membership {
    let k = leaves.len();
    // every leaf lies in [0,1]^N
    if l.iter().any(|v| *v < -tol || *v > k as f64 + tol) {
        return Membership::No;
    }
    let convex = leaves
        .iter()
        .all(|s| !matches!(s, LossSpace::Sparse { .. }));
    let mut parts: Vec<DVector<f64>> = vec![l / k as f64; k];
    let mut prev = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..ADDITIVE_MAX_ITER {
        for (p, leaf) in parts.iter_mut().zip(leaves) {
            *p = project_leaf(leaf, p);
        }
        let mut sum = DVector::zeros(l.len());
        for p in &parts {
            sum += p;
        }
        let resid = l - sum;
        let r = resid.norm();
        if r <= tol
            && parts
                .iter()
                .zip(leaves)
                .all(|(p, s)| leaf_member(s, p, tol))
        {
            return Membership::Yes;
        }
        // for convex leaves the residual decreases monotonically toward the
        // distance between the two sets; a flat positive residual is a gap
        if convex && r >= prev * (1.0 - 1e-9) {
            stalled += 1;
            if stalled >= 50 && r > 10.0 * tol {
                return Membership::No;
            }
        } else {
            stalled = 0;
        }
        prev = r;
        let share = resid / k as f64;
        for p in parts.iter_mut() {
            *p += &share;
        }
    }
    Membership::Indeterminate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_spaces::{sample, sample_with_witness, SequenceSampler};
    use crate::lowrank_geometry::SubspaceSpec;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lv(x: &[f64]) -> LossVector {
        LossVector::from_slice(x).unwrap()
    }

    fn spaces(n: usize, rng: &mut ChaCha8Rng) -> Vec<LossSpace> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &g * g.transpose() + DMatrix::identity(n, n);
        let lr =
            LossSpace::low_rank(SubspaceSpec::random_nonnegative(n, 2, rng).unwrap(), 1).unwrap();
        vec![
            LossSpace::standard(n).unwrap(),
            LossSpace::sparse(n, 3).unwrap(),
            LossSpace::noisy(n, 0.5).unwrap(),
            LossSpace::noisy(n, 4.0).unwrap(),
            LossSpace::spherical(a, 0.8).unwrap(),
            lr,
        ]
    }

    #[test]
    fn origin_belongs_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = LossVector::zeros(6);
        for s in spaces(6, &mut rng) {
            assert_eq!(
                s.member(&z, 1e-12).unwrap(),
                Membership::Yes,
                "{}",
                s.describe()
            );
        }
        let add = LossSpace::additive(
            LossSpace::sparse(6, 1).unwrap(),
            LossSpace::noisy(6, 0.1).unwrap(),
        )
        .unwrap();
        assert_eq!(add.member(&z, 1e-12).unwrap(), Membership::Yes);
    }

    #[test]
    fn support_counting() {
        let s = LossSpace::sparse(3, 1).unwrap();
        assert!(s.member(&lv(&[1.0, 0.0, 0.0]), 1e-12).unwrap().is_yes());
        assert_eq!(
            s.member(&lv(&[1.0, 1.0, 0.0]), 1e-12).unwrap(),
            Membership::No
        );
        assert_eq!(
            s.member(&lv(&[1.5, 0.0, 0.0]), 1e-12).unwrap(),
            Membership::No
        );
    }

    #[test]
    fn lowrank_residual_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sub = SubspaceSpec::random_nonnegative(7, 2, &mut rng).unwrap();
        let sp = LossSpace::low_rank(sub.clone(), 0).unwrap();
        let v = DVector::from_vec(vec![0.3, 0.6]);
        let l = LossVector::new(sub.basis() * v).unwrap();
        assert!(sp.member(&l, 1e-8).unwrap().is_yes());
        let mut off = l.entries().clone();
        off[0] += 0.05;
        assert_eq!(
            sp.member(&LossVector::new(off).unwrap(), 1e-8).unwrap(),
            Membership::No
        );
    }

    #[test]
    fn samples_are_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [4usize, 16] {
            for s in spaces(n, &mut rng) {
                for _ in 0..10_000 {
                    let l = sample(&s, &mut rng).unwrap();
                    assert!(
                        s.member(&l, 1e-9).unwrap().is_yes(),
                        "{} {}",
                        s.describe(),
                        l.entries()
                    );
                }
                let seq = SequenceSampler::new(&s, &mut rng).unwrap();
                for _ in 0..1_000 {
                    let l = seq.next(&mut rng).unwrap();
                    assert!(s.member(&l, 1e-9).unwrap().is_yes());
                }
            }
        }
    }

    #[test]
    fn noisy_norm_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = LossSpace::noisy(10, 0.3).unwrap();
        for _ in 0..1000 {
            assert!(sample(&s, &mut rng).unwrap().entries().norm_squared() <= 0.3 + 1e-12);
        }
        let full = LossSpace::sparse(5, 5).unwrap();
        let l = sample(&full, &mut rng).unwrap();
        assert!(l.entries().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn additive_witness_and_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 8;
        let lr = LossSpace::low_rank(SubspaceSpec::random_nonnegative(n, 2, &mut rng).unwrap(), 0)
            .unwrap();
        let pairs = [
            (
                LossSpace::sparse(n, 3).unwrap(),
                LossSpace::noisy(n, 0.5).unwrap(),
            ),
            (lr.clone(), LossSpace::noisy(n, 0.5).unwrap()),
            (lr, LossSpace::sparse(n, 3).unwrap()),
        ];
        for (a, b) in pairs {
            let sp = LossSpace::additive(a.clone(), b.clone()).unwrap();
            let leaves = [a, b];
            let mut yes = 0;
            for _ in 0..200 {
                let (l, parts) = sample_with_witness(&sp, &mut rng).unwrap();
                for (p, leaf) in parts.iter().zip(&leaves) {
                    assert!(leaf.member(p, 1e-9).unwrap().is_yes());
                }
                let m = sp.member(&l, 1e-9).unwrap();
                assert_ne!(m, Membership::No, "{}", sp.describe());
                yes += m.is_yes() as usize;
            }
            assert!(yes > 0, "{}", sp.describe());
        }
    }

    #[test]
    fn additive_rejects_outside_points() {
        let n = 5;
        let sp = LossSpace::additive(
            LossSpace::noisy(n, 0.1).unwrap(),
            LossSpace::noisy(n, 0.1).unwrap(),
        )
        .unwrap();
        // sum of two ‖·‖² <= 0.1 balls has radius 2√0.1 ≈ 0.632
        assert_eq!(
            sp.member(&lv(&[0.7, 0.0, 0.0, 0.0, 0.0]), 1e-9).unwrap(),
            Membership::No
        );
        assert!(sp
            .member(&lv(&[0.6, 0.0, 0.0, 0.0, 0.0]), 1e-9)
            .unwrap()
            .is_yes());
        assert_eq!(
            sp.member(&lv(&[-0.5, 0.0, 0.0, 0.0, 0.0]), 1e-9).unwrap(),
            Membership::No
        );
    }
}
