//! Structured loss spaces: sampling, membership, matched regularizers and
//! closed-form regret bounds, plus the hypercube lower-bound adversary.

pub mod adversary;
mod membership;
mod sampler;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::spd_factor;
use crate::lowrank_geometry::{
    build_h, CoefficientPolytope, LowRankGeometry, SubspaceSpec, DEFAULT_MVEE_TOL,
};
use crate::regularizers::{compose, make_qnorm_for_sparsity, Regularizer};

pub use adversary::{expected_block_deviation, lower_bound_value, AdversaryState};
pub use membership::Membership;
pub use sampler::{sample, sample_with_witness, SequenceSampler};

/// Boundary samples used for the low-rank geometry when the coefficient
/// polytope is too large to enumerate.
pub const LOWRANK_SAMPLE_COUNT: usize = 2_000;

/// `{l in [0,1]^N : l'Al <= ε}` with cached spectral data of `A`.
#[derive(Debug)]
pub struct SphericalSpace {
    pub a: DMatrix<f64>,
    pub eps: f64,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

impl SphericalSpace {
    /// `λ_max(A⁻¹)`.
    pub fn lambda_max_inverse(&self) -> f64 {
        1.0 / self.eigvals.min()
    }
}

/// `{Uv in [0,1]^N}` with its coefficient polytope and quadratic geometry.
#[derive(Debug)]
pub struct LowRankSpace {
    pub subspace: SubspaceSpec,
    pub polytope: CoefficientPolytope,
    pub geometry: LowRankGeometry,
    /// Orthonormal basis of `span(U)`.
    q: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub enum LossSpace {
    Standard {
        n: usize,
    },
    /// At most `s` nonzero entries.
    Sparse {
        n: usize,
        s: usize,
    },
    Spherical(Arc<SphericalSpace>),
    /// `‖l‖² <= ε`.
    Noisy {
        n: usize,
        eps: f64,
    },
    LowRank(Arc<LowRankSpace>),
    Additive(Box<LossSpace>, Box<LossSpace>),
}

impl LossSpace {
    pub fn standard(n: usize) -> Result<Self> {
        nonzero(n)?;
        Ok(LossSpace::Standard { n })
    }

    pub fn sparse(n: usize, s: usize) -> Result<Self> {
        nonzero(n)?;
        if s < 1 || s > n {
            return Err(Error::param(format!(
                "sparsity must be in [1, {n}], got {s}"
            )));
        }
        Ok(LossSpace::Sparse { n, s })
    }

    pub fn noisy(n: usize, eps: f64) -> Result<Self> {
        nonzero(n)?;
        positive_eps(eps)?;
        Ok(LossSpace::Noisy { n, eps })
    }

    pub fn spherical(a: DMatrix<f64>, eps: f64) -> Result<Self> {
        positive_eps(eps)?;
        nonzero(a.nrows())?;
        spd_factor(&a, "A")?;
        let eig = a.clone().symmetric_eigen();
        Ok(LossSpace::Spherical(Arc::new(SphericalSpace {
            a,
            eps,
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues,
        })))
    }

    /// Low-rank space; `seed` drives boundary sampling of the geometry when
    /// vertex enumeration is out of reach.
    pub fn low_rank(subspace: SubspaceSpec, seed: u64) -> Result<Self> {
        let polytope = CoefficientPolytope::new(&subspace)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geometry = build_h(&subspace, LOWRANK_SAMPLE_COUNT, DEFAULT_MVEE_TOL, &mut rng)?;
        let q = subspace.basis().clone().qr().q();
        Ok(LossSpace::LowRank(Arc::new(LowRankSpace {
            subspace,
            polytope,
            geometry,
            q,
        })))
    }

    pub fn additive(left: LossSpace, right: LossSpace) -> Result<Self> {
        check_dim(left.dim(), right.dim())?;
        Ok(LossSpace::Additive(Box::new(left), Box::new(right)))
    }

    pub fn dim(&self) -> usize {
        match self {
            LossSpace::Standard { n }
            | LossSpace::Sparse { n, .. }
            | LossSpace::Noisy { n, .. } => *n,
            LossSpace::Spherical(s) => s.a.nrows(),
            LossSpace::LowRank(l) => l.subspace.n(),
            LossSpace::Additive(l, _) => l.dim(),
        }
    }

    /// Non-additive components, left to right.
    pub fn leaves(&self) -> Vec<&LossSpace> {
        match self {
            LossSpace::Additive(l, r) => {
                let mut v = l.leaves();
                v.extend(r.leaves());
                v
            }
            leaf => vec![leaf],
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LossSpace::Standard { .. } => "standard".into(),
            LossSpace::Sparse { s, .. } => format!("sparse(s={s})"),
            LossSpace::Spherical(sp) => format!("spherical(eps={})", sp.eps),
            LossSpace::Noisy { eps, .. } => format!("noisy(eps={eps})"),
            LossSpace::LowRank(l) => format!("lowrank(d={})", l.subspace.d()),
            LossSpace::Additive(l, r) => format!("{}+{}", l.describe(), r.describe()),
        }
    }

    /// Regularizer matched to the space.
    pub fn recipe(&self) -> Result<Regularizer> {
        let n = self.dim();
        match self {
            LossSpace::Standard { .. } => Regularizer::neg_entropy(n),
            LossSpace::Sparse { s, .. } => make_qnorm_for_sparsity(*s, n),
            LossSpace::Spherical(sp) => Regularizer::ellipsoidal_quadratic(sp.a.clone(), sp.eps),
            LossSpace::Noisy { eps, .. } => Regularizer::scaled_euclidean(*eps, n),
            LossSpace::LowRank(l) => {
                Regularizer::low_rank_quadratic(l.geometry.h.clone(), l.subspace.d())
            }
            LossSpace::Additive(l, r) => compose(l.recipe()?, r.recipe()?),
        }
    }

    /// `c` such that the closed-form regret bound at horizon `T` is `c·√T`.
    pub fn bound_constant(&self) -> Result<f64> {
        let n = self.dim() as f64;
        Ok(match self {
            LossSpace::Standard { .. } => (2.0 * n.ln()).sqrt(),
            LossSpace::Sparse { s, .. } => 2.0 * ((*s as f64 + 1.0).ln()).sqrt(),
            LossSpace::Spherical(sp) => (sp.lambda_max_inverse() * sp.eps).sqrt(),
            LossSpace::Noisy { eps, .. } => eps.sqrt(),
            LossSpace::LowRank(l) => 4.0 * (l.subspace.d() as f64).sqrt(),
            LossSpace::Additive(a, b) => match (a.as_ref(), b.as_ref()) {
                (LossSpace::LowRank(l), LossSpace::Noisy { eps, .. })
                | (LossSpace::Noisy { eps, .. }, LossSpace::LowRank(l)) => {
                    (2.0 * (16.0 * l.subspace.d() as f64 + eps)).sqrt()
                }
                (LossSpace::Sparse { s, .. }, LossSpace::Noisy { eps, .. })
                | (LossSpace::Noisy { eps, .. }, LossSpace::Sparse { s, .. }) => {
                    2.0 * (2.0 * (1.0 + eps) * (*s as f64 + 1.0).ln()).sqrt()
                }
                (LossSpace::LowRank(l), LossSpace::Sparse { s, .. })
                | (LossSpace::Sparse { s, .. }, LossSpace::LowRank(l)) => {
                    2.0 * (2.0 * (16.0 * l.subspace.d() as f64 + 1.0) * (*s as f64 + 1.0).ln())
                        .sqrt()
                }
                _ => {
                    let c = self.recipe()?;
                    c.certificate().regret_bound(1)
                }
            },
        })
    }

    pub fn is_catalog_pair(&self) -> bool {
        matches!(
            self,
            LossSpace::Additive(a, b) if matches!(
                (a.as_ref(), b.as_ref()),
                (LossSpace::LowRank(_), LossSpace::Noisy { .. })
                    | (LossSpace::Noisy { .. }, LossSpace::LowRank(_))
                    | (LossSpace::Sparse { .. }, LossSpace::Noisy { .. })
                    | (LossSpace::Noisy { .. }, LossSpace::Sparse { .. })
                    | (LossSpace::LowRank(_), LossSpace::Sparse { .. })
                    | (LossSpace::Sparse { .. }, LossSpace::LowRank(_))
            )
        )
    }
}

/// Closed-form regret bound at horizon `T` and the regularizer achieving it.
pub fn theoretical_bound(space: &LossSpace, t: usize) -> Result<(f64, Regularizer)> {
    if t == 0 {
        return Err(Error::param("horizon must be at least 1"));
    }
    Ok((space.bound_constant()? * (t as f64).sqrt(), space.recipe()?))
}

fn nonzero(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("loss space dimension"));
    }
    Ok(())
}

fn positive_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}
