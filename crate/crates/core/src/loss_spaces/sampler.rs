use nalgebra::DVector;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{LossSpace, LowRankSpace, SphericalSpace};
use crate::error::{Error, Result};
use crate::experts::{LossSequence, LossVector};

pub const REJECTION_CAP: usize = 100_000;

/// Range of the per-expert tilt drawn for each sequence.
const TILT_RANGE: (f64, f64) = (0.2, 1.0);

/// Per-sequence structure for one leaf space.
#[derive(Debug, Clone)]
enum Tilt {
    /// Per-expert scale applied to values or directions.
    Scale(DVector<f64>),
    /// Anchor coefficient; rounds draw `v = (anchor + v')/2`.
    Anchor(DVector<f64>),
}

/// Draws i.i.d. losses from a space, untilted.
pub fn sample<R: Rng + ?Sized>(space: &LossSpace, rng: &mut R) -> Result<LossVector> {
    Ok(sample_with_witness(space, rng)?.0)
}

/// A draw together with its per-leaf parts.
pub fn sample_with_witness<R: Rng + ?Sized>(
    space: &LossSpace,
    rng: &mut R,
) -> Result<(LossVector, Vec<LossVector>)> {
    let parts = space
        .leaves()
        .into_iter()
        .map(|leaf| draw_leaf(leaf, None, rng))
        .collect::<Result<Vec<_>>>()?;
    assemble(space.dim(), parts)
}

fn assemble(n: usize, parts: Vec<DVector<f64>>) -> Result<(LossVector, Vec<LossVector>)> {
    let mut total = DVector::zeros(n);
    for p in &parts {
        total += p;
    }
    let parts = parts
        .into_iter()
        .map(LossVector::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((LossVector::new(total)?, parts))
}

/// Samples whole loss sequences. Each sequence first draws a fixed tilt per
/// leaf so that experts differ systematically over the horizon; every round
/// is still a member of the space.
#[derive(Debug, Clone)]
pub struct SequenceSampler<'s> {
    space: &'s LossSpace,
    tilts: Vec<Tilt>,
}

impl<'s> SequenceSampler<'s> {
    pub fn new<R: Rng + ?Sized>(space: &'s LossSpace, rng: &mut R) -> Result<Self> {
        let n = space.dim();
        let tilts = space
            .leaves()
            .into_iter()
            .map(|leaf| match leaf {
                LossSpace::LowRank(lr) => Ok(Tilt::Anchor(coefficient_sample(lr, rng)?)),
                _ => Ok(Tilt::Scale(DVector::from_fn(n, |_, _| {
                    rng.random_range(TILT_RANGE.0..=TILT_RANGE.1)
                }))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, tilts })
    }

    pub fn next_with_witness<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(LossVector, Vec<LossVector>)> {
        let parts = self
            .space
            .leaves()
            .into_iter()
            .zip(&self.tilts)
            .map(|(leaf, tilt)| draw_leaf(leaf, Some(tilt), rng))
            .collect::<Result<Vec<_>>>()?;
        assemble(self.space.dim(), parts)
    }

    pub fn next<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LossVector> {
        Ok(self.next_with_witness(rng)?.0)
    }

    pub fn sequence<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<LossSequence> {
        LossSequence::new((0..t).map(|_| self.next(rng)).collect::<Result<_>>()?)
    }
}

fn draw_leaf<R: Rng + ?Sized>(
    leaf: &LossSpace,
    tilt: Option<&Tilt>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = leaf.dim();
    let scale = |i: usize| match tilt {
        Some(Tilt::Scale(w)) => w[i],
        _ => 1.0,
    };
    Ok(match leaf {
        LossSpace::Standard { .. } => DVector::from_fn(n, |i, _| rng.random::<f64>() * scale(i)),
        LossSpace::Sparse { s, .. } => {
            let mut l = DVector::zeros(n);
            for i in index::sample(rng, n, *s) {
                l[i] = rng.random::<f64>() * scale(i);
            }
            l
        }
        LossSpace::Noisy { eps, .. } => {
            let dir = half_normal_direction(n, &scale, rng);
            let norm = dir.norm();
            let r = eps.sqrt() * rng.random::<f64>();
            fit_unit_box(dir * (r / norm))
        }
        LossSpace::Spherical(sp) => spherical(sp, &scale, rng),
        LossSpace::LowRank(lr) => {
            let mut v = coefficient_sample(lr, rng)?;
            if let Some(Tilt::Anchor(a)) = tilt {
                v = (a + v) * 0.5;
            }
            let l = lr.subspace.basis() * v;
            // rounding can push an entry a hair outside the box
            l.map(|x| x.clamp(0.0, 1.0))
        }
        LossSpace::Additive(..) => unreachable!("leaves are not additive"),
    })
}

fn half_normal_direction<R: Rng + ?Sized>(
    n: usize,
    scale: &dyn Fn(usize) -> f64,
    rng: &mut R,
) -> DVector<f64> {
    loop {
        let d = DVector::from_fn(n, |i, _| {
            rng.sample::<f64, _>(StandardNormal).abs() * scale(i)
        });
        if d.amax() > 0.0 {
            return d;
        }
    }
}

fn spherical<R: Rng + ?Sized>(
    sp: &SphericalSpace,
    scale: &dyn Fn(usize) -> f64,
    rng: &mut R,
) -> DVector<f64> {
    let n = sp.a.nrows();
    let dir = half_normal_direction(n, scale, rng);
    let an = dir.dot(&(&sp.a * &dir)).sqrt();
    let r = sp.eps.sqrt() * rng.random::<f64>();
    fit_unit_box(dir * (r / an))
}

/// Shrinks a nonnegative vector toward the origin until it fits `[0,1]^N`;
/// every quadratic-form constraint is preserved.
fn fit_unit_box(l: DVector<f64>) -> DVector<f64> {
    let m = l.max();
    if m > 1.0 {
        l / m
    } else {
        l
    }
}

/// Uniform draw from the coefficient polytope by box rejection.
pub(super) fn coefficient_sample<R: Rng + ?Sized>(
    lr: &LowRankSpace,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (lo, hi) = lr.polytope.bounding_box();
    let d = lo.len();
    for _ in 0..REJECTION_CAP {
        let v = DVector::from_fn(d, |i, _| {
            if hi[i] > lo[i] {
                rng.random_range(lo[i]..hi[i])
            } else {
                lo[i]
            }
        });
        if lr.polytope.contains(&v, 0.0) {
            return Ok(v);
        }
    }
    Err(Error::SamplingExhausted(REJECTION_CAP))
}
