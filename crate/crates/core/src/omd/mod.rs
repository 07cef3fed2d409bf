//! The mirror-descent learner and the exponential-weights baseline.

pub mod solver;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::experts::{
    regret_of, validate_simplex_vec, LossSequence, LossVector, RegretReport, SimplexPoint,
};
use crate::regularizers::{Certificate, Regularizer, RegularizerKind};

/// Learner state after `round − 1` observed losses.
#[derive(Debug, Clone)]
pub struct OmdState<'r> {
    pub current: SimplexPoint,
    pub regularizer: &'r Regularizer,
    pub eta: f64,
    pub round: usize,
    pub cumulative_loss: f64,
}

/// One proximal step: `argmin_p η l·p + B_R(p, anchor)` over the simplex.
#[derive(Debug, Clone, Copy)]
pub struct BregmanQuery<'a> {
    pub regularizer: &'a Regularizer,
    pub anchor: &'a SimplexPoint,
    pub loss: &'a LossVector,
    pub eta: f64,
}

impl BregmanQuery<'_> {
    pub fn solve(&self) -> Result<SimplexPoint> {
        let n = self.regularizer.dim();
        check_dim(n, self.anchor.dim())?;
        check_dim(n, self.loss.dim())?;
        let p = self.anchor.weights();
        let l = self.loss.entries();
        let next = match self.regularizer.kind() {
            // multiplicative form; also valid on the boundary of the simplex
            RegularizerKind::NegEntropy => {
                let z = p.zip_map(l, |pi, li| {
                    if pi > 0.0 {
                        pi.ln() - self.eta * li
                    } else {
                        f64::NEG_INFINITY
                    }
                });
                solver::softmax(&z)
            }
            _ => {
                let theta = self.regularizer.gradient(p)? - l * self.eta;
                solver::argmin_tilted(self.regularizer, &theta, p)?
            }
        };
        finish(next)
    }
}

fn finish(x: DVector<f64>) -> Result<SimplexPoint> {
    validate_simplex_vec(x).map_err(|e| Error::NonConvergence {
        solver: "proximal step",
        iterations: 0,
        residual: match e {
            Error::InvalidSimplex(_) => f64::NAN,
            _ => f64::INFINITY,
        },
    })
}

/// `argmin_{p in Δ} R(p)`.
pub fn initial_point(reg: &Regularizer) -> Result<SimplexPoint> {
    let n = reg.dim();
    if reg.is_permutation_symmetric() {
        return SimplexPoint::uniform(n);
    }
    let uniform = DVector::from_element(n, 1.0 / n as f64);
    finish(solver::argmin_tilted(reg, &DVector::zeros(n), &uniform)?)
}

pub fn init(reg: &Regularizer, eta: f64) -> Result<OmdState<'_>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param(format!(
            "learning rate must be positive, got {eta}"
        )));
    }
    Ok(OmdState {
        current: initial_point(reg)?,
        regularizer: reg,
        eta,
        round: 1,
        cumulative_loss: 0.0,
    })
}

/// `η* = (D/G)·√(2α/T)`.
pub fn optimal_rate(cert: &Certificate, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::param("horizon must be at least 1"));
    }
    Ok(cert.d() / cert.g * (2.0 * cert.alpha / t as f64).sqrt())
}

impl<'r> OmdState<'r> {
    pub fn step(&self, loss: &LossVector) -> Result<OmdState<'r>> {
        let next = BregmanQuery {
            regularizer: self.regularizer,
            anchor: &self.current,
            loss,
            eta: self.eta,
        }
        .solve()?;
        Ok(OmdState {
            cumulative_loss: self.cumulative_loss + self.current.dot(loss),
            current: next,
            regularizer: self.regularizer,
            eta: self.eta,
            round: self.round + 1,
        })
    }
}

/// Plays `seq` from the initial point; `decisions[t]` is chosen before
/// `seq[t]` is revealed.
pub fn run(
    reg: &Regularizer,
    eta: f64,
    seq: &LossSequence,
) -> Result<(Vec<SimplexPoint>, RegretReport)> {
    check_dim(reg.dim(), seq.dim())?;
    let mut state = init(reg, eta)?;
    let mut decisions = Vec::with_capacity(seq.horizon());
    for l in seq.rounds() {
        decisions.push(state.current.clone());
        state = state.step(l)?;
    }
    let report = regret_of(&decisions, seq)?;
    Ok((decisions, report))
}

/// Exponential weights: `p_t ∝ exp(−η Σ_{s<t} l_s)`.
pub fn hedge(eta: f64, seq: &LossSequence) -> Result<(Vec<SimplexPoint>, RegretReport)> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::param(format!(
            "learning rate must be nonnegative, got {eta}"
        )));
    }
    let n = seq.dim();
    let mut cum = DVector::zeros(n);
    let mut decisions = Vec::with_capacity(seq.horizon());
    for l in seq.rounds() {
        decisions.push(validate_simplex_vec(solver::softmax(&(&cum * -eta)))?);
        cum += l.entries();
    }
    let report = regret_of(&decisions, seq)?;
    Ok((decisions, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::compose;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, n: usize, t: usize) -> LossSequence {
        LossSequence::new(
            (0..t)
                .map(|_| LossVector::new(DVector::from_fn(n, |_, _| rng.random::<f64>())).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn multiplicative_hand_case() {
        let r = Regularizer::neg_entropy(2).unwrap();
        let s = init(&r, 2f64.ln()).unwrap();
        let next = s
            .step(&LossVector::from_slice(&[1.0, 0.0]).unwrap())
            .unwrap();
        assert!((next.current.weights()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((next.current.weights()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(next.round, 2);
        assert_eq!(next.cumulative_loss, 0.5);
    }

    #[test]
    fn zero_loss_keeps_point() {
        let n = 4;
        let regs = [
            Regularizer::neg_entropy(n).unwrap(),
            Regularizer::scaled_euclidean(0.3, n).unwrap(),
            Regularizer::squared_q_norm(1.5, n).unwrap(),
            compose(
                Regularizer::squared_q_norm(1.5, n).unwrap(),
                Regularizer::scaled_euclidean(0.3, n).unwrap(),
            )
            .unwrap(),
        ];
        let anchor = crate::validate_simplex(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        for r in &regs {
            let p = BregmanQuery {
                regularizer: r,
                anchor: &anchor,
                loss: &LossVector::zeros(n),
                eta: 0.7,
            }
            .solve()
            .unwrap();
            assert!(
                (p.weights() - anchor.weights()).amax() < 1e-8,
                "{}",
                r.describe()
            );
        }
    }

    #[test]
    fn initial_points() {
        assert_eq!(
            initial_point(&Regularizer::neg_entropy(5).unwrap()).unwrap(),
            SimplexPoint::uniform(5).unwrap()
        );
        assert_eq!(
            initial_point(&Regularizer::scaled_euclidean(2.0, 7).unwrap()).unwrap(),
            SimplexPoint::uniform(7).unwrap()
        );
        // R(p) = p₁² + 4p₂² written as x'A⁻¹x with A = diag(1, 1/4)
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25]));
        let r = Regularizer::ellipsoidal_quadratic(a, 1.0).unwrap();
        let p = initial_point(&r).unwrap();
        assert!((p.weights()[0] - 0.8).abs() < 1e-12);
        assert!((p.weights()[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rates() {
        let c = Regularizer::neg_entropy(10).unwrap();
        let eta = optimal_rate(c.certificate(), 400).unwrap();
        assert!((eta - (2.0 * 10f64.ln() / 400.0).sqrt()).abs() < 1e-15);
        let lr = Regularizer::low_rank_quadratic(DMatrix::identity(6, 6), 2).unwrap();
        let comp = compose(lr, Regularizer::scaled_euclidean(0.5, 6).unwrap()).unwrap();
        let eta = optimal_rate(comp.certificate(), 1000).unwrap();
        assert!((eta - (2.0 * 32.5 / 1000.0f64).sqrt()).abs() < 1e-15);
        assert!(optimal_rate(c.certificate(), 0).is_err());
    }

    #[test]
    fn hedge_equals_entropic_mirror_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let seq = random_seq(&mut rng, 32, 1000);
        let r = Regularizer::neg_entropy(32).unwrap();
        let eta = optimal_rate(r.certificate(), 1000).unwrap();
        let (a, ra) = run(&r, eta, &seq).unwrap();
        let (b, rb) = hedge(eta, &seq).unwrap();
        let dev = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x.weights() - y.weights()).amax())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-10, "{dev}");
        assert!((ra.regret - rb.regret).abs() < 1e-9);
        assert!(ra.regret <= (2.0 * 1000.0 * 32f64.ln()).sqrt());
    }

    #[test]
    fn hedge_limits() {
        let seq = LossSequence::from_rows(&[vec![0.0, 1.0], vec![0.3, 0.2]]).unwrap();
        let (d, _) = hedge(0.0, &seq).unwrap();
        assert!(d.iter().all(|p| p == &SimplexPoint::uniform(2).unwrap()));
        let (d, _) = hedge(20.0, &seq).unwrap();
        assert_eq!(d[0], SimplexPoint::uniform(2).unwrap());
        let want = (-20f64).exp() / (1.0 + (-20f64).exp());
        assert!((d[1].weights()[1] - want).abs() < 1e-20);
    }

    #[test]
    fn identical_rows_have_zero_regret() {
        let seq = LossSequence::from_rows(&vec![vec![0.4; 3]; 10]).unwrap();
        for r in [
            Regularizer::neg_entropy(3).unwrap(),
            Regularizer::squared_q_norm(1.3, 3).unwrap(),
        ] {
            let (_, rep) = run(&r, 0.5, &seq).unwrap();
            assert!(rep.regret.abs() < 1e-12);
        }
    }

    #[test]
    fn single_round_regret() {
        let seq = LossSequence::from_rows(&[vec![0.9, 0.2]]).unwrap();
        let r = Regularizer::scaled_euclidean(1.0, 2).unwrap();
        let (_, rep) = run(&r, 0.1, &seq).unwrap();
        assert!((rep.regret - (0.5 * 0.9 + 0.5 * 0.2 - 0.2)).abs() < 1e-15);
    }
}
