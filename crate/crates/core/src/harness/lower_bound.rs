use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exec::{map_trials, Execution};
use super::grammar::parse_regularizer;
use crate::error::{Error, Result};
use crate::experts::LossSequence;
use crate::loss_spaces::{expected_block_deviation, lower_bound_value, AdversaryState};
use crate::omd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Learner {
    Hedge,
    /// OMD with a regularizer given in the text grammar.
    Omd(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundParams {
    pub v: usize,
    pub s: f64,
    pub n: usize,
    pub t: usize,
    pub trials: usize,
    pub seed: u64,
    /// Defaults to `√(2 ln N / T)/s`, the Hedge rate for losses in `[−s, s]`.
    pub eta: Option<f64>,
    pub learner: Learner,
}

impl LowerBoundParams {
    pub fn new(v: usize, s: f64, n: usize, t: usize, trials: usize) -> Self {
        Self {
            v,
            s,
            n,
            t,
            trials,
            seed: 0,
            eta: None,
            learner: Learner::Hedge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundTrial {
    pub trial: usize,
    pub seed: u64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundSummary {
    pub params: LowerBoundParams,
    pub eta: f64,
    pub block_length: usize,
    pub trials: Vec<LowerBoundTrial>,
    pub mean: f64,
    pub std_err: f64,
    /// `2s√(VT/8)`.
    pub floor: f64,
    /// `V·2s·E|Bin(k,½) − k/2|`.
    pub predicted_mean: f64,
}

pub const PREDICTED_FORMULA: &str = "predicted_mean = V*2*s*E|Bin(k,1/2)-k/2|, k = floor(T/V)";
pub const FLOOR_FORMULA: &str = "floor = 2*s*sqrt(V*T/8)";

pub fn run_lower_bound(p: &LowerBoundParams, exec: Execution) -> Result<LowerBoundSummary> {
    if p.trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let probe = AdversaryState::new(p.v, p.s, p.n, p.t, p.seed)?;
    let reg = match &p.learner {
        Learner::Hedge => None,
        Learner::Omd(spec) => Some(parse_regularizer(spec, p.n)?),
    };
    let eta = match p.eta {
        Some(x) if x > 0.0 && x.is_finite() => x,
        Some(x) => {
            return Err(Error::param(format!(
                "learning rate must be positive, got {x}"
            )))
        }
        None => (2.0 * (p.n as f64).ln() / p.t as f64).sqrt() / p.s,
    };
    let trials = map_trials(p.trials, exec, |i| {
        let seed = p.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adv = AdversaryState::new(p.v, p.s, p.n, p.t, seed)?;
        let rounds = (0..p.t)
            .map(|_| adv.next_loss(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        let seq = LossSequence::new(rounds)?;
        let report = match &reg {
            None => omd::hedge(eta, &seq)?.1,
            Some(r) => omd::run(r, eta, &seq)?.1,
        };
        Ok(LowerBoundTrial {
            trial: i,
            seed,
            regret: report.regret,
        })
    })?;
    let k = trials.len() as f64;
    let mean = trials.iter().map(|r| r.regret).sum::<f64>() / k;
    let std_err = if trials.len() > 1 {
        let var = trials
            .iter()
            .map(|r| (r.regret - mean).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(LowerBoundSummary {
        params: p.clone(),
        eta,
        block_length: probe.block_length,
        floor: lower_bound_value(p.v, p.s, p.t),
        predicted_mean: p.v as f64 * 2.0 * p.s * expected_block_deviation(probe.block_length),
        trials,
        mean,
        std_err,
    })
}

impl LowerBoundSummary {
    /// `# key=value` header lines followed by `trial,seed,regret` rows.
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        let p = &self.params;
        let learner = match &p.learner {
            Learner::Hedge => "hedge".to_string(),
            Learner::Omd(s) => format!("omd({s})"),
        };
        writeln!(w, "# V={}", p.v)?;
        writeln!(w, "# s={:.16e}", p.s)?;
        writeln!(w, "# N={}", p.n)?;
        writeln!(w, "# T={}", p.t)?;
        writeln!(w, "# trials={}", p.trials)?;
        writeln!(w, "# seed={}", p.seed)?;
        writeln!(w, "# learner={learner}")?;
        writeln!(w, "# eta={:.16e}", self.eta)?;
        writeln!(w, "# block_length={}", self.block_length)?;
        writeln!(w, "# {FLOOR_FORMULA}")?;
        writeln!(w, "# floor={:.16e}", self.floor)?;
        writeln!(w, "# {PREDICTED_FORMULA}")?;
        writeln!(w, "# predicted_mean={:.16e}", self.predicted_mean)?;
        writeln!(w, "# mean={:.16e}", self.mean)?;
        writeln!(w, "# std_err={:.16e}", self.std_err)?;
        writeln!(w, "trial,seed,regret")?;
        for r in &self.trials {
            writeln!(w, "{},{},{:.16e}", r.trial, r.seed, r.regret)?;
        }
        Ok(())
    }
}
