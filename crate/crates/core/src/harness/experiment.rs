use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::exec::{map_trials, Execution};
use super::grammar::{parse_regularizer, parse_space};
use crate::error::{check_dim, Result};
use crate::loss_spaces::{LossSpace, SequenceSampler};
use crate::omd::{self, optimal_rate};
use crate::regularizers::Regularizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub regret_curve: Vec<f64>,
    pub final_regret: f64,
    pub bound_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub space: String,
    pub regularizer: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub eta: f64,
    /// `c` in the bound curve `c·√t`.
    pub bound_constant: f64,
    pub bound_curve: Vec<f64>,
    pub trials: Vec<TrialRecord>,
    pub mean_final_regret: f64,
    pub max_final_regret: f64,
    pub violations: usize,
}

impl RunRecord {
    /// Aggregates trials in index order.
    pub fn assemble(
        space: String,
        regularizer: String,
        n: usize,
        t: usize,
        eta: f64,
        bound_constant: f64,
        mut trials: Vec<TrialRecord>,
    ) -> Self {
        trials.sort_by_key(|r| r.trial);
        let bound_curve = (1..=t)
            .map(|i| bound_constant * (i as f64).sqrt())
            .collect();
        let k = trials.len();
        let (mean, max) = if k == 0 {
            (0.0, 0.0)
        } else {
            let sum: f64 = trials.iter().map(|r| r.final_regret).sum();
            let max = trials
                .iter()
                .map(|r| r.final_regret)
                .fold(f64::NEG_INFINITY, f64::max);
            (sum / k as f64, max)
        };
        Self {
            space,
            regularizer,
            n,
            t,
            eta,
            bound_constant,
            bound_curve,
            violations: trials.iter().filter(|r| !r.bound_satisfied).count(),
            trials,
            mean_final_regret: mean,
            max_final_regret: max,
        }
    }
}

/// A config with its space, regularizer and rate worked out.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub space: LossSpace,
    pub regularizer: Regularizer,
    pub eta: f64,
    pub bound_constant: f64,
}

pub fn resolve(cfg: &ExperimentConfig) -> Result<Resolved> {
    cfg.validate()?;
    let space = parse_space(&cfg.space, cfg.n)?;
    let regularizer = if cfg.regularizer.trim() == "auto" {
        space.recipe()?
    } else {
        parse_regularizer(&cfg.regularizer, cfg.n)?
    };
    check_dim(cfg.n, regularizer.dim())?;
    let eta = match cfg.eta_value()? {
        Some(x) => x,
        None => optimal_rate(regularizer.certificate(), cfg.t)?,
    };
    Ok(Resolved {
        bound_constant: space.bound_constant()?,
        space,
        regularizer,
        eta,
    })
}

/// One trial: a fresh sequence drawn with `seed`, played by OMD.
pub fn run_trial(r: &Resolved, t: usize, trial: usize, seed: u64) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = SequenceSampler::new(&r.space, &mut rng)?;
    let seq = sampler.sequence(t, &mut rng)?;
    let (_, report) = omd::run(&r.regularizer, r.eta, &seq)?;
    let bound = r.bound_constant * (t as f64).sqrt();
    Ok(TrialRecord {
        trial,
        seed,
        final_regret: report.regret,
        bound_satisfied: report.regret <= bound,
        regret_curve: report.per_round_regret,
    })
}

/// Runs `cfg.trials` trials; trial `i` uses seed `cfg.seed + i`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<RunRecord> {
    let r = resolve(cfg)?;
    let trials = map_trials(cfg.trials, exec, |i| {
        run_trial(&r, cfg.t, i, cfg.seed.wrapping_add(i as u64))
    })?;
    Ok(RunRecord::assemble(
        r.space.describe(),
        r.regularizer.describe(),
        cfg.n,
        cfg.t,
        r.eta,
        r.bound_constant,
        trials,
    ))
}
