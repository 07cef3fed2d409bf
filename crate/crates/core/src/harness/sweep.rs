use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::exec::Execution;
use super::experiment::run_experiment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub space: String,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub space: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub trial: usize,
    pub final_regret: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
}

/// Grid points in the order `s`, `d`, `eps`, `T` (last varies fastest).
pub fn expand_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let axes = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep needs a [sweep] table"))?;
    let tpl = &axes.template;
    let s: Vec<String> = axes.s.iter().map(|x| x.to_string()).collect();
    let d: Vec<String> = axes.d.iter().map(|x| x.to_string()).collect();
    let eps: Vec<String> = axes.eps.iter().map(|x| x.to_string()).collect();
    for (key, vals) in [("s", &s), ("d", &d), ("eps", &eps)] {
        let ph = format!("{{{key}}}");
        match (tpl.contains(&ph), vals.is_empty()) {
            (true, true) => {
                return Err(Error::config(format!(
                    "template uses {ph} but no values are given"
                )))
            }
            (false, false) => {
                return Err(Error::config(format!(
                    "values for {key} but template lacks {ph}"
                )))
            }
            _ => {}
        }
    }
    let ts = if axes.t.is_empty() {
        vec![cfg.t]
    } else {
        axes.t.clone()
    };
    if ts.contains(&0) {
        return Err(Error::config("sweep horizons must be positive"));
    }
    let or_blank = |v: &Vec<String>| {
        if v.is_empty() {
            vec![String::new()]
        } else {
            v.clone()
        }
    };
    let mut out = Vec::new();
    for sv in or_blank(&s) {
        for dv in or_blank(&d) {
            for ev in or_blank(&eps) {
                let space = tpl
                    .replace("{s}", &sv)
                    .replace("{d}", &dv)
                    .replace("{eps}", &ev);
                for &t in &ts {
                    out.push(SweepPoint {
                        space: space.clone(),
                        t,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for point in expand_sweep(cfg)? {
        let mut sub = cfg.clone();
        sub.space = point.space.clone();
        sub.t = point.t;
        sub.sweep = None;
        let rec = run_experiment(&sub, exec)?;
        let bound = rec.bound_curve[rec.t - 1];
        rows.extend(rec.trials.iter().map(|tr| SweepRow {
            space: point.space.clone(),
            n: rec.n,
            t: rec.t,
            trial: tr.trial,
            final_regret: tr.final_regret,
            bound,
            bound_satisfied: tr.bound_satisfied,
        }));
    }
    Ok(rows)
}

/// CSV with columns `space,N,T,trial,final_regret,bound,bound_satisfied`.
/// The space column is quoted since specs contain commas.
pub fn write_sweep<W: Write + ?Sized>(rows: &[SweepRow], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "space,N,T,trial,final_regret,bound,bound_satisfied")?;
    for r in rows {
        writeln!(
            w,
            "\"{}\",{},{},{},{:.16e},{:.16e},{}",
            r.space.replace('"', "\"\""),
            r.n,
            r.t,
            r.trial,
            r.final_regret,
            r.bound,
            r.bound_satisfied
        )?;
    }
    Ok(())
}
