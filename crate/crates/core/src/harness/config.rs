//! Experiment configuration files (TOML).
//!
//! ```toml
//! N = 64
//! T = 1024
//! space = "sparse(s=3)+noisy(eps=0.5)"
//! regularizer = "auto"        # or e.g. "qnorm(s=3)+euclidean(eps=0.5)"
//! eta = "optimal"             # or a positive number
//! seed = 1
//! trials = 50
//! output = "run.csv"          # optional; stdout when absent
//! format = "csv"              # or "json"
//!
//! [sweep]                     # only read by `sweep`
//! template = "sparse(s={s})+noisy(eps={eps})"
//! s = [3, 5]
//! eps = [0.25, 0.5]
//! T = [256, 1024]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Fixed(f64),
    Named(String),
}

impl Default for EtaSpec {
    fn default() -> Self {
        EtaSpec::Named("optimal".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub space: String,
    #[serde(default = "auto")]
    pub regularizer: String,
    #[serde(default)]
    pub eta: EtaSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
}

fn auto() -> String {
    "auto".into()
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    /// Space spec with `{s}`, `{d}` and `{eps}` placeholders.
    pub template: String,
    #[serde(default)]
    pub s: Vec<usize>,
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default, rename = "T")]
    pub t: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(n: usize, t: usize, space: impl Into<String>) -> Self {
        Self {
            n,
            t,
            space: space.into(),
            regularizer: auto(),
            eta: EtaSpec::default(),
            seed: 0,
            trials: 1,
            output: None,
            format: Format::Csv,
            sweep: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 || self.trials == 0 {
            return Err(Error::config("N, T and trials must be positive"));
        }
        self.eta_value()?;
        Ok(())
    }

    /// `None` means the rate is derived from the regularizer's certificate.
    pub fn eta_value(&self) -> Result<Option<f64>> {
        match &self.eta {
            EtaSpec::Fixed(x) if *x > 0.0 && x.is_finite() => Ok(Some(*x)),
            EtaSpec::Fixed(x) => Err(Error::config(format!("eta must be positive, got {x}"))),
            EtaSpec::Named(s) if s == "optimal" => Ok(None),
            EtaSpec::Named(s) => match s.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(Some(x)),
                _ => Err(Error::config(format!(
                    "eta must be \"optimal\" or a positive number, got {s:?}"
                ))),
            },
        }
    }
}
