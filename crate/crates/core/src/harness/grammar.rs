//! Text forms of loss spaces and regularizers.
//!
//! ```text
//! spec   := term ('+' term)*
//! term   := name [ '(' key '=' value (',' key '=' value)* ')' ]
//! ```
//!
//! Spaces: `standard`, `sparse(s)`, `noisy(eps)`,
//! `spherical(eps, amin=0.5, amax=2, seed=0)`, `lowrank(d, seed=0)`.
//! Regularizers: `negentropy`, `euclidean(eps)`, `qnorm(q)` or `qnorm(s)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::loss_spaces::LossSpace;
use crate::lowrank_geometry::SubspaceSpec;
use crate::regularizers::{compose, make_qnorm_for_sparsity, Regularizer};

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    pub args: BTreeMap<String, String>,
}

pub fn parse_terms(spec: &str) -> Result<Vec<Term>> {
    let mut terms = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let chars: Vec<char> = spec.chars().collect();
    let mut pieces = Vec::new();
    for (i, c) in chars.iter().enumerate() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::config(format!("unbalanced ')' in {spec:?}")))?
            }
            '+' if depth == 0 => {
                pieces.push(chars[start..i].iter().collect::<String>());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::config(format!("unbalanced '(' in {spec:?}")));
    }
    pieces.push(chars[start..].iter().collect());
    for p in pieces {
        terms.push(parse_term(p.trim())?);
    }
    Ok(terms)
}

fn parse_term(t: &str) -> Result<Term> {
    if t.is_empty() {
        return Err(Error::config("empty term"));
    }
    let (name, rest) = match t.find('(') {
        Some(i) => {
            if !t.ends_with(')') {
                return Err(Error::config(format!("term {t:?} must end with ')'")));
            }
            (&t[..i], &t[i + 1..t.len() - 1])
        }
        None => (t, ""),
    };
    let mut args = BTreeMap::new();
    for kv in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got {kv:?}")))?;
        if args
            .insert(k.trim().to_string(), v.trim().to_string())
            .is_some()
        {
            return Err(Error::config(format!("duplicate key {k:?} in {t:?}")));
        }
    }
    Ok(Term {
        name: name.trim().to_lowercase(),
        args,
    })
}

struct Args<'a> {
    term: &'a Term,
    used: Vec<&'static str>,
}

impl<'a> Args<'a> {
    fn new(term: &'a Term) -> Self {
        Self {
            term,
            used: Vec::new(),
        }
    }

    fn get<T: std::str::FromStr>(&mut self, key: &'static str, default: Option<T>) -> Result<T> {
        self.used.push(key);
        match self.term.args.get(key) {
            Some(v) => v.parse().map_err(|_| {
                Error::config(format!("{}: bad value {v:?} for {key}", self.term.name))
            }),
            None => {
                default.ok_or_else(|| Error::config(format!("{}: missing {key}", self.term.name)))
            }
        }
    }

    fn has(&self, key: &str) -> bool {
        self.term.args.contains_key(key)
    }

    fn finish(self) -> Result<()> {
        for k in self.term.args.keys() {
            if !self.used.contains(&k.as_str()) {
                return Err(Error::config(format!(
                    "{}: unknown key {k:?}",
                    self.term.name
                )));
            }
        }
        Ok(())
    }
}

pub fn parse_space(spec: &str, n: usize) -> Result<LossSpace> {
    let mut out: Option<LossSpace> = None;
    for term in parse_terms(spec)? {
        let leaf = space_term(&term, n)?;
        out = Some(match out {
            None => leaf,
            Some(acc) => LossSpace::additive(acc, leaf)?,
        });
    }
    out.ok_or_else(|| Error::config("empty space"))
}

fn space_term(term: &Term, n: usize) -> Result<LossSpace> {
    let mut a = Args::new(term);
    let space = match term.name.as_str() {
        "standard" => LossSpace::standard(n)?,
        "sparse" => LossSpace::sparse(n, a.get("s", None)?)?,
        "noisy" => LossSpace::noisy(n, a.get("eps", None)?)?,
        "spherical" => {
            let eps = a.get("eps", None)?;
            let amin: f64 = a.get("amin", Some(0.5))?;
            let amax: f64 = a.get("amax", Some(2.0))?;
            let seed: u64 = a.get("seed", Some(0))?;
            LossSpace::spherical(rotated_spectrum(n, amin, amax, seed)?, eps)?
        }
        "lowrank" => {
            let d: usize = a.get("d", None)?;
            let seed: u64 = a.get("seed", Some(0))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            LossSpace::low_rank(SubspaceSpec::random_nonnegative(n, d, &mut rng)?, seed)?
        }
        other => return Err(Error::config(format!("unknown loss space {other:?}"))),
    };
    a.finish()?;
    Ok(space)
}

/// `Q' diag(λ) Q` with log-spaced `λ` in `[amin, amax]` and a seeded random
/// orthogonal `Q`.
pub fn rotated_spectrum(n: usize, amin: f64, amax: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(amin > 0.0 && amax >= amin && amax.is_finite()) {
        return Err(Error::config(format!(
            "need 0 < amin <= amax, got {amin}, {amax}"
        )));
    }
    if n == 0 {
        return Err(Error::Empty("loss space dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    let lam = DVector::from_fn(n, |i, _| {
        if n == 1 {
            amin
        } else {
            amin * (amax / amin).powf(i as f64 / (n - 1) as f64)
        }
    });
    let a: DMatrix<f64> = q.transpose() * DMatrix::from_diagonal(&lam) * &q;
    Ok((&a + a.transpose()) * 0.5)
}

pub fn parse_regularizer(spec: &str, n: usize) -> Result<Regularizer> {
    let mut out: Option<Regularizer> = None;
    for term in parse_terms(spec)? {
        let mut a = Args::new(&term);
        let leaf = match term.name.as_str() {
            "negentropy" => Regularizer::neg_entropy(n)?,
            "euclidean" => Regularizer::scaled_euclidean(a.get("eps", None)?, n)?,
            "qnorm" => {
                if a.has("s") {
                    make_qnorm_for_sparsity(a.get("s", None)?, n)?
                } else {
                    Regularizer::squared_q_norm(a.get("q", None)?, n)?
                }
            }
            other => return Err(Error::config(format!("unknown regularizer {other:?}"))),
        };
        a.finish()?;
        out = Some(match out {
            None => leaf,
            Some(acc) => compose(acc, leaf)?,
        });
    }
    out.ok_or_else(|| Error::config("empty regularizer"))
}
