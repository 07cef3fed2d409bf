//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use structured_omd::atomic_norms::{minkowski_norm, AtomicSet};
use structured_omd::harness::grammar::parse_space;
use structured_omd::harness::{
    map_trials, run_experiment, run_lower_bound, Execution, ExperimentConfig, LowerBoundParams,
};
use structured_omd::loss_spaces::{LossSpace, SequenceSampler};
use structured_omd::lowrank_geometry::{mvee, DEFAULT_MVEE_TOL};
use structured_omd::omd::{hedge, optimal_rate, run, BregmanQuery};
use structured_omd::regularizers::{compose, Regularizer};
use structured_omd::{validate_simplex, LossSequence, LossVector};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "Hedge equivalence",
            c1_hedge_equivalence,
            Duration::from_secs(5),
        ),
        (
            "single-space bounds",
            c2_single_space_bounds,
            Duration::from_secs(120),
        ),
        (
            "additive-space bounds",
            c3_additive_bounds,
            Duration::from_secs(600),
        ),
        ("separation from Hedge", c4_separation, Duration::MAX),
        (
            "hypercube lower bound",
            c5_lower_bound,
            Duration::from_secs(60),
        ),
        (
            "Minkowski-sum and composite properties",
            c6_sum_properties,
            Duration::from_secs(60),
        ),
        ("solver oracles", c7_solver_oracles, Duration::MAX),
        ("finite-difference gradients", c8_gradients, Duration::MAX),
        ("CLI determinism", c9_cli_determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > *budget => Err(format!("{msg}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {}: PASS  {name}: {msg} ({took:.1?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {msg} ({took:.1?})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn c1_hedge_equivalence() -> Outcome {
    let (n, t) = (32, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
        .collect();
    let seq = LossSequence::from_rows(&rows).map_err(e)?;
    let reg = Regularizer::neg_entropy(n).map_err(e)?;
    let eta = optimal_rate(reg.certificate(), t).map_err(e)?;
    let (a, _) = run(&reg, eta, &seq).map_err(e)?;
    let (b, _) = hedge(eta, &seq).map_err(e)?;
    let dev = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x.weights() - y.weights()).amax())
        .fold(0.0, f64::max);
    check(dev <= 1e-10, format!("max deviation {dev:.2e}"))
}

fn bound_run(space: &str, expect_c: f64) -> Result<(usize, f64, f64), String> {
    let mut cfg = ExperimentConfig::new(64, 1024, space);
    cfg.trials = 50;
    cfg.seed = 1;
    let rec = run_experiment(&cfg, Execution::Parallel).map_err(e)?;
    if (rec.bound_constant - expect_c).abs() > 1e-12 * expect_c {
        return Err(format!(
            "{space}: constant {} != {expect_c}",
            rec.bound_constant
        ));
    }
    Ok((
        rec.violations,
        rec.max_final_regret,
        rec.bound_curve[rec.t - 1],
    ))
}

fn bound_rows(rows: &[(&str, f64)]) -> Outcome {
    let mut parts = Vec::new();
    let mut total = 0;
    for (space, c) in rows {
        let (v, max, bound) = bound_run(space, *c)?;
        total += v;
        parts.push(format!("{space} max {max:.2}/{bound:.2}"));
    }
    check(
        total == 0,
        format!("{total} violations; {}", parts.join(", ")),
    )
}

fn c2_single_space_bounds() -> Outcome {
    let sp = parse_space("spherical(eps=0.5)", 64).map_err(e)?;
    let LossSpace::Spherical(inner) = &sp else {
        return Err("spherical spec did not parse to a spherical space".into());
    };
    let lam = inner.lambda_max_inverse();
    let ln = |s: f64| (s + 1.0).ln();
    bound_rows(&[
        ("sparse(s=3)", 2.0 * ln(3.0).sqrt()),
        ("sparse(s=10)", 2.0 * ln(10.0).sqrt()),
        ("spherical(eps=0.5)", (lam * 0.5).sqrt()),
        ("noisy(eps=0.25)", 0.5),
        ("noisy(eps=1)", 1.0),
    ])
}

fn c3_additive_bounds() -> Outcome {
    let ln6 = 6f64.ln();
    bound_rows(&[
        (
            "lowrank(d=2)+noisy(eps=0.5)",
            (2.0 * (32.0 + 0.5f64)).sqrt(),
        ),
        ("sparse(s=5)+noisy(eps=0.5)", 2.0 * (2.0 * 1.5 * ln6).sqrt()),
        ("lowrank(d=2)+sparse(s=5)", 2.0 * (2.0 * 33.0 * ln6).sqrt()),
    ])
}

fn c4_separation() -> Outcome {
    let (n, t) = (1024, 4096);
    let space = LossSpace::noisy(n, 0.01).map_err(e)?;
    let reg = space.recipe().map_err(e)?;
    let eta = optimal_rate(reg.certificate(), t).map_err(e)?;
    let eta_hedge = (2.0 * (n as f64).ln() / t as f64).sqrt();
    let pairs = map_trials(20, Execution::Parallel, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let seq = SequenceSampler::new(&space, &mut rng)?.sequence(t, &mut rng)?;
        Ok((
            run(&reg, eta, &seq)?.1.regret,
            hedge(eta_hedge, &seq)?.1.regret,
        ))
    })
    .map_err(e)?;
    let omd = pairs.iter().map(|p| p.0).sum::<f64>() / 20.0;
    let hdg = pairs.iter().map(|p| p.1).sum::<f64>() / 20.0;
    check(
        omd <= 0.5 * hdg,
        format!(
            "mean regret OMD {omd:.4} vs Hedge {hdg:.4}, ratio {:.3}",
            omd / hdg
        ),
    )
}

fn c5_lower_bound() -> Outcome {
    let mut p = LowerBoundParams::new(4, 1.0, 16, 512, 200);
    p.seed = 0;
    let s = run_lower_bound(&p, Execution::Parallel).map_err(e)?;
    let rel = (s.mean - s.predicted_mean).abs() / s.predicted_mean;
    check(
        s.mean >= s.floor - 2.0 * s.std_err && rel <= 0.15,
        format!(
            "mean {:.3} ± {:.3}, floor {:.1}, predicted {:.3} (off by {:.1}%)",
            s.mean,
            s.std_err,
            s.floor,
            s.predicted_mean,
            100.0 * rel
        ),
    )
}

fn random_in_unit_ball(set: &AtomicSet, rng: &mut ChaCha8Rng) -> Result<DVector<f64>, String> {
    let n = set.dim();
    let dir = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
    let g = set.norm(&dir).map_err(e)?;
    Ok(dir * (rng.random::<f64>() / g))
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(n, n) * 0.3
}

fn interior(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let x = DVector::<f64>::from_fn(n, |_, _| Exp1.sample(rng)).add_scalar(1e-3);
    let s = x.sum();
    x / s
}

fn c6_sum_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_gauge = f64::NEG_INFINITY;
    let mut worst_support = f64::NEG_INFINITY;
    let mut worst_convexity = f64::NEG_INFINITY;
    for &n in &[3usize, 8] {
        let pairs = vec![
            (
                AtomicSet::p_norm_ball(1.0, 1.0, n),
                AtomicSet::p_norm_ball(2.0, 1.0, n),
            ),
            (
                AtomicSet::p_norm_ball(f64::INFINITY, 0.5, n),
                AtomicSet::ellipsoid(spd(&mut rng, n)),
            ),
            (
                AtomicSet::p_norm_ball(1.5, 2.0, n),
                AtomicSet::ellipsoid(spd(&mut rng, n)),
            ),
        ];
        let pairs: Vec<(AtomicSet, AtomicSet)> = pairs
            .into_iter()
            .map(|(a, b)| Ok((a.map_err(e)?, b.map_err(e)?)))
            .collect::<Result<_, String>>()?;
        for k in 0..10_000 {
            let (a1, a2) = &pairs[k % pairs.len()];
            let x1 = random_in_unit_ball(a1, &mut rng)?;
            let x2 = random_in_unit_ball(a2, &mut rng)?;
            let m = minkowski_norm(a1, a2, &(&x1 + &x2), 1e-9).map_err(e)?;
            let cap = a1.norm(&x1).map_err(e)?.max(a2.norm(&x2).map_err(e)?);
            worst_gauge = worst_gauge.max(m.value - cap);

            let x = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let sum = AtomicSet::minkowski_sum(a1.clone(), a2.clone()).map_err(e)?;
            let lhs = sum.dual_norm(&x).map_err(e)?;
            worst_support = worst_support
                .max(lhs - a1.dual_norm(&x).map_err(e)? - a2.dual_norm(&x).map_err(e)?);
        }
        let base = [
            Regularizer::neg_entropy(n).map_err(e)?,
            Regularizer::squared_q_norm(1.5, n).map_err(e)?,
            Regularizer::scaled_euclidean(0.7, n).map_err(e)?,
            Regularizer::ellipsoidal_quadratic(spd(&mut rng, n), 0.4).map_err(e)?,
            Regularizer::low_rank_quadratic(spd(&mut rng, n) + DMatrix::identity(n, n), 2)
                .map_err(e)?,
        ];
        let composites: Vec<(Regularizer, f64)> = [(1, 2), (4, 2), (0, 3), (1, 4)]
            .iter()
            .map(|&(i, j)| {
                let m = base[i].certificate().alpha.min(base[j].certificate().alpha);
                Ok((compose(base[i].clone(), base[j].clone()).map_err(e)?, m))
            })
            .collect::<Result<_, String>>()?;
        for k in 0..10_000 {
            let (r, min_alpha) = &composites[k % composites.len()];
            let x = interior(&mut rng, n);
            let y = interior(&mut rng, n);
            let lhs = r.bregman(&x, &y).map_err(e)?;
            let d = r.certificate().dual_norm(&(&x - &y));
            worst_convexity = worst_convexity.max(min_alpha / 4.0 * d * d - lhs);
        }
    }
    check(
        worst_gauge <= 1e-7 && worst_support <= 1e-12 && worst_convexity <= 1e-9,
        format!("worst slack: sum gauge {worst_gauge:.2e}, sum support {worst_support:.2e}, composite convexity {worst_convexity:.2e}"),
    )
}

/// Exact minimum of `f` over the grid `{k·h}` of the 2-simplex. For fixed
/// `i` the objective is convex in `j`, so a discrete ternary search is exact.
fn grid_argmin(f: &dyn Fn(&DVector<f64>) -> f64, k: usize) -> DVector<f64> {
    let h = 1.0 / k as f64;
    let point = |i: usize, j: usize| {
        DVector::from_vec(vec![i as f64 * h, j as f64 * h, (k - i - j) as f64 * h])
    };
    let mut best = (f64::INFINITY, point(0, 0));
    for i in 0..=k {
        let (mut lo, mut hi) = (0usize, k - i);
        while hi - lo > 2 {
            let m1 = lo + (hi - lo) / 3;
            let m2 = hi - (hi - lo) / 3;
            if f(&point(i, m1)) <= f(&point(i, m2)) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        for j in lo..=hi {
            let p = point(i, j);
            let v = f(&p);
            if v < best.0 {
                best = (v, p);
            }
        }
    }
    best.1
}

fn c7_solver_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let regs = [
        Regularizer::scaled_euclidean(1.0, 3).map_err(e)?,
        Regularizer::squared_q_norm(1.5, 3).map_err(e)?,
    ];
    let mut worst: f64 = 0.0;
    for reg in &regs {
        for _ in 0..100 {
            let a = interior(&mut rng, 3);
            let anchor = validate_simplex(a.as_slice()).map_err(e)?;
            let loss =
                LossVector::new(DVector::from_fn(3, |_, _| rng.random::<f64>())).map_err(e)?;
            let eta = rng.random_range(0.05..1.0);
            let got = BregmanQuery {
                regularizer: reg,
                anchor: &anchor,
                loss: &loss,
                eta,
            }
            .solve()
            .map_err(e)?;
            let f = |p: &DVector<f64>| {
                eta * loss.entries().dot(p) + reg.bregman(p, anchor.weights()).unwrap()
            };
            let want = grid_argmin(&f, 10_000);
            worst = worst.max((got.weights() - want).amax());
        }
    }
    let mut mvee_err: f64 = 0.0;
    for d in 2..=4usize {
        let pts: Vec<DVector<f64>> = (0..1usize << d)
            .map(|b| DVector::from_fn(d, |i, _| if (b >> i) & 1 == 0 { 1.0 } else { -1.0 }))
            .collect();
        let r = mvee(&pts, DEFAULT_MVEE_TOL).map_err(e)?;
        mvee_err = mvee_err.max((&r.m - DMatrix::identity(d, d) / d as f64).amax());
    }
    check(
        worst <= 1e-3 && mvee_err <= 1e-6,
        format!("prox vs grid {worst:.2e}, MVEE vs I/d {mvee_err:.2e}"),
    )
}

fn c8_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 6;
    let e1 = Regularizer::scaled_euclidean(0.5, n).map_err(e)?;
    let q = Regularizer::squared_q_norm(1.5, n).map_err(e)?;
    let variants = [
        Regularizer::neg_entropy(n).map_err(e)?,
        q.clone(),
        e1.clone(),
        Regularizer::ellipsoidal_quadratic(spd(&mut rng, n), 0.3).map_err(e)?,
        Regularizer::low_rank_quadratic(spd(&mut rng, n) + DMatrix::identity(n, n), 2)
            .map_err(e)?,
        compose(q, e1).map_err(e)?,
    ];
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for r in &variants {
        for _ in 0..100 {
            let x = interior(&mut rng, n).add_scalar(0.05);
            let g = r.gradient(&x).map_err(e)?;
            let mut fd = DVector::zeros(n);
            for i in 0..n {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[i] += h;
                dn[i] -= h;
                fd[i] = (r.value(&up).map_err(e)? - r.value(&dn).map_err(e)?) / (2.0 * h);
            }
            worst = worst.max((&fd - &g).norm() / g.norm().max(1.0));
        }
    }
    check(
        worst <= 1e-5,
        format!(
            "worst relative error {worst:.2e} over {} variants",
            variants.len()
        ),
    )
}

fn cli(args: &[&str], dir: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_structured-omd"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(e)?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn c9_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let p = dir.path();
    std::fs::write(
        p.join("run.toml"),
        "N = 16\nT = 200\nspace = \"lowrank(d=2)+sparse(s=3)\"\nseed = 5\ntrials = 4\n\n\
         [sweep]\ntemplate = \"sparse(s={s})+noisy(eps={eps})\"\ns = [2, 4]\neps = [0.5]\nT = [50, 100]\n",
    )
    .map_err(e)?;
    let invocations: Vec<Vec<&str>> = vec![
        vec!["run", "--config", "run.toml"],
        vec![
            "run", "--config", "run.toml", "--format", "json", "--seed", "9",
        ],
        vec!["--sequential", "run", "--config", "run.toml"],
        vec![
            "bound",
            "--space",
            "sparse(s=5)+noisy(eps=0.5)",
            "--T",
            "1024",
        ],
        vec![
            "lowerbound",
            "--V",
            "3",
            "--s",
            "0.5",
            "--N",
            "8",
            "--T",
            "90",
            "--trials",
            "10",
            "--seed",
            "2",
        ],
        vec!["sweep", "--config", "run.toml"],
    ];
    let mut bytes = 0;
    let mut outputs = Vec::new();
    for args in &invocations {
        let a = cli(args, p)?;
        let b = cli(args, p)?;
        if a != b {
            return Err(format!("{args:?} differs between runs"));
        }
        bytes += a.len();
        outputs.push(a);
    }
    if outputs[0] != outputs[2] {
        return Err("sequential and parallel runs differ".into());
    }
    cli(&["run", "--config", "run.toml", "--out", "a.csv"], p)?;
    cli(&["run", "--config", "run.toml", "--out", "b.csv"], p)?;
    let a = std::fs::read(p.join("a.csv")).map_err(e)?;
    let b = std::fs::read(p.join("b.csv")).map_err(e)?;
    check(
        a == b && a == outputs[0],
        format!(
            "{} invocations twice each, {bytes} bytes identical",
            invocations.len() + 1
        ),
    )
}
