use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use structured_omd::harness::{
    grammar::parse_space, run_experiment, run_lower_bound, run_sweep, write_report, write_sweep,
    Execution, ExperimentConfig, Format, Learner, LowerBoundParams,
};
use structured_omd::loss_spaces::theoretical_bound;
use structured_omd::omd::optimal_rate;
use structured_omd::Error;

#[derive(Parser)]
#[command(
    name = "structured-omd",
    version,
    about = "Mirror descent over structured loss spaces"
)]
struct Cli {
    /// Run trials one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Upper-bound experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Closed-form regret bound and matched regularizer for a space.
    Bound {
        #[arg(long)]
        space: String,
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "N", default_value_t = 64)]
        n: usize,
    },
    /// Hypercube adversary games.
    Lowerbound {
        #[arg(long = "V")]
        v: usize,
        #[arg(long)]
        s: f64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the Hedge rate `√(2 ln N / T)/s`.
        #[arg(long)]
        eta: Option<f64>,
        /// Play OMD with this regularizer instead of Hedge.
        #[arg(long)]
        regularizer: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid over the `[sweep]` table of a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_failure() { 2 } else { 1 })
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("STRUCTURED_OMD_THREADS") else {
        return Ok(());
    };
    let k: usize =
        v.parse().ok().filter(|k| *k > 0).ok_or_else(|| {
            format!("STRUCTURED_OMD_THREADS must be a positive integer, got {v:?}")
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| e.to_string())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> Result<(), String> {
    Ok(())
}

fn with_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Error> {
    let name = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    let io = |source| Error::Io {
        path: name.clone(),
        source,
    };
    match path {
        Some(p) => {
            let mut w = BufWriter::new(std::fs::File::create(p).map_err(io)?);
            f(&mut w).map_err(io)?;
            w.flush().map_err(io)
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w).map_err(io)?;
            w.flush().map_err(io)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.cmd {
        Cmd::Run {
            config,
            seed,
            trials,
            out,
            format,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = trials {
                cfg.trials = k;
            }
            if let Some(o) = out {
                cfg.output = Some(o);
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            let rec = run_experiment(&cfg, exec)?;
            let mut result = Ok(());
            with_output(cfg.output.as_deref(), |w| {
                result = write_report(&rec, w, cfg.format);
                Ok(())
            })?;
            result?;
            eprintln!(
                "{} trials, mean regret {:.6}, max {:.6}, bound {:.6}, violations {}",
                rec.trials.len(),
                rec.mean_final_regret,
                rec.max_final_regret,
                rec.bound_curve.last().copied().unwrap_or(0.0),
                rec.violations
            );
            Ok(())
        }
        Cmd::Bound { space, t, n } => {
            let sp = parse_space(&space, n)?;
            let (bound, reg) = theoretical_bound(&sp, t)?;
            let cert = reg.certificate();
            let eta = optimal_rate(cert, t)?;
            with_output(None, |w| {
                writeln!(w, "space = {}", sp.describe())?;
                writeln!(w, "N = {n}")?;
                writeln!(w, "T = {t}")?;
                writeln!(
                    w,
                    "constant = {:.16e}",
                    sp.bound_constant().unwrap_or(f64::NAN)
                )?;
                writeln!(w, "bound = {bound:.16e}")?;
                writeln!(w, "regularizer = {}", reg.describe())?;
                writeln!(w, "D2 = {:.16e}", cert.d_squared)?;
                writeln!(w, "alpha = {:.16e}", cert.alpha)?;
                writeln!(w, "G = {:.16e}", cert.g)?;
                writeln!(w, "eta = {eta:.16e}")?;
                writeln!(w, "certificate_bound = {:.16e}", cert.regret_bound(t))
            })
        }
        Cmd::Lowerbound {
            v,
            s,
            n,
            t,
            trials,
            seed,
            eta,
            regularizer,
            out,
        } => {
            let mut p = LowerBoundParams::new(v, s, n, t, trials);
            p.seed = seed;
            p.eta = eta;
            if let Some(r) = regularizer {
                p.learner = Learner::Omd(r);
            }
            let sum = run_lower_bound(&p, exec)?;
            with_output(out.as_deref(), |w| sum.write_csv(w))
        }
        Cmd::Sweep { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = run_sweep(&cfg, exec)?;
            let path = out.or(cfg.output);
            with_output(path.as_deref(), |w| write_sweep(&rows, w))
        }
    }
}
