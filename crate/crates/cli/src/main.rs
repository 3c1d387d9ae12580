use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use phaseless::certificates::DEFAULT_POLY_TOL;
use phaseless::solver::DEFAULT_TIE_RTOL;
use phaseless::{io, Error, Observation, SenseMatrix};

const EXIT_INPUT: u8 = 1;
const EXIT_NONUNIQUE: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;

#[derive(Parser)]
#[command(name = "phaseless", version, about = "Global solutions, certificates and stability experiments for min ‖|Ax| − b‖")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "PHASELESS_THREADS")]
    threads: Option<usize>,

    /// Print a human-readable summary to stderr
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Cp,
    Scp,
    Poly,
    NearSurface,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Solve exactly by enumerating sign patterns
    Solve {
        matrix: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TIE_RTOL)]
        tol: f64,
    },
    /// Run a uniqueness certificate
    Certify {
        matrix: PathBuf,
        /// Observation (required by poly and exact)
        b: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Signal for near-surface mode
        #[arg(long)]
        x0: Option<PathBuf>,
        /// Noise for near-surface mode
        #[arg(long)]
        eta: Option<PathBuf>,
        /// Tie tolerance (exact) or screen tolerance (poly)
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Count non-unique solutions for uniform observations in a box
    Montecarlo {
        matrix: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Box bounds `lo,hi`
        #[arg(long = "box", value_parser = parse_box, default_value = "0,1")]
        bounds: (f64, f64),
        #[arg(long, default_value_t = DEFAULT_TIE_RTOL)]
        tol: f64,
    },
    /// Build an instability witness pair
    Instability {
        matrix: PathBuf,
        #[arg(long, value_parser = parse_epsilon)]
        epsilon: f64,
        /// Seed observation with several best approximations
        #[arg(long)]
        seed_b: Option<PathBuf>,
        /// Seed-search trials when no seed is given
        #[arg(long, default_value_t = 32)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a ball of observations and report stability ratios
    Scan {
        matrix: PathBuf,
        center: PathBuf,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Find two surface points whose midpoint is off the surface
    WitnessNonconvex {
        matrix: PathBuf,
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_box(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound {hi:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("need finite lo ≤ hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let e: f64 = s.parse().map_err(|_| format!("bad number {s:?}"))?;
    if !(e > 0.0 && e < 1.0) {
        return Err(format!("epsilon must lie in (0, 1), got {e}"));
    }
    Ok(e)
}

fn load_matrix(path: &Path) -> anyhow::Result<SenseMatrix> {
    io::read_matrix(path).with_context(|| format!("reading matrix {}", path.display()))
}

fn load_observation(path: &Path) -> anyhow::Result<Observation> {
    io::read_observation(path).with_context(|| format!("reading vector {}", path.display()))
}

fn emit<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct MonteCarloSummary {
    samples: usize,
    seed: u64,
    #[serde(rename = "box")]
    bounds: [f64; 2],
    tie_tolerance: f64,
    nonunique: usize,
    fraction: Option<f64>,
    failing: Vec<Vec<f64>>,
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Solve { matrix, b, tol } => {
            let a = load_matrix(&matrix)?;
            let b = load_observation(&b)?;
            let set = phaseless::solve_global(&a, &b, tol)?;
            if verbose {
                eprintln!("optimal value {:.6e}, {} class(es)", set.optimal_value, set.classes.len());
                for c in &set.classes {
                    eprintln!("  {:?}", c.rep.as_slice());
                }
            }
            emit(&set)?;
            Ok(if set.is_unique() { 0 } else { EXIT_NONUNIQUE })
        }
        Command::Certify { matrix, b, mode, x0, eta, tol } => {
            let a = load_matrix(&matrix)?;
            let need_b = || -> anyhow::Result<Observation> {
                match &b {
                    Some(p) => load_observation(p),
                    None => bail!("this mode needs an observation file"),
                }
            };
            let cert = match mode {
                Mode::Cp => phaseless::complement_property(&a)?,
                Mode::Scp => phaseless::scp_sigma(&a)?,
                Mode::Poly => phaseless::poly_screen(&a, &need_b()?, tol.unwrap_or(DEFAULT_POLY_TOL))?,
                Mode::Exact => phaseless::certify_unique(&a, &need_b()?, tol.unwrap_or(DEFAULT_TIE_RTOL))?,
                Mode::NearSurface => {
                    let (Some(x0), Some(eta)) = (x0, eta) else {
                        bail!("near-surface mode needs --x0 and --eta");
                    };
                    let x0 = io::read_vector(&x0).with_context(|| format!("reading {}", x0.display()))?;
                    let eta = io::read_vector(&eta).with_context(|| format!("reading {}", eta.display()))?;
                    phaseless::near_surface_uniqueness(&a, &x0, &eta)?
                }
            };
            if verbose {
                eprintln!("{:?}: {:?}", cert.kind, cert.verdict);
            }
            emit(&cert)?;
            let failed_exact = matches!(mode, Mode::Exact) && cert.verdict == phaseless::Verdict::Fails;
            Ok(if failed_exact { EXIT_NONUNIQUE } else { 0 })
        }
        Command::Montecarlo { matrix, samples, seed, bounds, tol } => {
            let a = load_matrix(&matrix)?;
            if !phaseless::complement_property(&a)?.holds() {
                bail!("matrix lacks the complement property; the measure-zero experiment does not apply");
            }
            let lo = bounds.0.max(0.0);
            let hi = bounds.1;
            if hi < lo {
                bail!("box [{},{}] does not meet the nonnegative orthant", bounds.0, bounds.1);
            }
            let m = a.m();
            let verdicts: Vec<Option<Vec<f64>>> = (0..samples)
                .into_par_iter()
                .map(|i| -> phaseless::Result<Option<Vec<f64>>> {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    let v: Vec<f64> = (0..m).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
                    let b = Observation::from_slice(&v)?;
                    let unique = phaseless::certify_unique(&a, &b, tol)?.holds();
                    Ok((!unique).then_some(v))
                })
                .collect::<phaseless::Result<_>>()?;
            let failing: Vec<Vec<f64>> = verdicts.into_iter().flatten().collect();
            let summary = MonteCarloSummary {
                samples,
                seed,
                bounds: [bounds.0, bounds.1],
                tie_tolerance: tol,
                nonunique: failing.len(),
                fraction: (samples > 0).then(|| failing.len() as f64 / samples as f64),
                failing,
            };
            if verbose {
                eprintln!("{} of {} samples non-unique", summary.nonunique, samples);
            }
            emit(&summary)?;
            Ok(0)
        }
        Command::Instability { matrix, epsilon, seed_b, trials, seed } => {
            let a = load_matrix(&matrix)?;
            let witness = match seed_b {
                Some(p) => phaseless::instability_witness(&a, &load_observation(&p)?, epsilon)?,
                None => {
                    let seeds = phaseless::nonunique_seed_search(&a, trials, seed)?;
                    let found = seeds
                        .iter()
                        .find_map(|b0| phaseless::instability_witness(&a, b0, epsilon).ok());
                    match found {
                        Some(w) => w,
                        None => {
                            eprintln!(
                                "error: no observation with several best approximations found in {trials} trials"
                            );
                            return Ok(EXIT_EXHAUSTED);
                        }
                    }
                }
            };
            if verbose {
                eprintln!(
                    "|b1 - b2| = {:.6e}, projection ratio {:.6}, solution ratio {:.6}",
                    witness.input_distance, witness.projection_ratio, witness.ratio
                );
            }
            emit(&witness)?;
            Ok(0)
        }
        Command::Scan { matrix, center, radius, samples, seed } => {
            let a = load_matrix(&matrix)?;
            let c = load_observation(&center)?;
            let report = phaseless::convex_region_scan(&a, &c, radius, samples, seed)?;
            if verbose {
                eprintln!(
                    "{} pairs, max projection ratio {:.9}, max solution ratio {:.6}",
                    report.pairs.len(),
                    report.max_projection_ratio,
                    report.max_solution_ratio
                );
            }
            emit(&report)?;
            Ok(0)
        }
        Command::WitnessNonconvex { matrix, budget, seed } => {
            let a = load_matrix(&matrix)?;
            let w = phaseless::nonconvexity_witness(&a, budget, seed)?;
            if verbose {
                eprintln!("midpoint distance {:.6e} after {} attempt(s)", w.midpoint_distance, w.attempts);
            }
            emit(&w)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let exhausted = matches!(e.downcast_ref::<Error>(), Some(Error::SearchExhausted { .. }));
            ExitCode::from(if exhausted { EXIT_EXHAUSTED } else { EXIT_INPUT })
        }
    }
}
