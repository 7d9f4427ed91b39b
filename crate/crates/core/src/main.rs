use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use jointsparse::certificate::{certify, nullspace_probe, CertReport};
use jointsparse::harness::emit::{cell_summary, heatmap_svg, write_grid_csv, write_svg};
use jointsparse::harness::lemmas::{
    lemma3_exhaustive_dft, lemma3_suite, lemma5_suite, lemma7_suite, Lemma5Config,
};
use jointsparse::harness::{crossing_curve, run_phase_experiment, PhaseConfig};
use jointsparse::jbpm::{extract_signal, phase_aligned_error, random_instance, solve_jbpm};
use jointsparse::numeric::Rng;
use jointsparse::sensing::ensemble_from_seed;
use jointsparse::signal::{dirac_comb, random_comb_mixture, Signal, DEFAULT_SUPPORT_TOL};
use jointsparse::solver::{relative_error, solve, Domain, JbpProblem, Mode, SolverConfig};
use jointsparse::{Error, Result};

/// Joint time-frequency sparse recovery: signal generation, solving,
/// certificate checks and phase-transition experiments.
#[derive(Parser)]
#[command(name = "jointsparse", version)]
struct Cli {
    /// Master seed (ensembles are regenerated from seed, m and n).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Dirac comb or a random comb mixture.
    Gen {
        #[arg(long)]
        n: usize,
        /// Time period of the comb(s).
        #[arg(long)]
        period: usize,
        #[arg(long, default_value_t = 0)]
        offset: usize,
        #[arg(long, default_value_t = 0)]
        modulation: usize,
        /// Number of random combs to mix instead of a single comb.
        #[arg(long)]
        mixture: Option<usize>,
    },
    /// Recover a stored signal from `m` Gaussian measurements.
    Solve {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value = "jbp")]
        method: Mode,
        #[arg(long, default_value = "complex")]
        domain: Domain,
    },
    /// Build and check the dual certificate for a stored signal.
    Certify {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Random null-space directions to probe for a uniqueness violation.
        #[arg(long, default_value_t = 0)]
        probe: usize,
    },
    /// Run the phase-transition experiment and write the trial CSV.
    Phase {
        /// Sweep k = 2, 4, ..., 32 instead of the desk-scale range.
        #[arg(long)]
        full: bool,
        /// Heat map with both 50% curves.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Per-cell summary with Wilson intervals.
        #[arg(long)]
        cells: Option<PathBuf>,
    },
    /// Run the structural lemma suites.
    Lemmas {
        #[arg(long, default_value_t = 100)]
        rank_trials: usize,
        #[arg(long, default_value_t = 200)]
        zero_trials: usize,
    },
    /// Sparse phase retrieval by lifting.
    JbpmDemo {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        sparsity: usize,
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_signal(path: &Path) -> Result<Signal> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Signal::from_text(&text)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: &Option<PathBuf>, full: bool) -> Result<PhaseConfig> {
    match path {
        Some(p) => PhaseConfig::load(p),
        None if full => Ok(PhaseConfig::full()),
        None => Ok(PhaseConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            n,
            period,
            offset,
            modulation,
            mixture,
        } => {
            let signal = match mixture {
                Some(terms) => random_comb_mixture(&mut Rng::new(cli.seed), n, period, terms)?,
                None => dirac_comb(n, period, offset, modulation)?,
            };
            eprintln!(
                "n = {n}, |S1| = {}, |S2| = {}",
                signal.support_time().len(),
                signal.support_freq().len()
            );
            emit(&cli.out, &signal.to_text())
        }
        Command::Solve {
            signal,
            m,
            lambda,
            method,
            domain,
        } => {
            let x = read_signal(&signal)?;
            let cfg = match &cli.config {
                Some(p) => PhaseConfig::load(p)?.solver,
                None => SolverConfig::default(),
            };
            let ens = ensemble_from_seed(cli.seed, m, x.len())?;
            let problem = JbpProblem::from_signal(ens, x.x(), lambda, method).with_domain(domain);
            let start = Instant::now();
            let result = match solve(&problem, &cfg) {
                Ok(r) => r,
                Err(Error::MaxItersExceeded { result }) => {
                    eprintln!("warning: iteration cap reached");
                    *result
                }
                Err(e) => return Err(e),
            };
            println!(
                "{method} m = {m} n = {}: objective {:.6}, rel_err {:.3e}, residual {:.1e}, {} iterations, {:.1} ms",
                x.len(),
                result.objective,
                relative_error(&result.x_hat, x.x()),
                problem.relative_residual(&result.x_hat),
                result.iters,
                start.elapsed().as_secs_f64() * 1e3
            );
            if let Some(path) = &cli.out {
                write_text(path, &Signal::new(result.x_hat, DEFAULT_SUPPORT_TOL)?.to_text())?;
            }
            Ok(())
        }
        Command::Certify {
            signal,
            m,
            lambda,
            probe,
        } => {
            let x = read_signal(&signal)?;
            let ens = ensemble_from_seed(cli.seed, m, x.len())?;
            let (_, report) = certify(&ens, &x, lambda)?;
            print!("{}", report.to_text());
            if probe > 0 {
                let p = nullspace_probe(&ens, &x, lambda, probe, &mut Rng::new(cli.seed))?;
                println!(
                    "null-space probe: dim {}, min growth {:.3e}, violation {}",
                    p.null_dim,
                    p.min_value,
                    if p.violation.is_some() { "found" } else { "none found" }
                );
            }
            if let Some(path) = &cli.out {
                write_text(path, &format!("{}\n{}\n", CertReport::CSV_HEADER, report.csv_row()))?;
            }
            Ok(())
        }
        Command::Phase { full, svg, cells } => {
            let mut cfg = load_config(&cli.config, full)?;
            cfg.master_seed = cli.seed;
            let start = Instant::now();
            let grid = run_phase_experiment(&cfg)?;
            eprintln!(
                "{} trials in {:.1} s",
                grid.records.len(),
                start.elapsed().as_secs_f64()
            );
            let out = cli.out.unwrap_or_else(|| PathBuf::from("phase.csv"));
            write_grid_csv(&grid, &out)?;
            let mut curves = Vec::new();
            for (method, lambda) in grid.series() {
                let curve = crossing_curve(&grid, method, lambda);
                print!("{}", curve.to_text());
                curves.push(curve);
            }
            if let Some(path) = cells {
                write_text(&path, &cell_summary(&grid))?;
            }
            if let Some(path) = svg {
                let joint = curves.iter().find(|c| c.method == Mode::Jbp);
                let heat = joint.map_or(Mode::BpTime, |c| c.method);
                let lambda = joint.map_or(0.0, |c| c.lambda);
                let overlay: Vec<_> = curves.iter().map(|c| (c, c.method != Mode::Jbp)).collect();
                write_svg(&heatmap_svg(&grid, heat, lambda, &overlay), &path)?;
            }
            Ok(())
        }
        Command::Lemmas {
            rank_trials,
            zero_trials,
        } => {
            let mut rng = Rng::new(cli.seed);
            let mut text = lemma3_suite(&mut rng, &[4, 8, 16], rank_trials)?.to_text();
            text.push_str(&lemma3_exhaustive_dft(5)?.to_text());
            text.push_str(&lemma7_suite(&[4, 8, 9, 12, 16, 36, 64], &mut rng)?.to_text());
            let cfg = Lemma5Config {
                trials: zero_trials,
                ..Lemma5Config::default()
            };
            text.push_str(&lemma5_suite(&mut rng, &cfg)?.to_text());
            emit(&cli.out, &text)
        }
        Command::JbpmDemo {
            n,
            sparsity,
            m,
            lambda,
        } => {
            let mut rng = Rng::new(cli.seed);
            let (x, problem) = random_instance(&mut rng, n, sparsity, m, lambda)?;
            let cfg = match &cli.config {
                Some(p) => PhaseConfig::load(p)?.solver,
                None => SolverConfig::default(),
            };
            let start = Instant::now();
            let result = match solve_jbpm(&problem, &cfg, true) {
                Ok(r) => r,
                Err(Error::MatrixMaxItersExceeded { result }) => {
                    eprintln!("warning: iteration cap reached");
                    *result
                }
                Err(e) => return Err(e),
            };
            let xx = &x * x.adjoint();
            let (x_hat, ratio) = extract_signal(&result.x_hat)?;
            println!(
                "n = {n}, k = {sparsity}, m = {m}, lambda = {lambda}: matrix rel_err {:.3e}, \
                 signal error {:.3e}, sigma2/sigma1 {:.2e}, {} iterations, {:.1} ms",
                (&result.x_hat - &xx).norm() / xx.norm(),
                phase_aligned_error(&x_hat, &x),
                ratio,
                result.iters,
                start.elapsed().as_secs_f64() * 1e3
            );
            if let Some(path) = &cli.out {
                write_text(path, &Signal::new(x_hat, DEFAULT_SUPPORT_TOL)?.to_text())?;
            }
            Ok(())
        }
    }
}
