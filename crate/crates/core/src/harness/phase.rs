//! Monte Carlo phase-transition experiment on Dirac combs.
//!
//! For each sparsity `k` the signal is the comb of period `k` at `n = k^2`
//! (ones at indices `0, k, 2k, ...`). Every trial draws a fresh Gaussian
//! ensemble from a seed derived from `(master_seed, k, m, trial)`, so the
//! joint and single-basis methods are compared on the same matrices and the
//! outcome of a trial does not depend on execution order.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::PhaseConfig;
use crate::numeric::derive_seed;
use crate::sensing::ensemble_from_seed;
use crate::signal::{dirac_comb, Signal};
use crate::solver::{relative_error, solve, Domain, JbpProblem, Mode, SolverConfig};

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub method: Mode,
    /// Frequency weight; 0 for the single-basis methods.
    pub lambda: f64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    /// `NaN` when the solver returned no iterate.
    pub rel_err: f64,
    pub iters: usize,
    pub wall_ms: f64,
}

/// Cell identity. `lambda_bits` is the bit pattern of the non-negative
/// weight, which orders the same way as the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub k: usize,
    pub method: Mode,
    pub lambda_bits: u64,
    pub m: usize,
}

impl CellKey {
    pub fn new(k: usize, m: usize, method: Mode, lambda: f64) -> Self {
        Self {
            k,
            method,
            lambda_bits: lambda.to_bits(),
            m,
        }
    }

    pub fn lambda(&self) -> f64 {
        f64::from_bits(self.lambda_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub successes: usize,
    pub trials: usize,
    /// Trials whose solve errored or hit the iteration cap.
    pub failures: usize,
    /// Mean over trials with a finite error.
    pub mean_rel_err: f64,
    pub mean_iters: f64,
}

impl Cell {
    pub fn fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Wilson 95% interval of the success probability.
    pub fn wilson95(&self) -> (f64, f64) {
        wilson_interval(self.successes, self.trials, 1.96)
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile
/// `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseGrid {
    pub k_values: Vec<usize>,
    /// Inclusive measurement range per `k`.
    pub m_ranges: BTreeMap<usize, (usize, usize)>,
    /// Trials per cell (the largest seen when cells differ).
    pub trials: usize,
    pub cells: BTreeMap<CellKey, Cell>,
    /// Every trial in canonical order.
    pub records: Vec<TrialRecord>,
}

impl PhaseGrid {
    /// Aggregates trial records into cells.
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        struct Acc {
            successes: usize,
            trials: usize,
            failures: usize,
            err_sum: f64,
            err_count: usize,
            iter_sum: usize,
        }
        let mut acc: BTreeMap<CellKey, Acc> = BTreeMap::new();
        let mut m_ranges: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for r in &records {
            let a = acc.entry(CellKey::new(r.k, r.m, r.method, r.lambda)).or_insert(Acc {
                successes: 0,
                trials: 0,
                failures: 0,
                err_sum: 0.0,
                err_count: 0,
                iter_sum: 0,
            });
            a.trials += 1;
            a.successes += r.success as usize;
            if r.rel_err.is_finite() {
                a.err_sum += r.rel_err;
                a.err_count += 1;
            } else {
                a.failures += 1;
            }
            a.iter_sum += r.iters;
            let range = m_ranges.entry(r.k).or_insert((r.m, r.m));
            range.0 = range.0.min(r.m);
            range.1 = range.1.max(r.m);
        }
        let cells: BTreeMap<CellKey, Cell> = acc
            .into_iter()
            .map(|(key, a)| {
                let cell = Cell {
                    successes: a.successes,
                    trials: a.trials,
                    failures: a.failures,
                    mean_rel_err: if a.err_count == 0 {
                        f64::NAN
                    } else {
                        a.err_sum / a.err_count as f64
                    },
                    mean_iters: a.iter_sum as f64 / a.trials as f64,
                };
                (key, cell)
            })
            .collect();
        Self {
            k_values: m_ranges.keys().copied().collect(),
            trials: cells.values().map(|c| c.trials).max().unwrap_or(0),
            m_ranges,
            cells,
            records,
        }
    }

    pub fn cell(&self, k: usize, m: usize, method: Mode, lambda: f64) -> Option<&Cell> {
        self.cells.get(&CellKey::new(k, m, method, lambda))
    }

    /// `(m, fraction)` along the row for `k`, ascending in `m`.
    pub fn fractions(&self, k: usize, method: Mode, lambda: f64) -> Vec<(usize, f64)> {
        self.cells
            .iter()
            .filter(|(key, _)| key.k == k && key.method == method && key.lambda_bits == lambda.to_bits())
            .map(|(key, c)| (key.m, c.fraction()))
            .collect()
    }

    /// Distinct `(method, lambda)` pairs present, in key order.
    pub fn series(&self) -> Vec<(Mode, f64)> {
        let mut out: Vec<(Mode, f64)> = Vec::new();
        for key in self.cells.keys() {
            let s = (key.method, key.lambda());
            if !out.iter().any(|(m, l)| *m == s.0 && l.to_bits() == s.1.to_bits()) {
                out.push(s);
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        out
    }
}

/// Seed of the ensemble for `(k, m, trial)`; the method is deliberately not
/// an input so that methods share matrices.
pub fn trial_seed(master: u64, k: usize, m: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(master, k as u64), m as u64), trial as u64)
}

/// The experiment signal for sparsity `k`.
pub fn experiment_comb(k: usize) -> Result<Signal> {
    dirac_comb(k * k, k, 0, 0)
}

/// One trial: fresh ensemble, solve, success test. Solver errors are
/// folded into the record as failures.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    comb: &Signal,
    k: usize,
    m: usize,
    method: Mode,
    lambda: f64,
    trial: usize,
    master_seed: u64,
    domain: Domain,
    solver: &SolverConfig,
    success_tol: f64,
    record_timing: bool,
) -> TrialRecord {
    let n = comb.len();
    let seed = trial_seed(master_seed, k, m, trial);
    let start = Instant::now();
    let outcome = ensemble_from_seed(seed, m, n).and_then(|ens| {
        let weight = if method == Mode::Jbp { lambda } else { 1.0 };
        let problem = JbpProblem::from_signal(ens, comb.x(), weight, method).with_domain(domain);
        match solve(&problem, solver) {
            Ok(r) => Ok(r),
            Err(Error::MaxItersExceeded { result }) => Ok(*result),
            Err(e) => Err(e),
        }
    });
    let wall_ms = if record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let (rel_err, iters) = match outcome {
        Ok(r) => (relative_error(&r.x_hat, comb.x()), r.iters),
        Err(_) => (f64::NAN, 0),
    };
    TrialRecord {
        k,
        n,
        m,
        method,
        lambda: if method == Mode::Jbp { lambda } else { 0.0 },
        trial,
        seed,
        success: rel_err <= success_tol,
        rel_err,
        iters,
        wall_ms,
    }
}

/// Runs the whole grid. Trials execute on a bounded pool and are collected
/// in canonical `(k, method, lambda, m, trial)` order.
pub fn run_phase_experiment(cfg: &PhaseConfig) -> Result<PhaseGrid> {
    cfg.validate()?;
    let mut combs = BTreeMap::new();
    for &k in &cfg.k_values {
        combs.insert(k, experiment_comb(k)?);
    }
    let mut tasks = Vec::new();
    for &k in &cfg.k_values {
        let (lo, hi) = cfg.m_range(k);
        for &method in &cfg.methods {
            let lambdas: &[f64] = if method == Mode::Jbp { &cfg.lambdas } else { &[0.0] };
            for &lambda in lambdas {
                for m in lo..=hi {
                    for trial in 0..cfg.trials {
                        tasks.push((k, m, method, lambda, trial));
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(k, m, method, lambda, trial)| {
                run_trial(
                    &combs[&k],
                    k,
                    m,
                    method,
                    lambda,
                    trial,
                    cfg.master_seed,
                    cfg.domain,
                    &cfg.solver,
                    cfg.success_tol,
                    cfg.record_timing,
                )
            })
            .collect()
    });
    Ok(PhaseGrid::from_records(records))
}

/// 50% crossing for one sparsity.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingPoint {
    pub k: usize,
    /// `None` when the row never brackets 1/2.
    pub m50: Option<f64>,
    /// Values of `m` after which the fraction drops by more than two
    /// binomial standard deviations.
    pub flagged_drops: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingCurve {
    pub method: Mode,
    pub lambda: f64,
    pub points: Vec<CrossingPoint>,
}

impl CrossingCurve {
    pub fn m50(&self, k: usize) -> Result<f64> {
        self.points
            .iter()
            .find(|p| p.k == k)
            .and_then(|p| p.m50)
            .ok_or(Error::Unbracketed { k })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} (lambda = {})\n", self.method, self.lambda);
        for p in &self.points {
            let m50 = p.m50.map_or("unbracketed".to_string(), |v| format!("{v:.3}"));
            let ratio = p.m50.map_or(String::new(), |v| format!("  m50/k = {:.3}", v / p.k as f64));
            out.push_str(&format!("  k = {:>2}  m50 = {m50}{ratio}", p.k));
            if !p.flagged_drops.is_empty() {
                out.push_str(&format!("  non-monotone after m = {:?}", p.flagged_drops));
            }
            out.push('\n');
        }
        out
    }
}

/// Linear interpolation between the first `m` whose fraction reaches 1/2
/// and the row entry just before it. `None` when no entry reaches 1/2 or
/// the first entry already does.
pub fn interpolate_m50(row: &[(usize, f64)]) -> Option<f64> {
    let hi = row.iter().position(|&(_, f)| f >= 0.5)?;
    if hi == 0 {
        return None;
    }
    let (m0, f0) = row[hi - 1];
    let (m1, f1) = row[hi];
    Some(m0 as f64 + (0.5 - f0) / (f1 - f0) * (m1 - m0) as f64)
}

/// `m` values after which the success fraction falls by more than two
/// pooled binomial standard deviations.
pub fn monotonicity_flags(row: &[(usize, usize, usize)]) -> Vec<usize> {
    row.windows(2)
        .filter_map(|w| {
            let (m, s0, t0) = w[0];
            let (_, s1, t1) = w[1];
            let (f0, f1) = (s0 as f64 / t0 as f64, s1 as f64 / t1 as f64);
            let pooled = (s0 + s1) as f64 / (t0 + t1) as f64;
            let sigma = (pooled * (1.0 - pooled) * (1.0 / t0 as f64 + 1.0 / t1 as f64)).sqrt();
            (f0 - f1 > 2.0 * sigma).then_some(m)
        })
        .collect()
}

pub fn crossing_curve(grid: &PhaseGrid, method: Mode, lambda: f64) -> CrossingCurve {
    let lambda = if method == Mode::Jbp { lambda } else { 0.0 };
    let points = grid
        .k_values
        .iter()
        .filter_map(|&k| {
            let row: Vec<(usize, usize, usize)> = grid
                .cells
                .iter()
                .filter(|(key, _)| {
                    key.k == k && key.method == method && key.lambda_bits == lambda.to_bits()
                })
                .map(|(key, c)| (key.m, c.successes, c.trials))
                .collect();
            if row.is_empty() {
                return None;
            }
            let fractions: Vec<(usize, f64)> =
                row.iter().map(|&(m, s, t)| (m, s as f64 / t as f64)).collect();
            Some(CrossingPoint {
                k,
                m50: interpolate_m50(&fractions),
                flagged_drops: monotonicity_flags(&row),
            })
        })
        .collect();
    CrossingCurve {
        method,
        lambda,
        points,
    }
}
