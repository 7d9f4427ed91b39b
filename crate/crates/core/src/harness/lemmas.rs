//! Numerical checks of the structural facts the recovery analysis rests on:
//! full column rank of stacked random bases, the DFT leakage identities on
//! periodic supports, and the zero fraction of the shrinkage vector.

use std::fmt::Write as _;

use crate::certificate::shrink_b;
use crate::error::{Error, Result};
use crate::numeric::{dft_matrix, least_squares_min_norm, svd, CMat, CVec, Rng, C64};
use crate::sensing::make_ensemble;
use crate::signal::SupportSet;

/// Relative singular value floor for a full-rank verdict.
pub const RANK_RATIO_TOL: f64 = 1e-8;
/// Tolerance of the DFT leakage identities.
pub const LEAKAGE_TOL: f64 = 1e-12;
/// Residue-class counts up to this are always enumerated exhaustively.
pub const EXHAUSTIVE_CLASSES: usize = 10;
/// Both factors are enumerated when `n1 + n2` is at most this.
pub const EXHAUSTIVE_PAIR_BITS: usize = 18;
/// Random class subsets drawn per factor when enumeration is too large.
pub const SAMPLED_SUBSETS: usize = 192;

// ---------------------------------------------------------------------------
// Stacked-basis rank

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub n: usize,
    pub trials: usize,
    pub full_rank: usize,
    /// Smallest `sigma_min / sigma_max` seen.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma3Report {
    pub random: Vec<RankEntry>,
    pub pass: bool,
}

impl Lemma3Report {
    pub fn to_text(&self) -> String {
        let mut out = String::from("stacked random bases, |S1| + |S2| <= n\n");
        for e in &self.random {
            let _ = writeln!(
                out,
                "  n = {:>3}: {}/{} full rank (worst sigma ratio {:.3e})",
                e.n, e.full_rank, e.trials, e.worst_ratio
            );
        }
        let _ = writeln!(out, "  {}", verdict(self.pass));
        out
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn random_subset(rng: &mut Rng, n: usize, size: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let mut out = idx[..size].to_vec();
    out.sort_unstable();
    out
}

/// `sigma_min / sigma_max` of `[B1[:, S1]  B2[:, S2]]`; 0 when there are
/// more columns than rows.
pub fn stacked_rank_ratio(b1: &CMat, s1: &[usize], b2: &CMat, s2: &[usize]) -> Result<f64> {
    let n = b1.nrows();
    if s1.len() + s2.len() > n {
        return Ok(0.0);
    }
    let mut stacked = CMat::zeros(n, s1.len() + s2.len());
    for (c, &j) in s1.iter().enumerate() {
        stacked.set_column(c, &b1.column(j));
    }
    for (c, &j) in s2.iter().enumerate() {
        stacked.set_column(s1.len() + c, &b2.column(j));
    }
    let dec = svd(&stacked)?;
    let smax = dec.sigma_max();
    Ok(if smax == 0.0 { 0.0 } else { dec.sigma_min() / smax })
}

/// For each `n`, draws `trials` pairs of complex Gaussian inverse bases and
/// random supports with `|S1| + |S2| <= n`, and tests full column rank of
/// the stacked support columns.
pub fn lemma3_suite(rng: &mut Rng, n_values: &[usize], trials: usize) -> Result<Lemma3Report> {
    if let Some(n) = n_values.iter().find(|&&n| n < 2) {
        return Err(Error::invalid(format!("n = {n} leaves no room for two nonempty supports")));
    }
    let mut random = Vec::new();
    for &n in n_values {
        let mut entry = RankEntry {
            n,
            trials,
            full_rank: 0,
            worst_ratio: f64::INFINITY,
        };
        for _ in 0..trials {
            let b1 = crate::numeric::gaussian_matrix(rng, n, n, 1.0)?;
            let b2 = crate::numeric::gaussian_matrix(rng, n, n, 1.0)?;
            let a = 1 + rng.below(n - 1);
            let b = 1 + rng.below(n - a);
            let s1 = random_subset(rng, n, a);
            let s2 = random_subset(rng, n, b);
            let ratio = stacked_rank_ratio(&b1, &s1, &b2, &s2)?;
            entry.worst_ratio = entry.worst_ratio.min(ratio);
            entry.full_rank += (ratio > RANK_RATIO_TOL) as usize;
        }
        random.push(entry);
    }
    let pass = random.iter().all(|e| e.full_rank == e.trials);
    Ok(Lemma3Report { random, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveRankReport {
    pub n: usize,
    /// Support pairs tested (both nonempty, `|S1| + |S2| <= n`).
    pub pairs: usize,
    pub full_rank: usize,
    pub worst_ratio: f64,
    pub pass: bool,
}

impl ExhaustiveRankReport {
    pub fn to_text(&self) -> String {
        format!(
            "identity and DFT at n = {}: {}/{} support pairs full rank (worst sigma ratio {:.3e})\n  {}\n",
            self.n,
            self.full_rank,
            self.pairs,
            self.worst_ratio,
            verdict(self.pass)
        )
    }
}

/// Every pair of nonempty supports with `|S1| + |S2| <= n` for the bases
/// `I` and `D`: the columns `I[:, S1]` and `D*[:, S2]` must be independent.
/// Practical up to `n` of about 12.
pub fn lemma3_exhaustive_dft(n: usize) -> Result<ExhaustiveRankReport> {
    if !(2..=16).contains(&n) {
        return Err(Error::invalid("exhaustive rank check supports 2 <= n <= 16"));
    }
    let id = CMat::identity(n, n);
    let d_inv = dft_matrix(n)?.adjoint();
    let subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
        .collect();
    let mut pairs = 0;
    let mut full_rank = 0;
    let mut worst = f64::INFINITY;
    for s1 in &subsets {
        for s2 in subsets.iter().filter(|s2| s1.len() + s2.len() <= n) {
            let ratio = stacked_rank_ratio(&id, s1, &d_inv, s2)?;
            pairs += 1;
            full_rank += (ratio > RANK_RATIO_TOL) as usize;
            worst = worst.min(ratio);
        }
    }
    Ok(ExhaustiveRankReport {
        n,
        pairs,
        full_rank,
        worst_ratio: worst,
        pass: full_rank == pairs,
    })
}

// ---------------------------------------------------------------------------
// DFT leakage identities

/// Per-`n` results. Claims: (1) `C = D* I_S2 D` vanishes off the residue
/// diagonal mod `n1`; (2) every row of `C` has squared norm `|S2|/n`;
/// (3) `C` maps vectors supported off `S1` to vectors vanishing on `S1`;
/// (4) the same three for `D I_S2 D*`, and for `D I_S1 D*` with the roles
/// of `(n1, S1)` and `(n2, S2)` exchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageEntry {
    pub n: usize,
    /// Factorizations `n = n1 * n2` covered.
    pub factorizations: usize,
    /// `(S1, S2)` pairs checked over all factorizations.
    pub pairs: usize,
    /// Whether every support pair of every factorization was enumerated.
    pub exhaustive: bool,
    pub max_deviation: [f64; 4],
    pub failures: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma7Report {
    pub entries: Vec<LeakageEntry>,
    pub pass: bool,
}

impl Lemma7Report {
    pub fn to_text(&self) -> String {
        let mut out = String::from("DFT leakage identities on periodic supports\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "  n = {:>3}: {} pairs over {} factorizations ({}), failures {:?}, max deviation [{:.1e}, {:.1e}, {:.1e}, {:.1e}]",
                e.n,
                e.pairs,
                e.factorizations,
                if e.exhaustive { "exhaustive" } else { "sampled" },
                e.failures,
                e.max_deviation[0],
                e.max_deviation[1],
                e.max_deviation[2],
                e.max_deviation[3],
            );
        }
        let _ = writeln!(out, "  {}", verdict(self.pass));
        out
    }
}

/// Class subsets of `{0, .., classes-1}` as bit masks: all of them when
/// `exhaustive`, otherwise empty, full, singletons, co-singletons,
/// alternating patterns and random masks.
fn class_subsets(classes: usize, exhaustive: bool, rng: &mut Rng) -> Vec<Vec<bool>> {
    if exhaustive {
        let all = (0u32..(1 << classes))
            .map(|mask| (0..classes).map(|i| mask >> i & 1 == 1).collect())
            .collect();
        return all;
    }
    let mut out: Vec<Vec<bool>> = vec![vec![false; classes], vec![true; classes]];
    for i in 0..classes {
        out.push((0..classes).map(|j| j == i).collect());
        out.push((0..classes).map(|j| j != i).collect());
    }
    out.push((0..classes).map(|j| j % 2 == 0).collect());
    out.push((0..classes).map(|j| j < classes / 2).collect());
    for _ in 0..SAMPLED_SUBSETS {
        out.push((0..classes).map(|_| rng.uniform() < 0.5).collect());
    }
    out
}

/// Support that is a union of residue classes mod `period`.
fn support_of(n: usize, period: usize, classes: &[bool]) -> Vec<bool> {
    (0..n).map(|i| classes[i % period]).collect()
}

/// `left * diag(mask) * right`.
fn masked_product(left: &CMat, mask: &[bool], right: &CMat) -> CMat {
    let cols: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if cols.is_empty() {
        return CMat::zeros(left.nrows(), right.ncols());
    }
    left.select_columns(&cols) * right.select_rows(&cols)
}

/// Deviations of claims (1), (2), (3) for matrix `c`, residue modulus
/// `period`, expected row energy `energy` and periodic support `s`.
fn leakage_deviations(c: &CMat, period: usize, energy: f64, s: &[bool]) -> (f64, f64, f64) {
    let n = c.nrows();
    let mut off = 0.0f64;
    let mut rows = 0.0f64;
    let mut cross = 0.0f64;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let z = c[(i, j)].norm();
            row += z * z;
            if i % period != j % period {
                off = off.max(z);
            }
            if s[i] && !s[j] {
                cross = cross.max(z);
            }
        }
        rows = rows.max((row - energy).abs());
    }
    (off, rows, cross)
}

/// Checks the leakage identities for every `n`, over every factorization
/// `n = n1 * n2` and every (or a structured sample of) `n1`-periodic `S1`
/// and `n2`-periodic `S2`.
pub fn lemma7_suite(n_values: &[usize], rng: &mut Rng) -> Result<Lemma7Report> {
    let mut entries = Vec::new();
    for &n in n_values {
        let d = dft_matrix(n)?;
        let d_adj = d.adjoint();
        let mut entry = LeakageEntry {
            n,
            factorizations: 0,
            pairs: 0,
            exhaustive: true,
            max_deviation: [0.0; 4],
            failures: [0; 4],
        };
        for n1 in (1..=n).filter(|d| n % d == 0) {
            let n2 = n / n1;
            entry.factorizations += 1;
            let both = n1 + n2 <= EXHAUSTIVE_PAIR_BITS;
            let (ex1, ex2) = (both || n1 <= EXHAUSTIVE_CLASSES, both || n2 <= EXHAUSTIVE_CLASSES);
            entry.exhaustive &= ex1 && ex2;
            let supports1: Vec<Vec<bool>> = class_subsets(n1, ex1, rng)
                .iter()
                .map(|c| support_of(n, n1, c))
                .collect();
            let supports2: Vec<Vec<bool>> = class_subsets(n2, ex2, rng)
                .iter()
                .map(|c| support_of(n, n2, c))
                .collect();
            let size = |s: &[bool]| s.iter().filter(|&&b| b).count() as f64 / n as f64;
            let mats1 = |s1: &[bool]| masked_product(&d, s1, &d_adj);
            let mats2 = |s2: &[bool]| (masked_product(&d_adj, s2, &d), masked_product(&d, s2, &d_adj));
            let mut check = |s1: &[bool], c_swap: &CMat, s2: &[bool], c: &CMat, c_dual: &CMat| {
                entry.pairs += 1;
                let (o, r, x) = leakage_deviations(c, n1, size(s2), s1);
                let (o2, r2, x2) = leakage_deviations(c_dual, n1, size(s2), s1);
                let (o3, r3, x3) = leakage_deviations(c_swap, n2, size(s1), s2);
                let fourth = [o2, r2, x2, o3, r3, x3].into_iter().fold(0.0, f64::max);
                for (slot, dev) in [o, r, x, fourth].into_iter().enumerate() {
                    entry.max_deviation[slot] = entry.max_deviation[slot].max(dev);
                    entry.failures[slot] += (dev > LEAKAGE_TOL) as usize;
                }
            };
            // cache the matrices of the smaller family, stream the larger one
            if supports1.len() <= supports2.len() {
                let cached: Vec<CMat> = supports1.iter().map(|s1| mats1(s1)).collect();
                for s2 in &supports2 {
                    let (c, c_dual) = mats2(s2);
                    for (s1, c_swap) in supports1.iter().zip(&cached) {
                        check(s1, c_swap, s2, &c, &c_dual);
                    }
                }
            } else {
                let cached: Vec<(CMat, CMat)> = supports2.iter().map(|s2| mats2(s2)).collect();
                for s1 in &supports1 {
                    let c_swap = mats1(s1);
                    for (s2, (c, c_dual)) in supports2.iter().zip(&cached) {
                        check(s1, &c_swap, s2, c, c_dual);
                    }
                }
            }
        }
        entries.push(entry);
    }
    let pass = entries.iter().all(|e| e.failures.iter().all(|&f| f == 0));
    Ok(Lemma7Report { entries, pass })
}

// ---------------------------------------------------------------------------
// Shrinkage zero fraction

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma5Config {
    pub n: usize,
    pub m: usize,
    pub support_size: usize,
    pub trials: usize,
    pub lambda: f64,
}

impl Default for Lemma5Config {
    fn default() -> Self {
        Self {
            n: 256,
            m: 64,
            support_size: 1,
            trials: 200,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma5Report {
    pub config: Lemma5Config,
    /// Off-support entries of the shrinkage vector over all trials.
    pub entries: usize,
    /// Entries with both parts exactly zero.
    pub zeros: usize,
    pub fraction: f64,
    /// `1 - 4 exp(-m / (16 |S|))`
    pub bound: f64,
    /// Binomial standard deviation at the bound.
    pub sigma: f64,
    /// `bound - 3 sigma`
    pub threshold: f64,
    pub pass: bool,
}

impl Lemma5Report {
    pub fn to_text(&self) -> String {
        format!(
            "shrinkage zero fraction (n = {}, m = {}, |S| = {}, {} trials)\n  \
             zeros {}/{} = {:.5}; bound {:.5} - 3 sigma ({:.2e}) = {:.5}\n  {}\n",
            self.config.n,
            self.config.m,
            self.config.support_size,
            self.config.trials,
            self.zeros,
            self.entries,
            self.fraction,
            self.bound,
            self.sigma,
            self.threshold,
            verdict(self.pass)
        )
    }
}

/// Draws Gaussian ensembles and random supports with signs of modulus
/// `lambda`, forms `y = A* s` with `s` the min-norm solution of
/// `A_S* s = sgn`, and counts the off-support zeros of the shrinkage vector
/// at level `lambda / 4`.
pub fn lemma5_suite(rng: &mut Rng, cfg: &Lemma5Config) -> Result<Lemma5Report> {
    if cfg.support_size == 0 || cfg.support_size > cfg.m || cfg.m > cfg.n || cfg.trials == 0 {
        return Err(Error::invalid("need 1 <= |S| <= m <= n and trials >= 1"));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let mut entries = 0;
    let mut zeros = 0;
    for _ in 0..cfg.trials {
        let ens = make_ensemble(rng, cfg.m, cfg.n)?;
        let s = SupportSet::new(cfg.n, random_subset(rng, cfg.n, cfg.support_size))?;
        let signs = CVec::from_fn(cfg.support_size, |_, _| {
            C64::from_polar(cfg.lambda, 2.0 * std::f64::consts::PI * rng.uniform())
        });
        let a_s = ens.a().select_columns(s.indices());
        let s1 = least_squares_min_norm(&a_s, &signs)?;
        let y = ens.a().adjoint() * s1;
        let b = shrink_b(&y, &s, cfg.lambda);
        for j in s.complement().indices() {
            entries += 1;
            zeros += (b[*j].re == 0.0 && b[*j].im == 0.0) as usize;
        }
    }
    let fraction = zeros as f64 / entries as f64;
    let bound = 1.0 - 4.0 * (-(cfg.m as f64) / (16.0 * cfg.support_size as f64)).exp();
    let sigma = (bound.clamp(0.0, 1.0) * (1.0 - bound.clamp(0.0, 1.0)) / entries as f64).sqrt();
    let threshold = bound - 3.0 * sigma;
    Ok(Lemma5Report {
        config: *cfg,
        entries,
        zeros,
        fraction,
        bound,
        sigma,
        threshold,
        pass: fraction >= threshold,
    })
}
