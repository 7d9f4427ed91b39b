//! Supports, the complex sign, and generators for signals that are sparse in
//! both time and frequency (Dirac combs and their mixtures).

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numeric::{apply_dft, C64, CVec, Rng};

/// Absolute threshold used to read supports off a signal.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-8;

const MIXTURE_RETRIES: usize = 8;

/// Sorted index subset of `{0, ..., n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
    n: usize,
}

impl SupportSet {
    pub fn new(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, dim: n });
        }
        Ok(Self {
            indices: set.into_iter().collect(),
            n,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            indices: Vec::new(),
            n,
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            n,
        }
    }

    /// All indices congruent to a member of `residues` modulo `period`.
    pub fn from_residues(n: usize, period: usize, residues: &[usize]) -> Result<Self> {
        if period == 0 || n % period != 0 {
            return Err(Error::invalid(format!("period {period} does not divide {n}")));
        }
        let idx = residues
            .iter()
            .flat_map(|&r| (0..n / period).map(move |c| r % period + c * period));
        Self::new(n, idx)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> SupportSet {
        let mut member = vec![false; self.n];
        self.indices.iter().for_each(|&i| member[i] = true);
        SupportSet {
            indices: (0..self.n).filter(|&i| !member[i]).collect(),
            n: self.n,
        }
    }

    /// Indicator mask of length `n`.
    pub fn mask(&self) -> Vec<bool> {
        let mut member = vec![false; self.n];
        self.indices.iter().for_each(|&i| member[i] = true);
        member
    }

    /// Entries of `v` on this support, in index order.
    pub fn collapse(&self, v: &CVec) -> CVec {
        CVec::from_iterator(self.len(), self.indices.iter().map(|&i| v[i]))
    }
}

/// Complex sign: `z / |z|`, and 0 at 0.
pub fn csgn(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        z / r
    }
}

pub fn csgn_vec(v: &CVec) -> CVec {
    v.map(csgn)
}

/// Whether membership in `s` is constant on residue classes modulo `l`.
/// A period that does not divide `n` is never periodic.
pub fn is_periodic_support(s: &SupportSet, l: usize) -> Result<bool> {
    let n = s.ambient();
    if l == 0 {
        return Err(Error::invalid("period must be at least 1"));
    }
    if l > n {
        return Err(Error::invalid(format!("period {l} exceeds n = {n}")));
    }
    if n % l != 0 {
        return Ok(false);
    }
    let mask = s.mask();
    let periodic = (0..l).all(|r| {
        let first = mask[r];
        (r..n).step_by(l).all(|i| mask[i] == first)
    });
    if periodic {
        // a union of whole residue classes, each of size n / l
        assert_eq!(s.len() % (n / l), 0);
    }
    Ok(periodic)
}

/// Time/frequency thresholded supports of `x`.
pub fn detect_supports(x: &CVec, tol: f64) -> (SupportSet, SupportSet) {
    let n = x.len();
    let above = |v: &CVec| -> Vec<usize> {
        v.iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > tol)
            .map(|(i, _)| i)
            .collect()
    };
    let time = above(x);
    let freq = above(&apply_dft(x, false));
    (
        SupportSet { indices: time, n },
        SupportSet { indices: freq, n },
    )
}

/// A signal together with its time and frequency supports.
#[derive(Debug, Clone)]
pub struct Signal {
    x: CVec,
    support_time: SupportSet,
    support_freq: SupportSet,
    support_tol: f64,
}

impl Signal {
    pub fn new(x: CVec, support_tol: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("signal length must be positive"));
        }
        if !crate::numeric::is_finite(x.as_slice()) {
            return Err(Error::invalid("signal has non-finite entries"));
        }
        if !(support_tol >= 0.0) {
            return Err(Error::invalid("support tolerance must be non-negative"));
        }
        let (support_time, support_freq) = detect_supports(&x, support_tol);
        Ok(Self {
            x,
            support_time,
            support_freq,
            support_tol,
        })
    }

    pub fn x(&self) -> &CVec {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn support_time(&self) -> &SupportSet {
        &self.support_time
    }

    pub fn support_freq(&self) -> &SupportSet {
        &self.support_freq
    }

    pub fn support_tol(&self) -> f64 {
        self.support_tol
    }

    /// Plain-text form: a `n=<int> tol=<float>` header, then one `re im`
    /// line per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={} tol={:e}\n", self.len(), self.support_tol);
        for z in self.x.iter() {
            writeln!(out, "{:e} {:e}", z.re, z.im).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty signal file".into()))?;
        let mut n = None;
        let mut tol = None;
        for tok in header.split_whitespace() {
            match tok.split_once('=') {
                Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?),
                Some(("tol", v)) => tol = Some(v.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?),
                _ => return Err(Error::Parse(format!("unexpected header token `{tok}`"))),
            }
        }
        let (n, tol) = match (n, tol) {
            (Some(n), Some(t)) => (n, t),
            _ => return Err(Error::Parse("header must carry n= and tol=".into())),
        };
        let mut entries = Vec::with_capacity(n);
        for line in lines {
            let mut it = line.split_whitespace();
            let mut next = || -> Result<f64> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("short line `{line}`")))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(e.to_string()))
            };
            let re = next()?;
            let im = next()?;
            entries.push(C64::new(re, im));
        }
        if entries.len() != n {
            return Err(Error::Parse(format!("expected {n} entries, found {}", entries.len())));
        }
        Signal::new(CVec::from_vec(entries), tol)
    }
}

fn comb_vector(n: usize, period: usize, offset: usize, modulation: usize) -> CVec {
    CVec::from_fn(n, |j, _| {
        if j % period == offset {
            let e = ((j as u128 * modulation as u128) % n as u128) as f64;
            C64::from_polar(1.0, -2.0 * PI * e / n as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Modulated Dirac comb: `v_j = W^(j t)` when `j = offset (mod period)`,
/// zero elsewhere.
pub fn dirac_comb(n: usize, period: usize, offset: usize, modulation: usize) -> Result<Signal> {
    if n == 0 || period == 0 || n % period != 0 {
        return Err(Error::invalid(format!("period {period} must divide n = {n}")));
    }
    if offset >= period {
        return Err(Error::invalid(format!("offset {offset} must be below the period {period}")));
    }
    if modulation >= n {
        return Err(Error::invalid(format!("modulation {modulation} must be below n = {n}")));
    }
    Signal::new(comb_vector(n, period, offset, modulation), DEFAULT_SUPPORT_TOL)
}

/// Complex-Gaussian combination of `num_terms` distinct combs of period
/// `n1`. The result has an `n1`-periodic time support and an
/// `(n / n1)`-periodic frequency support; coefficients are redrawn if a
/// cancellation breaks that pattern.
pub fn random_comb_mixture(
    rng: &mut Rng,
    n: usize,
    n1: usize,
    num_terms: usize,
) -> Result<Signal> {
    if n == 0 || n1 == 0 || n % n1 != 0 {
        return Err(Error::invalid(format!("n1 = {n1} must divide n = {n}")));
    }
    if num_terms == 0 {
        return Err(Error::invalid("need at least one term"));
    }
    let pairs = n1 * n;
    if num_terms > pairs {
        return Err(Error::invalid(format!(
            "{num_terms} terms requested but only {pairs} distinct combs exist"
        )));
    }
    // sample distinct (offset, modulation) pairs
    let mut chosen = BTreeSet::new();
    while chosen.len() < num_terms {
        chosen.insert((rng.below(n1), rng.below(n)));
    }
    let terms: Vec<(usize, usize)> = chosen.into_iter().collect();
    mixture_of(rng, n, n1, &terms)
}

/// Mixture of the given `(offset, modulation)` combs with random complex
/// coefficients. Duplicate pairs are rejected.
pub fn mixture_of(rng: &mut Rng, n: usize, n1: usize, terms: &[(usize, usize)]) -> Result<Signal> {
    let distinct: BTreeSet<_> = terms.iter().collect();
    if distinct.len() != terms.len() {
        return Err(Error::invalid("comb terms must be distinct"));
    }
    if terms.is_empty() {
        return Err(Error::invalid("need at least one term"));
    }
    if n1 == 0 || n % n1 != 0 {
        return Err(Error::invalid(format!("n1 = {n1} must divide n = {n}")));
    }
    let n2 = n / n1;
    // the time support is the union of the offsets' classes, the frequency
    // support the union of the modulations' classes mod n2
    let offsets: BTreeSet<usize> = terms.iter().map(|t| t.0).collect();
    let freq_classes: BTreeSet<usize> = terms.iter().map(|t| t.1 % n2).collect();
    let expect_time = offsets.len() * (n / n1);
    let expect_freq = freq_classes.len() * (n / n2);
    for _ in 0..MIXTURE_RETRIES {
        let mut x = CVec::zeros(n);
        for &(l, t) in terms {
            if l >= n1 || t >= n {
                return Err(Error::invalid(format!("invalid comb term ({l}, {t})")));
            }
            x += comb_vector(n, n1, l, t) * rng.complex_normal(1.0);
        }
        let sig = Signal::new(x, DEFAULT_SUPPORT_TOL)?;
        if sig.support_time.len() == expect_time
            && sig.support_freq.len() == expect_freq
            && is_periodic_support(&sig.support_time, n1)?
            && is_periodic_support(&sig.support_freq, n2)?
        {
            return Ok(sig);
        }
    }
    Err(Error::Cancellation {
        retries: MIXTURE_RETRIES,
    })
}
