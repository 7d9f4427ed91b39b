//! Dual certificates for joint basis pursuit over the time/frequency pair.
//!
//! The candidate is built in three steps:
//!
//! 1. `s1`, `s2` interpolate the sign patterns on the two supports through
//!    least squares on `A_S1` and `B_S2` (`B = A D*`), giving
//!    `y1 = A* s1` and `y2 = D A* s2`.
//! 2. The off-support parts of `y1`, `y2` are shrunk entrywise (real and
//!    imaginary parts separately, by a quarter of the weight) into `b1`, `b2`.
//! 3. The gluing vector `s = D*(b2 - c2) - (b1 - c1)` with leakage terms
//!    `c1 = D* I_S2 D b1` and `c2 = D I_S1 D* b2` cancels most of the
//!    off-support mass while leaving both supports untouched when the
//!    supports are periodic.
//!
//! [`verify_lemma2`] evaluates the five optimality conditions with
//! `v1 = A* s1 + s` and `v2 = D(A* s2 - s)` and reports slacks.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numeric::{null_space, sup_norm, CMat, CVec, DftPlan, Rng, C64};
use crate::sensing::{
    check_invertibility_on, restrict_columns, InvertibilityReport, SensingEnsemble,
    SubspaceBasis, NULL_SPACE_TOL,
};
use crate::signal::{csgn, csgn_vec, Signal, SupportSet};

/// Tolerance for the support equalities.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Minimum slack to certify a strict inequality.
pub const STRICT_MARGIN: f64 = 1e-8;

/// Interpolating vectors before gluing.
#[derive(Debug, Clone)]
pub struct SCandidates {
    pub s1: CVec,
    pub s2: CVec,
    pub y1: CVec,
    pub y2: CVec,
}

/// `s1 = A_S1 (A_S1* A_S1)^-1 sgn(x)_S1`, `s2 = B_S2 (B_S2* B_S2)^-1 lambda sgn(Dx)_S2`.
pub fn build_s_candidates(ens: &SensingEnsemble, x: &Signal, lambda: f64) -> Result<SCandidates> {
    check_dims(ens, x)?;
    let n = ens.n();
    let plan = DftPlan::new(n);
    let s1_supp = x.support_time();
    let s2_supp = x.support_freq();
    let sgn_x = csgn_vec(x.x());
    let sgn_dx = csgn_vec(&plan.apply(x.x(), false));

    let a_s1 = restrict_columns(ens.a(), s1_supp)?;
    let s1 = crate::numeric::least_squares_min_norm(&a_s1, &s1_supp.collapse(&sgn_x))?;
    let b_s2 = restrict_columns(ens.b(), s2_supp)?;
    let rhs2 = s2_supp.collapse(&sgn_dx) * C64::new(lambda, 0.0);
    let s2 = crate::numeric::least_squares_min_norm(&b_s2, &rhs2)?;

    let y1 = ens.a().adjoint() * &s1;
    let y2 = plan.apply(&(ens.a().adjoint() * &s2), false);
    Ok(SCandidates { s1, s2, y1, y2 })
}

fn shrink_part(v: f64, quarter: f64) -> f64 {
    if v.abs() <= quarter {
        0.0
    } else {
        v - quarter * v.signum()
    }
}

/// Entrywise shrinkage of `y` off the support `s`: each of the real and
/// imaginary parts is zeroed when its magnitude is at most `lambda_i / 4` and
/// shrunk by `lambda_i / 4` otherwise. Entries on `s` are zero.
pub fn shrink_b(y: &CVec, s: &SupportSet, lambda_i: f64) -> CVec {
    let quarter = lambda_i / 4.0;
    let mask = s.mask();
    CVec::from_fn(y.len(), |j, _| {
        if mask[j] {
            C64::new(0.0, 0.0)
        } else {
            C64::new(shrink_part(y[j].re, quarter), shrink_part(y[j].im, quarter))
        }
    })
}

#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub s1: CVec,
    pub s2: CVec,
    pub s: CVec,
    pub y1: CVec,
    pub y2: CVec,
    pub b1: CVec,
    pub b2: CVec,
    pub c1: CVec,
    pub c2: CVec,
}

/// Zero `v` outside `s`.
fn restrict(v: &CVec, s: &SupportSet) -> CVec {
    let mask = s.mask();
    CVec::from_fn(v.len(), |j, _| if mask[j] { v[j] } else { C64::new(0.0, 0.0) })
}

pub fn assemble_certificate(
    ens: &SensingEnsemble,
    x: &Signal,
    lambda: f64,
) -> Result<DualCertificate> {
    let SCandidates { s1, s2, y1, y2 } = build_s_candidates(ens, x, lambda)?;
    let plan = DftPlan::new(ens.n());
    let s1_supp = x.support_time();
    let s2_supp = x.support_freq();
    let b1 = shrink_b(&y1, s1_supp, 1.0);
    let b2 = shrink_b(&y2, s2_supp, lambda);
    // c1 = D* I_S2 D b1, c2 = D I_S1 D* b2
    let c1 = plan.apply(&restrict(&plan.apply(&b1, false), s2_supp), true);
    let c2 = plan.apply(&restrict(&plan.apply(&b2, true), s1_supp), false);
    let s = plan.apply(&(&b2 - &c2), true) - (&b1 - &c1);
    Ok(DualCertificate {
        s1,
        s2,
        s,
        y1,
        y2,
        b1,
        b2,
        c1,
        c2,
    })
}

impl DualCertificate {
    /// `v1 = A* s1 + s` and `v2 = D (A* s2 - s)`.
    pub fn dual_vectors(&self, ens: &SensingEnsemble) -> (CVec, CVec) {
        let plan = DftPlan::new(ens.n());
        let v1 = ens.a().adjoint() * &self.s1 + &self.s;
        let v2 = plan.apply(&(ens.a().adjoint() * &self.s2 - &self.s), false);
        (v1, v2)
    }

    /// Fraction of off-support entries of `b1` that are exactly zero.
    pub fn b1_zero_fraction(&self, s1: &SupportSet) -> (usize, usize) {
        let off = s1.complement();
        let zeros = off
            .indices()
            .iter()
            .filter(|&&j| self.b1[j] == C64::new(0.0, 0.0))
            .count();
        (zeros, off.len())
    }
}

/// One verified condition: the measured quantity and its signed slack
/// (positive when the condition holds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub value: f64,
    pub slack: f64,
    pub holds: bool,
}

impl Condition {
    fn equality(deviation: f64) -> Self {
        Self {
            value: deviation,
            slack: EQUALITY_TOL - deviation,
            holds: deviation <= EQUALITY_TOL,
        }
    }

    fn strict_below(value: f64, bound: f64) -> Self {
        let slack = bound - value;
        Self {
            value,
            slack,
            holds: slack >= STRICT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    /// `S1(v1) = sgn(x)_S1`
    pub cond1: Condition,
    /// `||v1 off S1||_inf < 1`
    pub cond2: Condition,
    /// `S2(v2) = lambda sgn(Dx)_S2`
    pub cond3: Condition,
    /// `||v2 off S2||_inf < lambda`
    pub cond4: Condition,
    /// `A` injective on the intersection subspace
    pub cond5: InvertibilityReport,
    /// `||c1 off S1||_inf + ||D* b2 off S1||_inf` against 1/2, and
    /// `||c2 off S2||_inf + ||D b1 off S2||_inf` against lambda/2.
    pub lemma4_bounds: (f64, f64),
    pub lemma4_holds: (bool, bool),
    pub lambda: f64,
    pub pass: bool,
}

fn max_dev_on(v: &CVec, target: &CVec, s: &SupportSet) -> f64 {
    s.indices()
        .iter()
        .map(|&j| (v[j] - target[j]).norm())
        .fold(0.0, f64::max)
}

fn sup_off(v: &CVec, s: &SupportSet) -> f64 {
    let off = s.complement();
    sup_norm(off.collapse(v).as_slice())
}

/// Evaluates the five certificate conditions and the sufficient leakage
/// bounds. `intersection` is the subspace of signals supported on `S1` with
/// spectrum supported on `S2`.
pub fn verify_lemma2(
    cert: &DualCertificate,
    ens: &SensingEnsemble,
    x: &Signal,
    lambda: f64,
    intersection: &SubspaceBasis,
) -> Result<CertReport> {
    check_dims(ens, x)?;
    let plan = DftPlan::new(ens.n());
    let s1 = x.support_time();
    let s2 = x.support_freq();
    let sgn_x = csgn_vec(x.x());
    let sgn_dx = csgn_vec(&plan.apply(x.x(), false)) * C64::new(lambda, 0.0);
    let (v1, v2) = cert.dual_vectors(ens);

    let cond1 = Condition::equality(max_dev_on(&v1, &sgn_x, s1));
    let cond2 = Condition::strict_below(sup_off(&v1, s1), 1.0);
    let cond3 = Condition::equality(max_dev_on(&v2, &sgn_dx, s2));
    let cond4 = Condition::strict_below(sup_off(&v2, s2), lambda);
    let cond5 = check_invertibility_on(ens.a(), intersection)?;

    let l1 = sup_off(&cert.c1, s1) + sup_off(&plan.apply(&cert.b2, true), s1);
    let l2 = sup_off(&cert.c2, s2) + sup_off(&plan.apply(&cert.b1, false), s2);
    let lemma4_holds = (l1 <= 0.5, l2 <= lambda / 2.0);
    let pass = cond1.holds && cond2.holds && cond3.holds && cond4.holds && cond5.pass;
    Ok(CertReport {
        cond1,
        cond2,
        cond3,
        cond4,
        cond5,
        lemma4_bounds: (l1, l2),
        lemma4_holds,
        lambda,
        pass,
    })
}

impl CertReport {
    pub const CSV_HEADER: &'static str =
        "cond1_slack,cond2_slack,cond3_slack,cond4_slack,cond5_slack,lemma4_slack1,lemma4_slack2,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.cond1.slack,
            self.cond2.slack,
            self.cond3.slack,
            self.cond4.slack,
            self.cond5.sigma_min - self.cond5.tol,
            0.5 - self.lemma4_bounds.0,
            self.lambda / 2.0 - self.lemma4_bounds.1,
            self.pass
        )
    }

    pub fn to_text(&self) -> String {
        let mark = |b: bool| if b { "ok " } else { "FAIL" };
        let mut out = String::new();
        let _ = writeln!(out, "certificate check (lambda = {})", self.lambda);
        let _ = writeln!(
            out,
            "  [{}] time-support sign match      max dev {:.3e}",
            mark(self.cond1.holds),
            self.cond1.value
        );
        let _ = writeln!(
            out,
            "  [{}] time off-support sup < 1     {:.6} (slack {:.3e})",
            mark(self.cond2.holds),
            self.cond2.value,
            self.cond2.slack
        );
        let _ = writeln!(
            out,
            "  [{}] freq-support sign match      max dev {:.3e}",
            mark(self.cond3.holds),
            self.cond3.value
        );
        let _ = writeln!(
            out,
            "  [{}] freq off-support sup < lam   {:.6} (slack {:.3e})",
            mark(self.cond4.holds),
            self.cond4.value,
            self.cond4.slack
        );
        let _ = writeln!(
            out,
            "  [{}] injective on intersection    sigma_min {:.3e} (tol {:.0e})",
            mark(self.cond5.pass),
            self.cond5.sigma_min,
            self.cond5.tol
        );
        let _ = writeln!(
            out,
            "  leakage bounds: {:.6} <= 0.5 [{}], {:.6} <= {} [{}]",
            self.lemma4_bounds.0,
            mark(self.lemma4_holds.0).trim(),
            self.lemma4_bounds.1,
            self.lambda / 2.0,
            mark(self.lemma4_holds.1).trim()
        );
        let _ = writeln!(out, "  verdict: {}", if self.pass { "CERTIFIED" } else { "not certified" });
        out
    }
}

/// Result of a randomized search for a null-space direction along which the
/// objective does not grow.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    /// Smallest observed value of the directional growth over unit-norm
    /// null-space directions (`+inf` when the null space is trivial).
    pub min_value: f64,
    /// A unit direction with non-positive growth, if one was found.
    pub violation: Option<CVec>,
    pub null_dim: usize,
}

/// Directional growth of the objective at `x` along `w`:
/// `sum_i lambda_i (Re<sgn(U_i x), U_i w> + ||U_i w off S_i||_1)`.
pub fn directional_growth(x: &Signal, lambda: f64, w: &CVec) -> f64 {
    let plan = DftPlan::new(x.len());
    let dx = plan.apply(x.x(), false);
    let dw = plan.apply(w, false);
    growth_term(x.x(), w, x.support_time()) + lambda * growth_term(&dx, &dw, x.support_freq())
}

fn growth_term(ux: &CVec, uw: &CVec, s: &SupportSet) -> f64 {
    let mask = s.mask();
    let mut inner = 0.0;
    let mut off = 0.0;
    for j in 0..ux.len() {
        inner += (csgn(ux[j]).conj() * uw[j]).re;
        if !mask[j] {
            off += uw[j].norm();
        }
    }
    inner + off
}

const PROBE_RESTARTS: usize = 100;
const PROBE_SWEEPS: usize = 60;

/// Heuristic falsifier for the null-space condition: random unit directions
/// in `N(A)`, then coordinate descent over null-space coefficients from the
/// best starts. A found violation proves `x` is not the unique optimum; no
/// violation proves nothing.
pub fn nullspace_probe(
    ens: &SensingEnsemble,
    x: &Signal,
    lambda: f64,
    num_samples: usize,
    rng: &mut Rng,
) -> Result<ProbeReport> {
    check_dims(ens, x)?;
    if num_samples == 0 {
        return Err(Error::invalid("num_samples must be at least 1"));
    }
    let basis = null_space(ens.a(), NULL_SPACE_TOL)?;
    let d = basis.ncols();
    if d == 0 {
        return Ok(ProbeReport {
            min_value: f64::INFINITY,
            violation: None,
            null_dim: 0,
        });
    }
    let eval = |coef: &CVec| -> f64 {
        let norm = coef.norm();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        directional_growth(x, lambda, &(&basis * coef / C64::new(norm, 0.0)))
    };

    let mut starts: Vec<(f64, CVec)> = (0..num_samples)
        .map(|_| {
            let c = rng.complex_normal_vec(d, 1.0);
            (eval(&c), c)
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.truncate(PROBE_RESTARTS);

    let mut best = (f64::INFINITY, CVec::zeros(d));
    for (mut val, mut coef) in starts {
        coef /= C64::new(coef.norm(), 0.0);
        let mut step = 0.5;
        for _ in 0..PROBE_SWEEPS {
            let mut improved = false;
            for j in 0..d {
                for dir in [
                    C64::new(1.0, 0.0),
                    C64::new(-1.0, 0.0),
                    C64::new(0.0, 1.0),
                    C64::new(0.0, -1.0),
                ] {
                    let mut trial = coef.clone();
                    trial[j] += dir * step;
                    let v = eval(&trial);
                    if v < val {
                        val = v;
                        coef = &trial / C64::new(trial.norm(), 0.0);
                        improved = true;
                    }
                }
            }
            if val <= 0.0 {
                break;
            }
            if !improved {
                step *= 0.5;
                if step < 1e-6 {
                    break;
                }
            }
        }
        if val < best.0 {
            best = (val, coef);
        }
        if best.0 <= 0.0 {
            break;
        }
    }
    let violation = (best.0 <= 0.0).then(|| &basis * &best.1);
    Ok(ProbeReport {
        min_value: best.0,
        violation,
        null_dim: d,
    })
}

fn check_dims(ens: &SensingEnsemble, x: &Signal) -> Result<()> {
    if ens.n() != x.len() {
        return Err(Error::invalid(format!(
            "signal length {} does not match ensemble width {}",
            x.len(),
            ens.n()
        )));
    }
    Ok(())
}

/// Convenience wrapper: candidate, intersection subspace and report.
pub fn certify(
    ens: &SensingEnsemble,
    x: &Signal,
    lambda: f64,
) -> Result<(DualCertificate, CertReport)> {
    let cert = assemble_certificate(ens, x, lambda)?;
    let basis = crate::sensing::intersection_basis(x.support_time(), x.support_freq(), x.len())?;
    let report = verify_lemma2(&cert, ens, x, lambda, &basis)?;
    Ok((cert, report))
}

/// Leakage matrix `D* I_S D` (or `D I_S D*` when `conjugate` is set).
pub fn leakage_matrix(s: &SupportSet, conjugate: bool) -> Result<CMat> {
    let n = s.ambient();
    let d = crate::numeric::dft_matrix(n)?;
    let (left, right) = if conjugate {
        (d.clone(), d.adjoint())
    } else {
        (d.adjoint(), d)
    };
    Ok(left.select_columns(s.indices()) * right.select_rows(s.indices()))
}
