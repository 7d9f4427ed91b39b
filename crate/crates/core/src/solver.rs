//! Consensus ADMM for joint basis pursuit
//!
//! ```text
//!     min ||x||_1 + lambda ||D x||_1   s.t.  A x = b
//! ```
//!
//! and for the single-basis baselines (time or frequency l1 only). The
//! variable `x` lives on the affine set, a time copy `z1 = x` and a frequency
//! copy `z2 = D x` carry the two l1 terms. Because `D` is unitary, the
//! `x`-update is a Euclidean projection of the averaged back-transformed
//! copies onto `{x : A x = b}`, and each copy update is an entrywise complex
//! soft threshold.
//!
//! With [`Domain::Real`] the unknown is restricted to real vectors: the
//! constraint becomes the stacked real system `[Re A; Im A] x = [Re b; Im b]`
//! and the `x`-update projects the real part of the averaged copies.
//!
//! A projected-subgradient oracle is included for cross-checking objectives.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{l1_norm, norm2, svd, CMat, CVec, DftPlan, Rng, C64, RANK_TOL};
use crate::sensing::SensingEnsemble;
use crate::signal::csgn;

/// Objective variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// `||x||_1 + lambda ||D x||_1`
    Jbp,
    /// `||x||_1`
    BpTime,
    /// `||D x||_1`
    BpFreq,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Jbp => "JBP",
            Mode::BpTime => "BP",
            Mode::BpFreq => "BP_freq",
        }
    }

    fn uses_time(self) -> bool {
        matches!(self, Mode::Jbp | Mode::BpTime)
    }

    fn uses_freq(self) -> bool {
        matches!(self, Mode::Jbp | Mode::BpFreq)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jbp" => Ok(Mode::Jbp),
            "bp" | "bp_time" => Ok(Mode::BpTime),
            "bp_freq" => Ok(Mode::BpFreq),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

/// Field the unknown signal is searched over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    #[default]
    Complex,
    Real,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Complex => "complex",
            Domain::Real => "real",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "complex" => Ok(Domain::Complex),
            "real" => Ok(Domain::Real),
            other => Err(Error::Parse(format!("unknown signal domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JbpProblem {
    pub ens: SensingEnsemble,
    pub b: CVec,
    /// Weight of the frequency term (the time weight is fixed to 1).
    pub lambda: f64,
    pub mode: Mode,
    pub domain: Domain,
}

impl JbpProblem {
    /// Problem whose measurements are `A x_true`.
    pub fn from_signal(ens: SensingEnsemble, x_true: &CVec, lambda: f64, mode: Mode) -> Self {
        let b = ens.a() * x_true;
        Self {
            ens,
            b,
            lambda,
            mode,
            domain: Domain::Complex,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.b.len() != self.ens.m() {
            return Err(Error::invalid(format!(
                "measurement vector has length {} but A has {} rows",
                self.b.len(),
                self.ens.m()
            )));
        }
        if self.mode == Mode::Jbp && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        Ok(())
    }

    /// Objective value of this problem's mode at `x`.
    pub fn objective(&self, x: &CVec) -> f64 {
        let plan = DftPlan::new(x.len());
        let dx = plan.apply(x, false);
        objective_parts(self.mode, self.lambda, x.as_slice(), dx.as_slice())
    }

    pub fn relative_residual(&self, x: &CVec) -> f64 {
        let r = (self.ens.a() * x - &self.b).norm();
        let scale = self.b.norm();
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }
}

fn objective_parts(mode: Mode, lambda: f64, x: &[C64], dx: &[C64]) -> f64 {
    match mode {
        Mode::Jbp => l1_norm(x) + lambda * l1_norm(dx),
        Mode::BpTime => l1_norm(x),
        Mode::BpFreq => l1_norm(dx),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Initial splitting penalty.
    pub rho: f64,
    pub max_iters: usize,
    /// Tolerance on the normalized primal residual.
    pub eps_primal: f64,
    /// Tolerance on the normalized dual residual.
    pub eps_dual: f64,
    /// In `[1, 1.9]`.
    pub over_relaxation: f64,
    /// Rebalance `rho` when the residuals drift apart by more than 10x.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 20_000,
            eps_primal: 1e-9,
            eps_dual: 1e-9,
            over_relaxation: 1.6,
            adaptive_rho: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rho) || !positive(self.eps_primal) || !positive(self.eps_dual) {
            return Err(Error::invalid("rho and tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(1.0..=1.9).contains(&self.over_relaxation) {
            return Err(Error::invalid("over_relaxation must lie in [1, 1.9]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_hat: CVec,
    pub objective: f64,
    pub iters: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

/// Euclidean projection onto `{x : A x = b}`, factored once.
///
/// With the thin SVD `A = U S V*`, the projection is
/// `v - V V* v + x0` where `x0 = V S^-1 U* b` is the min-norm solution.
#[derive(Debug, Clone)]
pub struct AffineProjector {
    n: usize,
    rank: usize,
    /// Row-space basis, column-major `n x rank`.
    basis: Vec<C64>,
    x0: Vec<C64>,
    real: bool,
}

impl AffineProjector {
    pub fn new(ens: &SensingEnsemble, b: &CVec) -> Result<Self> {
        Self::from_system(ens.a(), b)
    }

    /// Projector onto the feasible set of `problem` in its domain.
    pub fn for_problem(problem: &JbpProblem) -> Result<Self> {
        match problem.domain {
            Domain::Complex => Self::new(&problem.ens, &problem.b),
            Domain::Real => {
                let a = problem.ens.a();
                let (m, n) = (a.nrows(), a.ncols());
                let stacked = CMat::from_fn(2 * m, n, |i, j| {
                    let z = a[(i % m, j)];
                    C64::new(if i < m { z.re } else { z.im }, 0.0)
                });
                let rhs = CVec::from_fn(2 * m, |i, _| {
                    let z = problem.b[i % m];
                    C64::new(if i < m { z.re } else { z.im }, 0.0)
                });
                let mut p = Self::from_system(&stacked, &rhs)?;
                p.real = true;
                p.x0.iter_mut().for_each(|z| z.im = 0.0);
                Ok(p)
            }
        }
    }

    fn from_system(a: &CMat, b: &CVec) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if b.len() != m {
            return Err(Error::invalid("measurement length mismatch"));
        }
        let dec = svd(a)?;
        let (smax, smin) = (dec.sigma_max(), dec.sigma_min());
        if smax == 0.0 || smin <= RANK_TOL * smax {
            return Err(Error::RankDeficient {
                ratio: if smax == 0.0 { 0.0 } else { smin / smax },
            });
        }
        let rank = dec.singular_values.len();
        let mut coef = dec.u.adjoint() * b;
        for (z, s) in coef.iter_mut().zip(dec.singular_values.iter()) {
            *z /= *s;
        }
        let x0 = &dec.v * coef;
        Ok(Self {
            n,
            rank,
            basis: dec.v.as_slice().to_vec(),
            x0: x0.as_slice().to_vec(),
            real: false,
        })
    }

    pub fn min_norm_solution(&self) -> CVec {
        CVec::from_column_slice(&self.x0)
    }

    /// In-place projection of `v`. A real projector first drops the
    /// imaginary part.
    pub fn project_in_place(&self, v: &mut [C64]) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        if self.real {
            v.iter_mut().for_each(|z| z.im = 0.0);
        }
        // v <- v - V (V* v)
        for j in 0..self.rank {
            let col = &self.basis[j * n..(j + 1) * n];
            let mut dot = C64::new(0.0, 0.0);
            for (a, x) in col.iter().zip(v.iter()) {
                dot += a.conj() * x;
            }
            for (a, x) in col.iter().zip(v.iter_mut()) {
                *x -= a * dot;
            }
        }
        for (x, z) in v.iter_mut().zip(self.x0.iter()) {
            *x += z;
        }
        if self.real {
            v.iter_mut().for_each(|z| z.im = 0.0);
        }
    }

    /// Removes the row-space component of `g` (projection onto `N(A)`).
    pub fn project_null_in_place(&self, g: &mut [C64]) {
        let n = self.n;
        if self.real {
            g.iter_mut().for_each(|z| z.im = 0.0);
        }
        for j in 0..self.rank {
            let col = &self.basis[j * n..(j + 1) * n];
            let mut dot = C64::new(0.0, 0.0);
            for (a, x) in col.iter().zip(g.iter()) {
                dot += a.conj() * x;
            }
            for (a, x) in col.iter().zip(g.iter_mut()) {
                *x -= a * dot;
            }
        }
        if self.real {
            g.iter_mut().for_each(|z| z.im = 0.0);
        }
    }
}

/// Projection of `v` onto `{x : A x = b}`.
pub fn project_affine(ens: &SensingEnsemble, b: &CVec, v: &CVec) -> Result<CVec> {
    let p = AffineProjector::new(ens, b)?;
    let mut out = v.clone();
    p.project_in_place(out.as_mut_slice());
    Ok(out)
}

/// Proximal map of `tau |z|`: shrinks the modulus by `tau`. Inputs with
/// `|z| <= tau` map to 0.
pub fn soft_threshold(z: C64, tau: f64) -> C64 {
    let r = z.norm();
    if r <= tau {
        C64::new(0.0, 0.0)
    } else {
        z * (1.0 - tau / r)
    }
}

fn sq_dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

fn sq_norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// ADMM state for one l1 copy.
struct Copy {
    z: Vec<C64>,
    u: Vec<C64>,
    z_old: Vec<C64>,
    weight: f64,
}

/// Solve a joint or single-basis pursuit problem. Failure to converge
/// returns `Error::MaxItersExceeded` carrying the last iterate.
pub fn solve(problem: &JbpProblem, cfg: &SolverConfig) -> Result<SolverResult> {
    problem.validate()?;
    cfg.validate()?;
    let projector = AffineProjector::for_problem(problem)?;
    solve_with(problem, cfg, &projector)
}

/// As [`solve`], reusing a projector built by [`AffineProjector::for_problem`]
/// for the same problem.
pub fn solve_with(
    problem: &JbpProblem,
    cfg: &SolverConfig,
    projector: &AffineProjector,
) -> Result<SolverResult> {
    problem.validate()?;
    cfg.validate()?;
    let n = problem.ens.n();
    let plan = DftPlan::new(n);
    let alpha = cfg.over_relaxation;
    let mut rho = cfg.rho;

    let mut x = projector.x0.clone();
    let mut dx = x.clone();
    plan.forward(&mut dx);

    let zero = C64::new(0.0, 0.0);
    let new_copy = |init: &[C64], weight: f64| Copy {
        z: init.to_vec(),
        u: vec![zero; n],
        z_old: vec![zero; n],
        weight,
    };
    let mut time = problem.mode.uses_time().then(|| new_copy(&x, 1.0));
    let freq_weight = if problem.mode == Mode::Jbp { problem.lambda } else { 1.0 };
    let mut freq = problem.mode.uses_freq().then(|| new_copy(&dx, freq_weight));
    let copies = time.is_some() as usize + freq.is_some() as usize;
    let inv_copies = 1.0 / copies as f64;

    let mut tmp = vec![zero; n];
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;

    for it in 1..=cfg.max_iters {
        iters = it;
        // x-update: project the average of the back-transformed copies
        x.iter_mut().for_each(|v| *v = zero);
        if let Some(c) = &time {
            for ((xv, z), u) in x.iter_mut().zip(&c.z).zip(&c.u) {
                *xv += z - u;
            }
        }
        if let Some(c) = &freq {
            for ((t, z), u) in tmp.iter_mut().zip(&c.z).zip(&c.u) {
                *t = z - u;
            }
            plan.inverse(&mut tmp);
            for (xv, t) in x.iter_mut().zip(&tmp) {
                *xv += t;
            }
        }
        x.iter_mut().for_each(|v| *v *= inv_copies);
        projector.project_in_place(&mut x);
        dx.copy_from_slice(&x);
        if freq.is_some() {
            plan.forward(&mut dx);
        }

        // copy updates with over-relaxation
        let mut r2 = 0.0;
        let mut s2 = 0.0;
        let mut zn2 = 0.0;
        let mut un2 = 0.0;
        for (c, target) in [(&mut time, &x), (&mut freq, &dx)] {
            let Some(c) = c.as_mut() else { continue };
            let tau = c.weight / rho;
            c.z_old.copy_from_slice(&c.z);
            for i in 0..n {
                let relaxed = target[i] * alpha + c.z_old[i] * (1.0 - alpha);
                let z = soft_threshold(relaxed + c.u[i], tau);
                c.u[i] += relaxed - z;
                c.z[i] = z;
            }
            r2 += sq_dist(target, &c.z);
            s2 += sq_dist(&c.z, &c.z_old);
            zn2 += sq_norm(&c.z);
            un2 += sq_norm(&c.u);
        }
        let xn = (sq_norm(&x) * copies as f64).sqrt();
        primal = r2.sqrt() / xn.max(zn2.sqrt()).max(f64::MIN_POSITIVE);
        dual = rho * s2.sqrt() / (rho * un2.sqrt()).max(f64::MIN_POSITIVE);

        if primal <= cfg.eps_primal && dual <= cfg.eps_dual {
            converged = true;
            break;
        }

        if cfg.adaptive_rho && it % 10 == 0 {
            let scale = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                for c in [&mut time, &mut freq].into_iter().flatten() {
                    c.u.iter_mut().for_each(|u| *u /= scale);
                }
            }
        }
    }

    let objective = objective_parts(problem.mode, problem.lambda, &x, &dx);
    let result = SolverResult {
        x_hat: CVec::from_vec(x),
        objective,
        iters,
        primal_residual: primal,
        dual_residual: dual,
        converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::MaxItersExceeded {
            result: Box::new(result),
        })
    }
}

/// Ratio of the last to the first oracle step.
pub const ORACLE_STEP_DECAY: f64 = 1e-8;

/// Projected subgradient descent with geometrically decaying steps, from
/// `||x0||` down to `ORACLE_STEP_DECAY * ||x0||` over the run, along the
/// normalized projected subgradient, started from the min-norm feasible
/// point. Reports the best iterate seen; `seed` picks subgradients at exact
/// zeros of the objective's kinks.
pub fn oracle_solve(problem: &JbpProblem, iters: usize, seed: u64) -> Result<SolverResult> {
    problem.validate()?;
    if iters == 0 {
        return Err(Error::invalid("oracle needs at least one iteration"));
    }
    let projector = AffineProjector::for_problem(problem)?;
    let n = problem.ens.n();
    let plan = DftPlan::new(n);
    let mut rng = Rng::new(seed);
    let zero = C64::new(0.0, 0.0);
    let mode = problem.mode;
    let freq_weight = if mode == Mode::Jbp { problem.lambda } else { 1.0 };

    let mut x = projector.x0.clone();
    let mut dx = x.clone();
    plan.forward(&mut dx);
    let mut best = objective_parts(mode, problem.lambda, &x, &dx);
    let mut best_x = x.clone();
    // step scale: distance budget comparable to the start point
    let step0 = norm2(&x).max(1e-3);
    let mut g = vec![zero; n];
    let mut gf = vec![zero; n];

    let sub = |z: C64, rng: &mut Rng| -> C64 {
        if z.norm() == 0.0 {
            // any point of the unit disk is a subgradient of |.| at 0
            let r = rng.uniform().sqrt();
            C64::from_polar(r, 2.0 * std::f64::consts::PI * rng.uniform())
        } else {
            csgn(z)
        }
    };

    for t in 1..=iters {
        g.iter_mut().for_each(|v| *v = zero);
        if mode.uses_time() {
            for (gv, xv) in g.iter_mut().zip(&x) {
                *gv = sub(*xv, &mut rng);
            }
        }
        if mode.uses_freq() {
            for (gv, dv) in gf.iter_mut().zip(&dx) {
                *gv = sub(*dv, &mut rng) * freq_weight;
            }
            plan.inverse(&mut gf);
            for (gv, fv) in g.iter_mut().zip(&gf) {
                *gv += fv;
            }
        }
        projector.project_null_in_place(&mut g);
        let gn = norm2(&g);
        if gn <= 1e-15 {
            break; // zero is a projected subgradient: optimal
        }
        let step = step0 * ORACLE_STEP_DECAY.powf(t as f64 / iters as f64) / gn;
        for (xv, gv) in x.iter_mut().zip(&g) {
            *xv -= gv * step;
        }
        // guard against drift off the affine set
        projector.project_in_place(&mut x);
        dx.copy_from_slice(&x);
        plan.forward(&mut dx);
        let f = objective_parts(mode, problem.lambda, &x, &dx);
        if f < best {
            best = f;
            best_x.copy_from_slice(&x);
        }
    }
    Ok(SolverResult {
        x_hat: CVec::from_vec(best_x),
        objective: best,
        iters,
        primal_residual: 0.0,
        dual_residual: 0.0,
        converged: true,
    })
}

/// Relative recovery error `||x_hat - x|| / ||x||`.
pub fn relative_error(x_hat: &CVec, x_true: &CVec) -> f64 {
    let d = (x_hat - x_true).norm();
    let s = x_true.norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::c;
    use crate::sensing::ensemble_from_seed;
    use crate::signal::dirac_comb;
    use proptest::prelude::*;
    use crate::numeric::Rng;

    #[test]
    fn soft_threshold_values() {
        assert!((soft_threshold(c(2., 0.), 1.0) - c(1., 0.)).norm() < 1e-15);
        assert_eq!(soft_threshold(c(0.5, 0.), 1.0), c(0., 0.));
        assert!((soft_threshold(c(3., 4.), 1.0) - c(2.4, 3.2)).norm() <= 1e-12);
        assert_eq!(soft_threshold(c(1., 0.), 1.0), c(0., 0.));
        assert_eq!(soft_threshold(c(0., 0.), 0.0), c(0., 0.));
    }

    #[test]
    fn projection_properties() {
        let ens = ensemble_from_seed(3, 5, 12).unwrap();
        let mut rng = Rng::new(4);
        let x0 = rng.complex_normal_vec(12, 1.0);
        let b = ens.a() * &x0;

        // already feasible
        let p = project_affine(&ens, &b, &x0).unwrap();
        assert!((&p - &x0).norm() <= 1e-10 * x0.norm());

        // min-norm solution from zero
        let p = project_affine(&ens, &b, &CVec::zeros(12)).unwrap();
        let a = ens.a();
        let closed = a.adjoint() * (a * a.adjoint()).try_inverse().unwrap() * &b;
        assert!((&p - &closed).norm() <= 1e-10 * closed.norm());

        // feasibility, optimality and idempotence
        let v = rng.complex_normal_vec(12, 4.0);
        let p1 = project_affine(&ens, &b, &v).unwrap();
        assert!((a * &p1 - &b).norm() <= 1e-10 * b.norm());
        let p2 = project_affine(&ens, &b, &p1).unwrap();
        assert!((&p2 - &p1).norm() <= 1e-10 * p1.norm());
        // v - p1 is orthogonal to the null space
        let w = project_affine(&ens, &b, &(&p1 + rng.complex_normal_vec(12, 1.0))).unwrap() - &p1;
        assert!((&v - &p1).dotc(&w).norm() <= 1e-10 * v.norm() * w.norm().max(1.0));
    }

    #[test]
    fn rank_deficient_projection() {
        let mut a = crate::numeric::CMat::zeros(2, 4);
        a[(0, 0)] = c(1., 0.);
        a[(1, 0)] = c(2., 0.);
        let ens = SensingEnsemble::from_matrix(a, 0).unwrap();
        let b = CVec::from_vec(vec![c(1., 0.), c(2., 0.)]);
        assert!(matches!(
            project_affine(&ens, &b, &CVec::zeros(4)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            over_relaxation: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn square_system_recovers_exactly() {
        let comb = dirac_comb(16, 4, 1, 3).unwrap();
        let ens = ensemble_from_seed(8, 16, 16).unwrap();
        for mode in [Mode::Jbp, Mode::BpTime, Mode::BpFreq] {
            let p = JbpProblem::from_signal(ens.clone(), comb.x(), 1.0, mode);
            let r = solve(&p, &SolverConfig::default()).unwrap();
            assert!(relative_error(&r.x_hat, comb.x()) <= 1e-8, "{mode}");
        }
    }

    #[test]
    fn small_comb_jbp() {
        let comb = dirac_comb(4, 2, 0, 0).unwrap();
        let ens = ensemble_from_seed(1, 3, 4).unwrap();
        let p = JbpProblem::from_signal(ens, comb.x(), 1.0, Mode::Jbp);
        let r = solve(&p, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(p.relative_residual(&r.x_hat) <= 1e-6);
        assert!(r.objective <= p.objective(comb.x()) + 1e-6);
    }

    #[test]
    fn bp_time_recovers_one_sparse() {
        let n = 64;
        let mut x = CVec::zeros(n);
        x[17] = c(0.3, -1.2);
        for seed in 0..5 {
            let ens = ensemble_from_seed(seed, 12, n).unwrap();
            let p = JbpProblem::from_signal(ens, &x, 1.0, Mode::BpTime);
            let r = solve(&p, &SolverConfig::default()).unwrap();
            assert!(relative_error(&r.x_hat, &x) <= 1e-6);
        }
    }

    #[test]
    fn max_iters_carries_iterate() {
        let comb = dirac_comb(16, 4, 0, 0).unwrap();
        let ens = ensemble_from_seed(2, 3, 16).unwrap();
        let p = JbpProblem::from_signal(ens, comb.x(), 1.0, Mode::Jbp);
        let cfg = SolverConfig {
            max_iters: 3,
            ..Default::default()
        };
        match solve(&p, &cfg) {
            Err(Error::MaxItersExceeded { result }) => {
                assert_eq!(result.iters, 3);
                assert_eq!(result.x_hat.len(), 16);
                assert!(!result.converged);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_square_and_agrees() {
        let comb = dirac_comb(8, 4, 0, 0).unwrap();
        let ens = ensemble_from_seed(5, 8, 8).unwrap();
        let p = JbpProblem::from_signal(ens, comb.x(), 1.0, Mode::Jbp);
        let r = oracle_solve(&p, 50, 1).unwrap();
        assert!(relative_error(&r.x_hat, comb.x()) <= 1e-3);

        // never worse than the min-norm start, and close to the ADMM value
        let ens = ensemble_from_seed(6, 4, 16).unwrap();
        let comb = dirac_comb(16, 4, 0, 0).unwrap();
        let p = JbpProblem::from_signal(ens, comb.x(), 1.0, Mode::Jbp);
        let start = p.objective(&AffineProjector::for_problem(&p).unwrap().min_norm_solution());
        let admm = solve(&p, &SolverConfig::default()).unwrap();
        for iters in [1, 10, 20_000] {
            let r = oracle_solve(&p, iters, 3).unwrap();
            assert!(r.objective <= start + 1e-12);
            assert!(r.objective >= admm.objective - 1e-6);
        }
        let r = oracle_solve(&p, 20_000, 3).unwrap();
        assert!((r.objective - admm.objective).abs() <= 1e-6 * (1.0 + admm.objective));
    }

    #[test]
    fn mode_parse() {
        assert_eq!("JBP".parse::<Mode>().unwrap(), Mode::Jbp);
        assert_eq!("bp".parse::<Mode>().unwrap(), Mode::BpTime);
        assert_eq!("bp_freq".parse::<Mode>().unwrap(), Mode::BpFreq);
        assert!("lasso".parse::<Mode>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn soft_threshold_is_shrinkage(re in -10f64..10., im in -10f64..10., tau in 0f64..5.) {
            let z = c(re, im);
            let out = soft_threshold(z, tau);
            let expect = (z.norm() - tau).max(0.0);
            prop_assert!((out.norm() - expect).abs() <= 1e-12);
            if out.norm() > 0.0 {
                prop_assert!((csgn(out) - csgn(z)).norm() <= 1e-12);
            }
        }
    }
}
