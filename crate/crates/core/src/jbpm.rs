//! Simultaneously sparse and low-rank matrix recovery
//!
//! ```text
//!     min ||X||_* + lambda ||X||_1   s.t.  a_i* X a_i = obs_i
//! ```
//!
//! with the lifted phase-retrieval measurements `|<a_i, x>|^2 = a_i* (x x*) a_i`
//! as the motivating instance. Provides the measurement map and its adjoint,
//! singular value thresholding, a three-way ADMM splitting, rank-one
//! read-out, and the matrix certificate verifier.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numeric::{null_space, svd, CMat, CVec, Rng, C64, RANK_TOL};
use crate::sensing::{SubspaceBasis, INVERTIBILITY_TOL, NULL_SPACE_TOL};
use crate::signal::csgn;
use crate::solver::{soft_threshold, SolverConfig};

/// Equality tolerance of the matrix certificate conditions.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Minimum slack to certify a strict inequality.
pub const STRICT_MARGIN: f64 = 1e-8;

/// Quadratic measurements lifted to linear functionals of `X`.
#[derive(Debug, Clone)]
pub struct LiftedProblem {
    pub vectors: Vec<CVec>,
    pub observations: DVector<f64>,
    pub lambda: f64,
}

impl LiftedProblem {
    pub fn new(vectors: Vec<CVec>, x: &CVec, lambda: f64) -> Result<Self> {
        let observations = lift_measure(&vectors, x)?;
        Ok(Self {
            vectors,
            observations,
            lambda,
        })
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.vectors.is_empty() || n == 0 {
            return Err(Error::invalid("lifted problem needs at least one measurement"));
        }
        if self.vectors.iter().any(|a| a.len() != n) {
            return Err(Error::invalid("measurement vectors differ in length"));
        }
        if self.observations.len() != self.m() {
            return Err(Error::invalid("one observation per measurement vector required"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        Ok(())
    }

    pub fn objective(&self, x: &CMat) -> Result<f64> {
        objective(x, self.lambda)
    }

    /// Relative residual of the linear constraints at `x`.
    pub fn relative_residual(&self, x: &CMat) -> f64 {
        let vals = lifted_apply(&self.vectors, x);
        let r: f64 = vals
            .iter()
            .zip(self.observations.iter())
            .map(|(v, o)| (v - C64::new(*o, 0.0)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let s = self.observations.norm();
        if s == 0.0 {
            r
        } else {
            r / s
        }
    }
}

/// `|<a_i, x>|^2` for every probe.
pub fn lift_measure(vectors: &[CVec], x: &CVec) -> Result<DVector<f64>> {
    if let Some(a) = vectors.iter().find(|a| a.len() != x.len()) {
        return Err(Error::invalid(format!(
            "probe of length {} against signal of length {}",
            a.len(),
            x.len()
        )));
    }
    Ok(DVector::from_iterator(
        vectors.len(),
        vectors.iter().map(|a| a.dotc(x).norm_sqr()),
    ))
}

/// `a_i* X a_i` for every probe.
pub fn lifted_apply(vectors: &[CVec], x: &CMat) -> CVec {
    CVec::from_iterator(vectors.len(), vectors.iter().map(|a| a.dotc(&(x * a))))
}

/// Adjoint of [`lifted_apply`]: `sum_i s_i a_i a_i*`.
pub fn lifted_adjoint(vectors: &[CVec], s: &CVec) -> CMat {
    let n = vectors.first().map_or(0, |v| v.len());
    let mut out = CMat::zeros(n, n);
    for (a, si) in vectors.iter().zip(s.iter()) {
        out += (a * a.adjoint()) * *si;
    }
    out
}

/// Measurement map as an `m x n^2` matrix acting on column-major `vec(X)`.
pub fn lifted_matrix(vectors: &[CVec]) -> CMat {
    let n = vectors.first().map_or(0, |v| v.len());
    CMat::from_fn(vectors.len(), n * n, |i, idx| {
        let (j, k) = (idx % n, idx / n);
        vectors[i][j].conj() * vectors[i][k]
    })
}

pub fn nuclear_norm(x: &CMat) -> Result<f64> {
    Ok(svd(x)?.singular_values.sum())
}

pub fn objective(x: &CMat, lambda: f64) -> Result<f64> {
    Ok(nuclear_norm(x)? + lambda * x.iter().map(|z| z.norm()).sum::<f64>())
}

/// Singular value thresholding: `U max(S - tau, 0) V*`.
pub fn svt(m: &CMat, tau: f64) -> Result<CMat> {
    if !(tau >= 0.0) {
        return Err(Error::invalid("threshold must be non-negative"));
    }
    if tau == 0.0 {
        return Ok(m.clone());
    }
    let mut dec = svd(m)?;
    dec.singular_values
        .iter_mut()
        .for_each(|s| *s = (*s - tau).max(0.0));
    Ok(dec.reconstruct())
}

fn hermitian_part(x: &CMat) -> CMat {
    (x + x.adjoint()) * C64::new(0.5, 0.0)
}

/// Projection onto `{X : a_i* X a_i = obs_i}`, factored once through the SVD
/// of the stacked measurement matrix.
#[derive(Debug, Clone)]
pub struct LiftedProjector {
    n: usize,
    basis: CMat,
    x0: CVec,
}

impl LiftedProjector {
    pub fn new(problem: &LiftedProblem) -> Result<Self> {
        problem.validate()?;
        let n = problem.n();
        let mat = lifted_matrix(&problem.vectors);
        let dec = svd(&mat)?;
        let smax = dec.sigma_max();
        let smin = dec.sigma_min();
        if smax == 0.0 || smin <= RANK_TOL * smax {
            return Err(Error::RankDeficient {
                ratio: if smax == 0.0 { 0.0 } else { smin / smax },
            });
        }
        let obs = problem.observations.map(|o| C64::new(o, 0.0));
        let mut coef = dec.u.adjoint() * obs;
        for (z, s) in coef.iter_mut().zip(dec.singular_values.iter()) {
            *z /= *s;
        }
        let x0 = &dec.v * coef;
        Ok(Self {
            n,
            basis: dec.v,
            x0,
        })
    }

    pub fn project(&self, x: &CMat) -> CMat {
        let v = CVec::from_column_slice(x.as_slice());
        let out = &v - &self.basis * (self.basis.adjoint() * &v) + &self.x0;
        CMat::from_column_slice(self.n, self.n, out.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct MatrixSolverResult {
    pub x_hat: CMat,
    pub objective: f64,
    pub iters: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

/// Three-way ADMM: an affine copy, a nuclear-norm copy (SVT with `1/rho`)
/// and an entrywise l1 copy (soft threshold with `lambda/rho`). With
/// `hermitian` set, iterates are replaced by their Hermitian part after every
/// projection. `lambda = 0` drops the l1 copy.
pub fn solve_jbpm(
    problem: &LiftedProblem,
    cfg: &SolverConfig,
    hermitian: bool,
) -> Result<MatrixSolverResult> {
    problem.validate()?;
    cfg.validate()?;
    let projector = LiftedProjector::new(problem)?;
    let n = problem.n();
    let alpha = cfg.over_relaxation;
    let mut rho = cfg.rho;
    let use_l1 = problem.lambda > 0.0;
    let copies = if use_l1 { 2.0 } else { 1.0 };

    let mut x = projector.project(&CMat::zeros(n, n));
    if hermitian {
        x = hermitian_part(&x);
    }
    let mut z_nuc = x.clone();
    let mut u_nuc = CMat::zeros(n, n);
    let mut z_l1 = x.clone();
    let mut u_l1 = CMat::zeros(n, n);

    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;
    for it in 1..=cfg.max_iters {
        iters = it;
        let mut avg = &z_nuc - &u_nuc;
        if use_l1 {
            avg += &z_l1 - &u_l1;
        }
        avg /= C64::new(copies, 0.0);
        x = projector.project(&avg);
        if hermitian {
            x = hermitian_part(&x);
        }

        let relaxed = &x * C64::new(alpha, 0.0) + &z_nuc * C64::new(1.0 - alpha, 0.0);
        let z_old = z_nuc.clone();
        z_nuc = svt(&(&relaxed + &u_nuc), 1.0 / rho)?;
        u_nuc += &relaxed - &z_nuc;
        let mut r2 = (&x - &z_nuc).norm_squared();
        let mut s2 = (&z_nuc - &z_old).norm_squared();
        let mut zn2 = z_nuc.norm_squared();
        let mut un2 = u_nuc.norm_squared();

        if use_l1 {
            let relaxed = &x * C64::new(alpha, 0.0) + &z_l1 * C64::new(1.0 - alpha, 0.0);
            let z_old = z_l1.clone();
            let tau = problem.lambda / rho;
            z_l1 = (&relaxed + &u_l1).map(|z| soft_threshold(z, tau));
            u_l1 += &relaxed - &z_l1;
            r2 += (&x - &z_l1).norm_squared();
            s2 += (&z_l1 - &z_old).norm_squared();
            zn2 += z_l1.norm_squared();
            un2 += u_l1.norm_squared();
        }

        let xn = (x.norm_squared() * copies).sqrt();
        primal = r2.sqrt() / xn.max(zn2.sqrt()).max(f64::MIN_POSITIVE);
        dual = s2.sqrt() / un2.sqrt().max(f64::MIN_POSITIVE);
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
                u_nuc /= C64::new(scale, 0.0);
                u_l1 /= C64::new(scale, 0.0);
            }
        }
    }
    let result = MatrixSolverResult {
        objective: objective(&x, problem.lambda)?,
        x_hat: x,
        iters,
        primal_residual: primal,
        dual_residual: dual,
        converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::MatrixMaxItersExceeded {
            result: Box::new(result),
        })
    }
}

/// Rank-one read-out `sqrt(s1) u1` and the ratio `s2 / s1`.
pub fn extract_signal(x: &CMat) -> Result<(CVec, f64)> {
    let dec = svd(x)?;
    let s1 = dec.singular_values[0];
    if s1 == 0.0 {
        return Ok((CVec::zeros(x.nrows()), 0.0));
    }
    let s2 = dec.singular_values.get(1).copied().unwrap_or(0.0);
    let u1: CVec = dec.u.column(0).into();
    Ok((u1 * C64::new(s1.sqrt(), 0.0), s2 / s1))
}

/// `min_phi ||e^{i phi} x_hat - x|| / ||x||`, attained at the phase of
/// `x_hat* x`.
pub fn phase_aligned_error(x_hat: &CVec, x: &CVec) -> f64 {
    let inner = x_hat.dotc(x);
    let phase = if inner.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        inner / inner.norm()
    };
    let d = (x_hat * phase - x).norm();
    let s = x.norm();
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

/// Structure of a ground-truth matrix: its entries, support, and the column
/// and row spaces defining the tangent subspace
/// `L = {Y : (I - UU*) Y (I - VV*) = 0}`.
#[derive(Debug, Clone)]
pub struct MatrixVar {
    pub x: CMat,
    /// Column-major mask of the support.
    pub support: Vec<bool>,
    pub u: CMat,
    pub v: CMat,
}

impl MatrixVar {
    pub fn from_matrix(x: CMat, tol: f64) -> Result<Self> {
        if x.nrows() != x.ncols() {
            return Err(Error::invalid("matrix variable must be square"));
        }
        let dec = svd(&x)?;
        let r = dec.singular_values.iter().filter(|&&s| s > tol).count();
        let support = x.iter().map(|z| z.norm() > tol).collect();
        Ok(Self {
            u: dec.u.columns(0, r).into_owned(),
            v: dec.v.columns(0, r).into_owned(),
            support,
            x,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn support_size(&self) -> usize {
        self.support.iter().filter(|&&b| b).count()
    }

    /// `UU* Y + Y VV* - UU* Y VV*`
    pub fn project_l(&self, y: &CMat) -> CMat {
        let pu = &self.u * self.u.adjoint();
        let pv = &self.v * self.v.adjoint();
        &pu * y + y * &pv - &pu * y * &pv
    }

    /// `(I - UU*) Y (I - VV*)`
    pub fn project_l_perp(&self, y: &CMat) -> CMat {
        let n = self.n();
        let id = CMat::identity(n, n);
        let qu = &id - &self.u * self.u.adjoint();
        let qv = &id - &self.v * self.v.adjoint();
        qu * y * qv
    }

    pub fn uv_star(&self) -> CMat {
        &self.u * self.v.adjoint()
    }

    /// Basis (as `vec(Y)` columns) of `{Y : L(Y) = Y, S(Y) = Y}`.
    pub fn intersection_basis(&self) -> Result<SubspaceBasis> {
        let n = self.n();
        let nn = n * n;
        let off: Vec<usize> = (0..nn).filter(|&i| !self.support[i]).collect();
        let mut k = CMat::zeros(nn + off.len(), nn);
        for idx in 0..nn {
            let mut e = CMat::zeros(n, n);
            e[(idx % n, idx / n)] = C64::new(1.0, 0.0);
            let col = self.project_l_perp(&e);
            k.view_mut((0, idx), (nn, 1)).copy_from_slice(col.as_slice());
        }
        for (r, &i) in off.iter().enumerate() {
            k[(nn + r, i)] = C64::new(1.0, 0.0);
        }
        Ok(SubspaceBasis::new(null_space(&k, NULL_SPACE_TOL)?))
    }
}

/// Matrix certificate `(S1, S2, S)`.
#[derive(Debug, Clone)]
pub struct MatrixCert {
    pub s1m: CVec,
    pub s2m: CVec,
    pub sm: CMat,
}

/// Minimum-norm `(S1, S2, S)` meeting the two equality conditions of the
/// matrix certificate, by least squares over the stacked linear system. This
/// is a heuristic candidate; nothing guarantees it satisfies the strict
/// inequalities.
pub fn least_squares_matrix_candidate(
    problem: &LiftedProblem,
    var: &MatrixVar,
    lambda: f64,
) -> Result<MatrixCert> {
    problem.validate()?;
    let n = problem.n();
    let m = problem.m();
    let nn = n * n;
    let on: Vec<usize> = (0..nn).filter(|&i| var.support[i]).collect();
    let rows = nn + on.len();
    let cols = 2 * m + nn;
    let mut k = CMat::zeros(rows, cols);
    for (i, a) in problem.vectors.iter().enumerate() {
        let g = a * a.adjoint();
        let lg = var.project_l(&g);
        k.view_mut((0, i), (nn, 1)).copy_from_slice(lg.as_slice());
        for (r, &idx) in on.iter().enumerate() {
            k[(nn + r, m + i)] = g.as_slice()[idx];
        }
    }
    for idx in 0..nn {
        let mut e = CMat::zeros(n, n);
        e[(idx % n, idx / n)] = C64::new(1.0, 0.0);
        let le = var.project_l(&e);
        k.view_mut((0, 2 * m + idx), (nn, 1)).copy_from_slice(le.as_slice());
    }
    for (r, &idx) in on.iter().enumerate() {
        k[(nn + r, 2 * m + idx)] = C64::new(-1.0, 0.0);
    }
    let mut rhs = CVec::zeros(rows);
    rhs.rows_mut(0, nn).copy_from_slice(var.uv_star().as_slice());
    for (r, &idx) in on.iter().enumerate() {
        rhs[nn + r] = csgn(var.x.as_slice()[idx]) * lambda;
    }
    // pseudo-inverse through the SVD (padded so all columns are covered)
    let padded = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(&k);
        let mut r = CVec::zeros(cols);
        r.rows_mut(0, rows).copy_from(&rhs);
        (p, r)
    } else {
        (k, rhs)
    };
    let dec = svd(&padded.0)?;
    let cut = RANK_TOL * dec.sigma_max();
    let mut coef = dec.u.adjoint() * &padded.1;
    for (z, s) in coef.iter_mut().zip(dec.singular_values.iter()) {
        *z = if *s > cut { *z / *s } else { C64::new(0.0, 0.0) };
    }
    let z = &dec.v * coef;
    Ok(MatrixCert {
        s1m: z.rows(0, m).into_owned(),
        s2m: z.rows(m, m).into_owned(),
        sm: CMat::from_column_slice(n, n, z.rows(2 * m, nn).as_slice()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixCondition {
    pub value: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCertReport {
    /// `L(A*(S1) + S) = UV*`
    pub cond1: MatrixCondition,
    /// `||Lbar(A*(S1) + S)|| < 1` (operator norm)
    pub cond2: MatrixCondition,
    /// `S(A*(S2) - S) = lambda S(sgn X)`
    pub cond3: MatrixCondition,
    /// `||Sbar(A*(S2) - S)||_inf < lambda`
    pub cond4: MatrixCondition,
    /// `A` injective on `{Y : L(Y) = S(Y) = Y}`
    pub cond5: MatrixCondition,
    pub pass: bool,
}

pub fn verify_lemma6(
    cert: &MatrixCert,
    problem: &LiftedProblem,
    var: &MatrixVar,
    lambda: f64,
    intersection: &SubspaceBasis,
) -> Result<MatrixCertReport> {
    problem.validate()?;
    let a1 = lifted_adjoint(&problem.vectors, &cert.s1m) + &cert.sm;
    let a2 = lifted_adjoint(&problem.vectors, &cert.s2m) - &cert.sm;

    let dev1 = crate::numeric::max_abs_diff(&var.project_l(&a1), &var.uv_star());
    let op = svd(&var.project_l_perp(&a1))?.sigma_max();
    let sgn = var.x.map(csgn) * C64::new(lambda, 0.0);
    let mut dev3: f64 = 0.0;
    let mut off4: f64 = 0.0;
    for ((z, t), &on) in a2.iter().zip(sgn.iter()).zip(&var.support) {
        if on {
            dev3 = dev3.max((z - t).norm());
        } else {
            off4 = off4.max(z.norm());
        }
    }
    let inv = if intersection.dim() == 0 {
        f64::INFINITY
    } else {
        let mat = lifted_matrix(&problem.vectors) * intersection.vectors();
        crate::numeric::sigma_min(&mat)?
    };
    let eq = |d: f64| MatrixCondition {
        value: d,
        slack: EQUALITY_TOL - d,
        holds: d <= EQUALITY_TOL,
    };
    let below = |v: f64, bound: f64| MatrixCondition {
        value: v,
        slack: bound - v,
        holds: bound - v >= STRICT_MARGIN,
    };
    let cond1 = eq(dev1);
    let cond2 = below(op, 1.0);
    let cond3 = eq(dev3);
    let cond4 = below(off4, lambda);
    let cond5 = MatrixCondition {
        value: inv,
        slack: inv - INVERTIBILITY_TOL,
        holds: inv > INVERTIBILITY_TOL,
    };
    let pass = cond1.holds && cond2.holds && cond3.holds && cond4.holds && cond5.holds;
    Ok(MatrixCertReport {
        cond1,
        cond2,
        cond3,
        cond4,
        cond5,
        pass,
    })
}

/// Random `k`-sparse complex signal and `m` complex Gaussian probes.
pub fn random_instance(
    rng: &mut Rng,
    n: usize,
    k: usize,
    m: usize,
    lambda: f64,
) -> Result<(CVec, LiftedProblem)> {
    if k == 0 || k > n || m == 0 {
        return Err(Error::invalid("need 1 <= k <= n and m >= 1"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let mut x = CVec::zeros(n);
    for &i in &idx[..k] {
        x[i] = rng.complex_normal(1.0);
    }
    let vectors = (0..m).map(|_| rng.complex_normal_vec(n, 1.0)).collect();
    let problem = LiftedProblem::new(vectors, &x, lambda)?;
    Ok((x, problem))
}
