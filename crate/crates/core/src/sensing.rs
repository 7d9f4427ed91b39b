//! Gaussian measurement ensembles, column restrictions, the frequency-domain
//! composite `B = A D*`, and the conditioning/invertibility checks used by the
//! certificate verifier.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::numeric::{dft_matrix, gaussian_matrix, null_space, sigma_min, CMat, Rng};
use crate::signal::SupportSet;

/// Tolerance for "invertible over a subspace".
pub const INVERTIBILITY_TOL: f64 = 1e-8;

/// Relative cut for the null space of the stacked support constraints.
pub const NULL_SPACE_TOL: f64 = 1e-10;

/// `m x n` complex Gaussian matrix (variance `1/m`) and its frequency
/// composite `B = A D*`. Reproducible from `(seed, m, n)`.
#[derive(Debug, Clone)]
pub struct SensingEnsemble {
    a: CMat,
    b: CMat,
    seed: u64,
}

impl SensingEnsemble {
    pub fn from_matrix(a: CMat, seed: u64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::invalid("ensemble needs m, n >= 1"));
        }
        let b = &a * dft_matrix(a.ncols())?.adjoint();
        Ok(Self { a, b, seed })
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Same feasible set with every row scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a: &self.a * crate::numeric::c(factor, 0.0),
            b: &self.b * crate::numeric::c(factor, 0.0),
            seed: self.seed,
        }
    }
}

pub fn make_ensemble(rng: &mut Rng, m: usize, n: usize) -> Result<SensingEnsemble> {
    let seed = rng.seed();
    let a = gaussian_matrix(rng, m, n, 1.0 / m as f64)?;
    SensingEnsemble::from_matrix(a, seed)
}

/// Ensemble drawn from a fresh stream seeded with `seed`.
pub fn ensemble_from_seed(seed: u64, m: usize, n: usize) -> Result<SensingEnsemble> {
    make_ensemble(&mut Rng::new(seed), m, n)
}

/// Columns of `m` listed in `s`, in sorted order.
pub fn restrict_columns(m: &CMat, s: &SupportSet) -> Result<CMat> {
    if let Some(&bad) = s.indices().iter().find(|&&j| j >= m.ncols()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            dim: m.ncols(),
        });
    }
    Ok(m.select_columns(s.indices()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodconReport {
    pub sigma_min_a: f64,
    pub sigma_min_b: f64,
    pub pass: bool,
}

/// Checks `sigma_min(A_S1) >= 1/sqrt(2)` and `sigma_min(B_S2) >= 1/sqrt(2)`.
pub fn check_goodcon(
    ens: &SensingEnsemble,
    s1: &SupportSet,
    s2: &SupportSet,
) -> Result<GoodconReport> {
    let m = ens.m();
    if s1.len() > m || s2.len() > m {
        return Err(Error::invalid(format!(
            "support sizes ({}, {}) exceed the number of measurements {m}",
            s1.len(),
            s2.len()
        )));
    }
    let sa = sigma_min(&restrict_columns(ens.a(), s1)?)?;
    let sb = sigma_min(&restrict_columns(ens.b(), s2)?)?;
    Ok(GoodconReport {
        sigma_min_a: sa,
        sigma_min_b: sb,
        pass: sa >= FRAC_1_SQRT_2 && sb >= FRAC_1_SQRT_2,
    })
}

/// Orthonormal basis of a subspace, stored as matrix columns.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    vectors: CMat,
}

impl SubspaceBasis {
    pub fn new(vectors: CMat) -> Self {
        Self { vectors }
    }

    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.vectors.nrows()
    }
}

/// Basis of `{v : v vanishes off S1 and D v vanishes off S2}`, the null space
/// of the rows of `I` indexed by the complement of `S1` stacked on the rows of
/// `D` indexed by the complement of `S2`.
pub fn intersection_basis(s1: &SupportSet, s2: &SupportSet, n: usize) -> Result<SubspaceBasis> {
    if s1.ambient() != n || s2.ambient() != n {
        return Err(Error::invalid("supports must live in the same ambient dimension"));
    }
    let d = dft_matrix(n)?;
    let off1 = s1.complement();
    let off2 = s2.complement();
    let rows = off1.len() + off2.len();
    if rows == 0 {
        return Ok(SubspaceBasis::new(CMat::identity(n, n)));
    }
    let mut k = CMat::zeros(rows, n);
    for (r, &i) in off1.indices().iter().enumerate() {
        k[(r, i)] = crate::numeric::c(1.0, 0.0);
    }
    for (r, &i) in off2.indices().iter().enumerate() {
        k.row_mut(off1.len() + r).copy_from(&d.row(i));
    }
    Ok(SubspaceBasis::new(null_space(&k, NULL_SPACE_TOL)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertibilityReport {
    /// `+inf` for a zero-dimensional subspace.
    pub sigma_min: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Whether `A` is injective on the span of `basis`.
pub fn check_invertibility_on(a: &CMat, basis: &SubspaceBasis) -> Result<InvertibilityReport> {
    if basis.dim() == 0 {
        return Ok(InvertibilityReport {
            sigma_min: f64::INFINITY,
            tol: INVERTIBILITY_TOL,
            pass: true,
        });
    }
    if basis.ambient() != a.ncols() {
        return Err(Error::invalid("basis dimension does not match the matrix"));
    }
    let s = sigma_min(&(a * basis.vectors()))?;
    Ok(InvertibilityReport {
        sigma_min: s,
        tol: INVERTIBILITY_TOL,
        pass: s > INVERTIBILITY_TOL,
    })
}
