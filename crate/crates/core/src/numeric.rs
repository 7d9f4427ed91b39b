//! Dense complex linear algebra, the unitary DFT, seeded random generation
//! and the factorizations the rest of the crate builds on.
//!
//! Indices are 0-based throughout, so the DFT matrix entry at `(i, j)` is
//! `W^(i*j) / sqrt(n)` with `W = exp(-2*pi*i/n)`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Relative threshold below which a singular value counts as zero when
/// testing for full column rank.
pub const RANK_TOL: f64 = 1e-10;

const SVD_MAX_ITERS: usize = 10_000;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn is_finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry modulus (0 for an empty slice).
pub fn sup_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn l1_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Random numbers

/// Deterministic random stream. Identical seeds give identical sequences on
/// every platform (ChaCha8 keyed by the seed).
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn stream_position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Independent stream for a sub-task, keyed on this stream's seed.
    pub fn child(&self, task_index: u64) -> Rng {
        Rng::new(derive_seed(self.seed, task_index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0);
        (self.uniform() * bound as f64) as usize % bound
    }

    /// Pair of independent standard normals (Box-Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn normal(&mut self) -> f64 {
        self.normal_pair().0
    }

    /// Circularly symmetric complex normal with total variance `variance`.
    pub fn complex_normal(&mut self, variance: f64) -> C64 {
        let (a, b) = self.normal_pair();
        let s = (variance / 2.0).sqrt();
        c(a * s, b * s)
    }

    pub fn complex_normal_vec(&mut self, n: usize, variance: f64) -> CVec {
        CVec::from_fn(n, |_, _| self.complex_normal(variance))
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Child seed derivation: splitmix64 finalizer over the parent seed and the
/// task index.
pub fn derive_seed(parent: u64, task_index: u64) -> u64 {
    let mut z = parent
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(task_index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `m x n` matrix with i.i.d. complex normal entries of total variance
/// `variance` (real and imaginary parts each `variance / 2`). Filled
/// row-major from the stream.
pub fn gaussian_matrix(rng: &mut Rng, m: usize, n: usize, variance: f64) -> Result<CMat> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("gaussian_matrix needs m, n >= 1"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::invalid("variance must be positive"));
    }
    let entries: Vec<C64> = (0..m * n).map(|_| rng.complex_normal(variance)).collect();
    Ok(CMat::from_row_slice(m, n, &entries))
}

// ---------------------------------------------------------------------------
// DFT

/// The unitary DFT matrix `D`.
pub fn dft_matrix(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::invalid("DFT size must be positive"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMat::from_fn(n, n, |i, j| {
        // reduce the exponent first so large n keeps full precision
        let e = ((i as u128 * j as u128) % n as u128) as f64;
        C64::from_polar(scale, -2.0 * PI * e / n as f64)
    }))
}

/// Cached forward/inverse FFT plans for one length, scaled to be unitary.
#[derive(Clone)]
pub struct DftPlan {
    n: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan").field("n", &self.n).finish()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

impl DftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "DFT size must be positive");
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        Self {
            n,
            scale: 1.0 / (n as f64).sqrt(),
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `buf <- D buf`
    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }

    /// `buf <- D* buf`
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
    }

    pub fn apply(&self, x: &CVec, inverse: bool) -> CVec {
        let mut out = x.clone();
        if inverse {
            self.inverse(out.as_mut_slice());
        } else {
            self.forward(out.as_mut_slice());
        }
        out
    }
}

/// `D x`, or `D* x` when `inverse` is set.
pub fn apply_dft(x: &CVec, inverse: bool) -> CVec {
    DftPlan::new(x.len()).apply(x, inverse)
}

// ---------------------------------------------------------------------------
// Factorizations

/// Thin SVD `M = U diag(sigma) V*` with `sigma` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub singular_values: DVector<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.iter().copied().fold(0.0, f64::max)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Numerical rank relative to the largest singular value.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.sigma_max();
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    pub fn reconstruct(&self) -> CMat {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

pub fn svd(m: &CMat) -> Result<Svd> {
    if m.is_empty() {
        return Err(Error::invalid("SVD of an empty matrix"));
    }
    let dec = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERS)
        .ok_or(Error::NoConvergence {
            max_iters: SVD_MAX_ITERS,
        })?;
    let (u, v_t) = match (dec.u, dec.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("SVD requested with both factors"),
    };
    Ok(Svd {
        u,
        singular_values: dec.singular_values,
        v: v_t.adjoint(),
    })
}

/// Smallest singular value; 0-column matrices report `+inf`.
pub fn sigma_min(m: &CMat) -> Result<f64> {
    if m.ncols() == 0 {
        return Ok(f64::INFINITY);
    }
    if m.nrows() < m.ncols() {
        // thin SVD would hide the missing dimensions
        return Ok(0.0);
    }
    Ok(svd(m)?.sigma_min())
}

/// Orthonormal basis (as columns) of the null space of `m`. Singular values
/// at or below `rel_tol * sigma_max` count as zero.
pub fn null_space(m: &CMat, rel_tol: f64) -> Result<CMat> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(CMat::identity(n, n));
    }
    // pad to at least n rows so the thin SVD returns all n right vectors
    let padded = if m.nrows() < n {
        let mut p = CMat::zeros(n, n);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let dec = svd(&padded)?;
    let smax = dec.sigma_max();
    if smax == 0.0 {
        return Ok(CMat::identity(n, n));
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&j| dec.singular_values[j] <= rel_tol * smax)
        .collect();
    Ok(CMat::from_fn(n, keep.len(), |i, j| dec.v[(i, keep[j])]))
}

/// `M (M* M)^{-1} rhs` for `M` with full column rank; `rhs` has one entry
/// per column of `M`. Evaluated through the SVD as `U diag(1/sigma) V* rhs`.
pub fn least_squares_min_norm(m: &CMat, rhs: &CVec) -> Result<CVec> {
    if rhs.len() != m.ncols() {
        return Err(Error::invalid(format!(
            "rhs has length {} but the matrix has {} columns",
            rhs.len(),
            m.ncols()
        )));
    }
    if m.ncols() == 0 {
        return Ok(CVec::zeros(m.nrows()));
    }
    if m.nrows() < m.ncols() {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let dec = svd(m)?;
    let (smax, smin) = (dec.sigma_max(), dec.sigma_min());
    if smax == 0.0 || smin <= RANK_TOL * smax {
        return Err(Error::RankDeficient {
            ratio: if smax == 0.0 { 0.0 } else { smin / smax },
        });
    }
    let mut coef = dec.v.adjoint() * rhs;
    for (z, s) in coef.iter_mut().zip(dec.singular_values.iter()) {
        *z /= *s;
    }
    Ok(&dec.u * coef)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_dft(x: &CVec) -> CVec {
        dft_matrix(x.len()).unwrap() * x
    }

    #[test]
    fn dft_matrix_small_cases() {
        let d1 = dft_matrix(1).unwrap();
        assert_eq!(d1[(0, 0)], c(1.0, 0.0));

        let d4 = dft_matrix(4).unwrap();
        assert!((d4[(1, 1)] - c(0.0, -0.5)).norm() < 1e-15);

        let x = CVec::from_vec(vec![c(1., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]);
        let y = &d4 * &x;
        assert!((y - x).norm() < 1e-14);

        assert!(dft_matrix(0).is_err());
    }

    #[test]
    fn dft_unitary() {
        for n in [1, 2, 3, 7, 16, 60, 128, 512] {
            let d = dft_matrix(n).unwrap();
            let g = d.adjoint() * &d;
            let err = max_abs_diff(&g, &CMat::identity(n, n));
            assert!(err <= 1e-12, "n={n} err={err}");
        }
        // rows of the Gram matrix spread over the largest size
        let n = 4096;
        let d = dft_matrix(n).unwrap();
        for j in (0..n).step_by(127).chain([n - 1]) {
            let row = d.column(j).adjoint() * &d;
            for (k, z) in row.iter().enumerate() {
                let expect = if k == j { 1.0 } else { 0.0 };
                assert!((z - C64::new(expect, 0.0)).norm() <= 1e-12, "n={n} ({j},{k})");
            }
        }
    }

    #[test]
    fn fast_dft_matches_dense() {
        let mut rng = Rng::new(11);
        for n in 1..=64 {
            let x = rng.complex_normal_vec(n, 1.0);
            let dense = dense_dft(&x);
            let fast = apply_dft(&x, false);
            assert!((&fast - &dense).norm() <= 1e-12 * dense.norm().max(1.0), "n={n}");
            let dense_inv = dft_matrix(n).unwrap().adjoint() * &x;
            let fast_inv = apply_dft(&x, true);
            assert!((&fast_inv - &dense_inv).norm() <= 1e-12 * x.norm().max(1.0));
            assert!((fast.norm() - x.norm()).abs() <= 1e-12 * x.norm());
        }
    }

    #[test]
    fn dft_examples() {
        let e0 = CVec::from_vec(vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let y = apply_dft(&e0, false);
        for z in y.iter() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
        let comb = CVec::from_vec(vec![c(1., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]);
        assert!((apply_dft(&comb, false) - &comb).norm() < 1e-15);

        let mut rng = Rng::new(3);
        let x = rng.complex_normal_vec(36, 1.0);
        let back = apply_dft(&apply_dft(&x, false), true);
        assert!((back - &x).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(2024);
        let m = 64;
        let a = gaussian_matrix(&mut rng, 100, 1000, 1.0 / m as f64).unwrap();
        let count = a.len() as f64;
        let mean: C64 = a.iter().sum::<C64>() / count;
        let var = a.iter().map(|z| z.norm_sqr()).sum::<f64>() / count;
        // std of the complex mean is sqrt(var / count)
        let sigma = (1.0 / m as f64 / count).sqrt();
        assert!(mean.norm() < 4.0 * sigma, "mean {mean}");
        assert!((var - 1.0 / 64.0).abs() < 0.05 / 64.0, "var {var}");
        let re_var = a.iter().map(|z| z.re * z.re).sum::<f64>() / count;
        assert!((re_var - 0.5 / 64.0).abs() < 0.05 * 0.5 / 64.0);
    }

    #[test]
    fn gaussian_deterministic() {
        let a = gaussian_matrix(&mut Rng::new(9), 5, 7, 1.0).unwrap();
        let b = gaussian_matrix(&mut Rng::new(9), 5, 7, 1.0).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits()
            && x.im.to_bits() == y.im.to_bits()));
        assert!(gaussian_matrix(&mut Rng::new(9), 0, 7, 1.0).is_err());
    }

    #[test]
    fn child_seeds_differ() {
        let r = Rng::new(5);
        assert_ne!(r.child(0).seed(), r.child(1).seed());
        assert_eq!(r.child(3).seed(), Rng::new(5).child(3).seed());
    }

    #[test]
    fn lsmn_identity_and_orthonormal() {
        let mut rng = Rng::new(1);
        let v = rng.complex_normal_vec(5, 1.0);
        let out = least_squares_min_norm(&CMat::identity(5, 5), &v).unwrap();
        assert!((out - &v).norm() < 1e-13);

        let q = svd(&gaussian_matrix(&mut rng, 8, 3, 1.0).unwrap()).unwrap().u;
        let w = rng.complex_normal_vec(3, 1.0);
        let out = least_squares_min_norm(&q, &w).unwrap();
        assert!((out - &q * &w).norm() < 1e-12);
    }

    #[test]
    fn lsmn_hand_example() {
        // (M*M) = 4, M (1/4) rhs with rhs = 1 gives (1/2, 0)
        let m = CMat::from_row_slice(2, 1, &[c(2., 0.), c(0., 0.)]);
        let out = least_squares_min_norm(&m, &CVec::from_vec(vec![c(1., 0.)])).unwrap();
        assert!((out[0] - c(0.5, 0.)).norm() < 1e-15 && out[1].norm() < 1e-15);
        // feeding M* (1, 0) = 2 reproduces the projection of (1, 0)
        let rhs = m.adjoint() * CVec::from_vec(vec![c(1., 0.), c(0., 0.)]);
        let out = least_squares_min_norm(&m, &rhs).unwrap();
        assert!((out[0] - c(1., 0.)).norm() < 1e-15 && out[1].norm() < 1e-15);
    }

    #[test]
    fn lsmn_normal_equations() {
        let mut rng = Rng::new(77);
        for _ in 0..20 {
            let m = gaussian_matrix(&mut rng, 12, 5, 1.0).unwrap();
            let rhs = rng.complex_normal_vec(5, 1.0);
            let out = least_squares_min_norm(&m, &rhs).unwrap();
            // out = M coef with (M*M) coef = rhs, i.e. M* out = rhs
            let resid = (m.adjoint() * &out - &rhs).norm() / rhs.norm();
            assert!(resid <= 1e-10, "{resid}");
        }
    }

    #[test]
    fn lsmn_rank_deficient() {
        let col = CVec::from_vec(vec![c(1., 0.), c(2., 1.), c(0., 3.)]);
        let m = CMat::from_columns(&[col.clone(), col * c(2.0, 0.0)]);
        let rhs = CVec::from_vec(vec![c(1., 0.), c(1., 0.)]);
        assert!(matches!(
            least_squares_min_norm(&m, &rhs),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn svd_examples() {
        let d = CMat::from_row_slice(2, 2, &[c(3., 0.), c(0., 0.), c(0., 0.), c(0.5, 0.)]);
        let s = svd(&d).unwrap();
        assert!((s.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((s.singular_values[1] - 0.5).abs() < 1e-14);

        let s = svd(&dft_matrix(4).unwrap()).unwrap();
        assert!(s.singular_values.iter().all(|v| (v - 1.0).abs() < 1e-13));

        let x = CVec::from_vec(vec![c(1., 0.), c(0., 1.), c(0., 0.)]);
        let s = svd(&(&x * x.adjoint())).unwrap();
        assert!((s.singular_values[0] - 2.0).abs() < 1e-13);
        assert!(s.singular_values[1].abs() < 1e-13 && s.singular_values[2].abs() < 1e-13);
    }

    #[test]
    fn svd_reconstruction_random() {
        let mut rng = Rng::new(31);
        for &(r, cc) in &[(4, 4), (7, 3), (3, 7), (16, 16)] {
            for _ in 0..100 {
                let m = gaussian_matrix(&mut rng, r, cc, 1.0).unwrap();
                let s = svd(&m).unwrap();
                let err = (s.reconstruct() - &m).norm() / m.norm();
                assert!(err <= 1e-10, "{r}x{cc}: {err}");
                let sv = s.singular_values.as_slice();
                assert!(sv.windows(2).all(|w| w[0] >= w[1]) && sv.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn null_space_wide_matrix() {
        let mut rng = Rng::new(8);
        let a = gaussian_matrix(&mut rng, 3, 7, 1.0).unwrap();
        let ns = null_space(&a, 1e-10).unwrap();
        assert_eq!(ns.ncols(), 4);
        assert!((&a * &ns).norm() < 1e-12);
        assert!(max_abs_diff(&(ns.adjoint() * &ns), &CMat::identity(4, 4)) < 1e-12);
    }
}
