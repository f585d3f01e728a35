//! Dense linear algebra, covariance construction, Gaussian sampling and
//! scalar transforms shared by every other module.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, JobSvd, SVDDC, UPLO};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Relative singular-value cutoff used when no explicit tolerance is given.
pub const DEFAULT_SVD_RTOL: f64 = 1e-10;

/// Thin SVD `m = u * diag(s) * vt` with `u: (r, k)`, `s: (k,)`, `vt: (k, c)`
/// where `k = min(r, c)`. Wraps the LAPACK divide-and-conquer driver.
pub fn svd_thin(m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        let k = rows.min(cols);
        return Ok((Array2::zeros((rows, k)), Array1::zeros(k), Array2::zeros((k, cols))));
    }
    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Linalg("svd did not return u".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd did not return vt".into()))?;
    Ok((u, s, vt))
}

/// Number of singular values treated as nonzero under a relative cutoff.
pub fn svd_rank(s: &Array1<f64>, rel_tol: f64) -> usize {
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// `rel_tol * s_max` are treated as zero.
pub fn pseudoinverse(m: &Array2<f64>, rel_tol: f64) -> Result<Array2<f64>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("pseudoinverse: non-finite entries".into()));
    }
    let (rows, cols) = m.dim();
    let (u, s, vt) = svd_thin(m)?;
    let rank = svd_rank(&s, rel_tol);
    if rank == 0 {
        return Ok(Array2::zeros((cols, rows)));
    }
    // pinv = V_r diag(1/s_r) U_r^T
    let u_r = u.slice(s![.., ..rank]);
    let vt_r = vt.slice(s![..rank, ..]);
    let inv_s = s.slice(s![..rank]).mapv(|x| 1.0 / x);
    let scaled = &vt_r.t() * &inv_s; // (cols, rank) with columns scaled
    Ok(scaled.dot(&u_r.t()))
}

/// Eigendecomposition of a symmetric matrix, ascending eigenvalues.
/// The input is symmetrized as `(M + M^T) / 2` after an `1e-8` symmetry check.
pub fn eigh_sym(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("eigh: non-finite entries".into()));
    }
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::DimensionMismatch(format!("eigh: matrix is {r}x{c}")));
    }
    let asym = (m - &m.t()).iter().cloned().fold(0.0_f64, |a, x| a.max(x.abs()));
    let scale = m.iter().cloned().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    if asym > 1e-8 * scale {
        return Err(Error::InvalidParameter(format!(
            "eigh: matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    let sym = (m + &m.t()) * 0.5;
    let (vals, vecs) = sym.eigh(UPLO::Lower)?;
    Ok((vals, vecs))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_sym(m: &Array2<f64>) -> Result<f64> {
    let (vals, _) = eigh_sym(m)?;
    vals.iter().cloned().fold(Ok(f64::INFINITY), |acc, v| acc.map(|a| a.min(v)))
}

/// Covariance matrix construction recipes for synthetic designs.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKind {
    /// The identity matrix `I_p`.
    Identity { p: usize },
    /// `Sigma_ij = rho^|i - j|` with `|rho| < 1`.
    Toeplitz { p: usize, rho: f64 },
    /// `D^{-1/2} (L + c I)^{-1} D^{-1/2}` with `D = diag((L + c I)^{-1})`,
    /// so that all covariates have unit variance.
    LaplacianInverse { graph: Graph, c: f64 },
}

/// A symmetric PSD covariance matrix together with the recipe that built it.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    matrix: Array2<f64>,
    kind: CovarianceKind,
}

impl CovarianceMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> &CovarianceKind {
        &self.kind
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest eigenvalue.
    pub fn gamma_max(&self) -> Result<f64> {
        let (vals, _) = eigh_sym(&self.matrix)?;
        Ok(vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Symmetric square root `V diag(sqrt(max(w, 0))) V^T`. Eigenvalues in
    /// `[-1e-10, 0)` are clipped to zero; anything more negative is rejected.
    pub fn sqrt(&self) -> Result<Array2<f64>> {
        let (vals, vecs) = eigh_sym(&self.matrix)?;
        if vals.iter().any(|&v| v < -1e-10) {
            return Err(Error::InvalidParameter(format!(
                "covariance has eigenvalue {:.3e} below -1e-10",
                vals.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        let roots = vals.mapv(|v| v.max(0.0).sqrt());
        let scaled = &vecs * &roots; // columns scaled by sqrt eigenvalues
        Ok(scaled.dot(&vecs.t()))
    }
}

/// Build a covariance matrix from its construction descriptor.
pub fn covariance(kind: CovarianceKind) -> Result<CovarianceMatrix> {
    let matrix = match &kind {
        CovarianceKind::Identity { p } => Array2::eye(*p),
        CovarianceKind::Toeplitz { p, rho } => {
            if rho.abs() >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "toeplitz covariance requires |rho| < 1, got {rho}"
                )));
            }
            Array2::from_shape_fn((*p, *p), |(i, j)| {
                rho.powi((i as i32 - j as i32).abs())
            })
        }
        CovarianceKind::LaplacianInverse { graph, c } => {
            if *c <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "laplacian_inverse covariance requires c > 0, got {c}"
                )));
            }
            let p = graph.p();
            let shifted = graph.laplacian() + Array2::<f64>::eye(p) * *c;
            // (L + cI) is symmetric positive definite for c > 0.
            let (vals, vecs) = eigh_sym(&shifted)?;
            let inv = {
                let scaled = &vecs * &vals.mapv(|v| 1.0 / v);
                scaled.dot(&vecs.t())
            };
            let d_inv_sqrt = inv.diag().mapv(|v| 1.0 / v.sqrt());
            let mut out = inv;
            for ((i, j), v) in out.indexed_iter_mut() {
                *v *= d_inv_sqrt[i] * d_inv_sqrt[j];
            }
            // exact symmetry regardless of rounding order
            (&out + &out.t()) * 0.5
        }
    };
    Ok(CovarianceMatrix { matrix, kind })
}

/// Deterministic, platform-stable random generator. Every stochastic
/// operation in the crate takes one of these (or a raw seed) explicitly.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, inner: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed schedule for parallel workers: worker `i` gets `base + i`.
    pub fn derive(base: u64, i: u64) -> u64 {
        base.wrapping_add(i)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Fisher-Yates shuffle driven by this generator.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.inner.gen_range(0..=i);
            xs.swap(i, j);
        }
    }

    pub fn normal_vector(&mut self, n: usize) -> Array1<f64> {
        Array1::from_shape_fn(n, |_| self.standard_normal())
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Draw `n` i.i.d. `N(0, Sigma)` rows. Uses the eigen square root of
/// `Sigma`, which also handles singular covariances.
pub fn sample_gaussian_rows(
    n: usize,
    sigma: &CovarianceMatrix,
    rng: &mut SeededRng,
) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample_gaussian_rows: n must be >= 1".into()));
    }
    let p = sigma.p();
    let root = sigma.sqrt()?;
    let z = Array2::from_shape_fn((n, p), |_| rng.standard_normal());
    Ok(z.dot(&root)) // root is symmetric
}

/// Variance-stabilizing transform for Poisson counts: `x -> 2 sqrt(x + 3/8)`.
pub fn anscombe(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("anscombe requires x >= 0, got {x}")));
    }
    Ok(2.0 * (x + 0.375).sqrt())
}
