//! Quantities driven by the estimator's theory: the closed-form tuning
//! parameters, the minimum-eigenvalue curve of the regularized covariance,
//! and a Monte Carlo verifier for the restricted-eigenvalue event.

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{graph_spectra, Graph};
use crate::numerics::{min_eigenvalue_sym, CovarianceMatrix, SeededRng, DEFAULT_SVD_RTOL};

/// Theory-driven tuning parameters and the inputs they came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryTuning {
    /// `32 sigma rho sqrt(gmax(Sigma) log(p) / n)`
    pub lambda1: f64,
    /// `lambda1 / (8 ||Gamma b*||_inf)`, the largest value the theory
    /// allows; +infinity when the signal has no jumps at all.
    pub lambda2: f64,
    pub sigma: f64,
    pub gmax_sigma: f64,
    pub rho: f64,
    pub n: usize,
    pub p: usize,
    pub tv_linf: f64,
}

/// Evaluate the closed-form tuning rules for a known model.
pub fn theoretical_lambdas(
    sigma: f64,
    cov: &CovarianceMatrix,
    g: &Graph,
    n: usize,
    beta_star: &Array1<f64>,
) -> Result<TheoryTuning> {
    if sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let p = g.p();
    if p < 2 {
        return Err(Error::InvalidParameter("p must be >= 2".into()));
    }
    if beta_star.len() != p || cov.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "graph has {p} vertices, beta_star has {} and covariance is {}x{}",
            beta_star.len(),
            cov.p(),
            cov.p()
        )));
    }
    let gmax = cov.gamma_max()?;
    let spectra = graph_spectra(g, DEFAULT_SVD_RTOL)?;
    let tv_linf = g
        .edges()
        .iter()
        .map(|&(i, j)| (beta_star[i] - beta_star[j]).abs())
        .fold(0.0_f64, f64::max);
    let lambda1 = 32.0 * sigma * spectra.rho * (gmax * (p as f64).ln() / n as f64).sqrt();
    let lambda2 = if sigma == 0.0 {
        0.0
    } else if tv_linf > 0.0 {
        lambda1 / (8.0 * tv_linf)
    } else {
        f64::INFINITY
    };
    Ok(TheoryTuning { lambda1, lambda2, sigma, gmax_sigma: gmax, rho: spectra.rho, n, p, tv_linf })
}

/// `gmin((1/64) Sigma + lambda2 L)` sampled over a grid, with per-point
/// flags against the `lambda2 / 64` and `sqrt(lambda2) / 64` reference
/// curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenCurve {
    pub lambda2: Vec<f64>,
    pub gmin: Vec<f64>,
    pub ge_linear: Vec<bool>,
    pub ge_sqrt: Vec<bool>,
}

pub fn min_eigen_curve(
    sigma: &Array2<f64>,
    laplacian: &Array2<f64>,
    lambda2_grid: &[f64],
) -> Result<EigenCurve> {
    if sigma.dim() != laplacian.dim() || sigma.nrows() != sigma.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {:?}, laplacian is {:?}",
            sigma.dim(),
            laplacian.dim()
        )));
    }
    if lambda2_grid.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter("lambda2 grid must be finite and nonnegative".into()));
    }
    if lambda2_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("lambda2 grid must be ascending".into()));
    }
    let base = sigma / 64.0;
    let mut gmin = Vec::with_capacity(lambda2_grid.len());
    let mut ge_linear = Vec::with_capacity(lambda2_grid.len());
    let mut ge_sqrt = Vec::with_capacity(lambda2_grid.len());
    for &l2 in lambda2_grid {
        let m = &base + &(laplacian * l2);
        let value = min_eigenvalue_sym(&m)?;
        gmin.push(value);
        ge_linear.push(value + 1e-12 >= l2 / 64.0);
        ge_sqrt.push(value + 1e-12 >= l2.sqrt() / 64.0);
    }
    Ok(EigenCurve { lambda2: lambda2_grid.to_vec(), gmin, ge_linear, ge_sqrt })
}

/// Fraction of `(trial, direction)` pairs satisfying the restricted
/// eigenvalue inequality
/// `||X v|| / sqrt(n) >= (1/4) ||Sigma^{1/2} v|| - 3 sqrt(gmax nc / n) ||v||
///  - 6 sqrt(2) rho sqrt(gmax log(p) / n) ||Gamma v||_1`
/// for fresh Gaussian designs. Directions mix jump-sparse, smooth and
/// dense families so both error regimes of the bound are exercised.
pub fn re_condition_trial(
    cov: &CovarianceMatrix,
    g: &Graph,
    n: usize,
    n_trials: usize,
    n_directions: usize,
    seed: u64,
) -> Result<f64> {
    if n < 10 {
        return Err(Error::InvalidParameter("the bound assumes n >= 10".into()));
    }
    if g.m() < 2 {
        return Err(Error::InvalidParameter("the bound assumes m >= 2 edges".into()));
    }
    if n_trials == 0 || n_directions == 0 {
        return Err(Error::InvalidParameter("need at least one trial and direction".into()));
    }
    let p = g.p();
    if cov.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{} for a graph on {p} vertices",
            cov.p(),
            cov.p()
        )));
    }
    let spectra = graph_spectra(g, DEFAULT_SVD_RTOL)?;
    let gamma = g.incidence_matrix();
    let sqrt_sigma = cov.sqrt()?;
    let gmax = cov.gamma_max()?;
    let nc = spectra.n_components as f64;
    let coef_l2 = 3.0 * (gmax * nc / n as f64).sqrt();
    let coef_tv = 6.0 * 2f64.sqrt() * spectra.rho * (gmax * (p as f64).ln() / n as f64).sqrt();

    let mut rng = SeededRng::new(seed);
    let mut passes = 0usize;
    for _ in 0..n_trials {
        let x = crate::numerics::sample_gaussian_rows(n, cov, &mut rng)?;
        for d in 0..n_directions {
            let v = sample_direction(p, d % 3, &mut rng);
            let lhs = {
                let xv = x.dot(&v);
                xv.dot(&xv).sqrt() / (n as f64).sqrt()
            };
            let sv = sqrt_sigma.dot(&v);
            let tv = gamma.dot(&v).iter().map(|x| x.abs()).sum::<f64>();
            let rhs = 0.25 * sv.dot(&sv).sqrt() - coef_l2 * v.dot(&v).sqrt() - coef_tv * tv;
            if lhs >= rhs {
                passes += 1;
            }
        }
    }
    Ok(passes as f64 / (n_trials * n_directions) as f64)
}

fn sample_direction(p: usize, family: usize, rng: &mut SeededRng) -> Array1<f64> {
    match family {
        // staircase with 1..=3 jumps in vertex order
        0 => {
            let jumps = 1 + rng.below(3.min(p - 1));
            let mut cuts: Vec<usize> = (0..jumps).map(|_| 1 + rng.below(p - 1)).collect();
            cuts.sort_unstable();
            cuts.dedup();
            let mut v = Array1::zeros(p);
            let mut level = rng.standard_normal();
            let mut next = 0;
            for i in 0..p {
                if next < cuts.len() && cuts[next] == i {
                    level += rng.standard_normal();
                    next += 1;
                }
                v[i] = level;
            }
            v
        }
        // slowly varying sinusoid
        1 => {
            let freq = 1 + rng.below(2);
            let phase = rng.uniform() * std::f64::consts::TAU;
            Array1::from_shape_fn(p, |i| {
                (std::f64::consts::TAU * freq as f64 * i as f64 / p as f64 + phase).sin()
            })
        }
        // dense Gaussian
        _ => rng.normal_vector(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{covariance, eigh_sym, CovarianceKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_formulas_on_the_star_graph() {
        let g = Graph::star(4).unwrap();
        let cov = covariance(CovarianceKind::Identity { p: 4 }).unwrap();
        let beta = array![0.0, 1.0, 1.0, 1.0];
        let t = theoretical_lambdas(1.0, &cov, &g, 100, &beta).unwrap();
        let expected = 32.0 * 0.75f64.sqrt() * (4f64.ln() / 100.0).sqrt();
        assert_abs_diff_eq!(t.lambda1, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(t.lambda1, 3.26301, epsilon = 1e-4);
        assert_abs_diff_eq!(t.lambda2, expected / 8.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.rho, 0.75f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn lambda2_from_linf_and_degenerate_cases() {
        let g = Graph::chain(3).unwrap();
        let cov = covariance(CovarianceKind::Identity { p: 3 }).unwrap();
        // ||Gamma b||_inf = 5 with lambda1 = 4 gives lambda2 = 0.1
        let beta = array![0.0, 5.0, 5.0];
        let t = theoretical_lambdas(1.0, &cov, &g, 50, &beta).unwrap();
        assert_abs_diff_eq!(t.lambda2, t.lambda1 / 40.0, epsilon = 1e-12);

        // zero noise: both tuning parameters vanish
        let t = theoretical_lambdas(0.0, &cov, &g, 50, &beta).unwrap();
        assert_eq!(t.lambda1, 0.0);
        assert_eq!(t.lambda2, 0.0);

        // constant signal: lambda2 is unbounded
        let constant = array![1.0, 1.0, 1.0];
        let t = theoretical_lambdas(1.0, &cov, &g, 50, &constant).unwrap();
        assert!(t.lambda2.is_infinite());

        assert!(theoretical_lambdas(-1.0, &cov, &g, 50, &beta).is_err());
    }

    #[test]
    fn lambda1_is_homogeneous_in_sigma() {
        let g = Graph::chain(6).unwrap();
        let cov = covariance(CovarianceKind::Toeplitz { p: 6, rho: 0.4 }).unwrap();
        let beta = array![0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let t1 = theoretical_lambdas(1.0, &cov, &g, 80, &beta).unwrap();
        let t3 = theoretical_lambdas(3.0, &cov, &g, 80, &beta).unwrap();
        assert_abs_diff_eq!(t3.lambda1, 3.0 * t1.lambda1, epsilon = 1e-12);
    }

    #[test]
    fn eigen_curve_starts_at_gmin_over_64() {
        let g = Graph::chain(5).unwrap();
        let cov = covariance(CovarianceKind::Toeplitz { p: 5, rho: 0.6 }).unwrap();
        let curve = min_eigen_curve(cov.matrix(), &g.laplacian(), &[0.0, 0.25, 0.5, 1.0]).unwrap();
        let gmin_sigma = min_eigenvalue_sym(cov.matrix()).unwrap();
        assert_abs_diff_eq!(curve.gmin[0], gmin_sigma / 64.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_covariance_caps_the_curve_at_one_over_64() {
        // with Sigma = I the kernel direction of L pins the minimum at 1/64
        let g = Graph::chain(6).unwrap();
        let eye: Array2<f64> = Array2::eye(6);
        let curve = min_eigen_curve(&eye, &g.laplacian(), &[0.5]).unwrap();
        assert_abs_diff_eq!(curve.gmin[0], 1.0 / 64.0, epsilon = 1e-12);
    }

    #[test]
    fn commuting_construction_matches_closed_form() {
        // Sigma shares the chain-3 Laplacian eigenbasis (eigenvalues 0, 1, 3),
        // so gmin((1/64) Sigma + l2 L) = min_i(s_i / 64 + l2 mu_i) exactly.
        let g = Graph::chain(3).unwrap();
        let l = g.laplacian();
        let (vals, vecs) = eigh_sym(&l).unwrap();
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 3.0, epsilon = 1e-12);
        let s = array![64.0, 0.64, 0.64];
        let sigma = vecs.dot(&Array2::from_diag(&s)).dot(&vecs.t());
        let grid = [0.0, 0.2, 0.5, 0.99, 2.0];
        let curve = min_eigen_curve(&sigma, &l, &grid).unwrap();
        for (i, &l2) in grid.iter().enumerate() {
            let closed_form = [
                s[0] / 64.0 + l2 * vals[0],
                s[1] / 64.0 + l2 * vals[1],
                s[2] / 64.0 + l2 * vals[2],
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(curve.gmin[i], closed_form, epsilon = 1e-9);
        }
        // grows linearly until the large kernel eigenvalue dominates
        assert!(curve.gmin[1] > curve.gmin[0]);
        assert_abs_diff_eq!(curve.gmin[4], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn eigen_curve_is_nondecreasing_and_concave() {
        let g = Graph::grid(&[3, 3]).unwrap();
        let cov = covariance(CovarianceKind::LaplacianInverse { graph: g.clone(), c: 0.5 }).unwrap();
        let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
        let curve = min_eigen_curve(cov.matrix(), &g.laplacian(), &grid).unwrap();
        for w in curve.gmin.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for w in curve.gmin.windows(3) {
            assert!(w[2] - w[1] <= w[1] - w[0] + 1e-9, "concavity violated: {w:?}");
        }
    }

    #[test]
    fn eigen_curve_validates_input() {
        let g = Graph::chain(3).unwrap();
        let eye: Array2<f64> = Array2::eye(3);
        assert!(min_eigen_curve(&eye, &g.laplacian(), &[0.5, 0.1]).is_err());
        assert!(min_eigen_curve(&eye, &g.laplacian(), &[-0.1]).is_err());
        let eye4: Array2<f64> = Array2::eye(4);
        assert!(min_eigen_curve(&eye4, &g.laplacian(), &[0.0]).is_err());
    }

    #[test]
    fn re_event_holds_on_small_chains() {
        let g = Graph::chain(12).unwrap();
        let cov = covariance(CovarianceKind::Identity { p: 12 }).unwrap();
        let frac = re_condition_trial(&cov, &g, 60, 10, 6, 7).unwrap();
        assert!(frac >= 0.99, "pass fraction {frac}");
    }

    #[test]
    fn re_large_sample_limit_is_comfortable() {
        // n huge: ||Xv||/sqrt(n) concentrates at ||Sigma^{1/2} v|| >= rhs
        let g = Graph::chain(8).unwrap();
        let cov = covariance(CovarianceKind::Toeplitz { p: 8, rho: 0.3 }).unwrap();
        let frac = re_condition_trial(&cov, &g, 100_000, 1, 6, 3).unwrap();
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn re_rejects_undersized_problems() {
        let g = Graph::chain(8).unwrap();
        let cov = covariance(CovarianceKind::Identity { p: 8 }).unwrap();
        assert!(re_condition_trial(&cov, &g, 5, 1, 1, 0).is_err());
        let tiny = Graph::chain(2).unwrap();
        let cov2 = covariance(CovarianceKind::Identity { p: 2 }).unwrap();
        assert!(re_condition_trial(&cov2, &tiny, 50, 1, 1, 0).is_err());
    }
}
