//! ADMM reference solver on the primal split
//! `min (1/2) ||y~ - X~ b||^2 + lambda1 sum_j w_j |z_j|  s.t.  z = A b`.

use std::time::Instant;

use ndarray::prelude::*;
use ndarray_linalg::{CholeskyFactorized, FactorizeC, SolveC, UPLO};

use crate::error::Result;
use crate::numerics::{eigh_sym, DEFAULT_SVD_RTOL};
use crate::penalty::AugmentedProblem;

use super::{box_project, DualSolution};

/// `sign(x) * max(|x| - threshold, 0)`.
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

enum BetaSolver {
    Cholesky(CholeskyFactorized<ndarray::OwnedRepr<f64>>),
    /// Spectral pseudo-solve, used when `ker(X~) ∩ ker(A)` is nontrivial.
    Eigen { vecs: Array2<f64>, inv_vals: Array1<f64> },
}

impl BetaSolver {
    fn build(h: &Array2<f64>) -> Result<BetaSolver> {
        if let Ok(f) = h.factorizec(UPLO::Lower) {
            return Ok(BetaSolver::Cholesky(f));
        }
        let (vals, vecs) = eigh_sym(h)?;
        let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
        let cutoff = DEFAULT_SVD_RTOL * vmax;
        let inv_vals = vals.mapv(|v| if v > cutoff { 1.0 / v } else { 0.0 });
        Ok(BetaSolver::Eigen { vecs, inv_vals })
    }

    fn solve(&self, rhs: &Array1<f64>) -> Result<Array1<f64>> {
        match self {
            BetaSolver::Cholesky(f) => Ok(f.solvec(rhs)?),
            BetaSolver::Eigen { vecs, inv_vals } => {
                let coeffs = vecs.t().dot(rhs) * inv_vals;
                Ok(vecs.dot(&coeffs))
            }
        }
    }
}

/// Warm-startable iterate state carried across related solves.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub z: Array1<f64>,
    pub y: Array1<f64>,
}

/// Factorization and data shared by every ADMM solve over the same
/// `(X~, y~, A)` triple: the matrix `X~'X~ + rho A'A` does not depend on
/// the penalty levels, so grid searches factor once and sweep the
/// threshold levels.
pub struct AdmmWorkspace<'a> {
    ap: &'a AugmentedProblem,
    rho: f64,
    solver: BetaSolver,
    xty: Array1<f64>,
}

impl<'a> AdmmWorkspace<'a> {
    pub fn new(ap: &'a AugmentedProblem, rho: f64) -> Result<AdmmWorkspace<'a>> {
        if !(rho > 0.0) {
            return Err(crate::error::Error::InvalidParameter(format!(
                "admm: rho must be positive, got {rho}"
            )));
        }
        let mut h = ap.x_tilde.t().dot(&ap.x_tilde);
        if ap.m1() > 0 {
            h = h + ap.l1_matrix.t().dot(&ap.l1_matrix) * rho;
        }
        Ok(AdmmWorkspace {
            ap,
            rho,
            solver: BetaSolver::build(&h)?,
            xty: ap.x_tilde.t().dot(&ap.y_tilde),
        })
    }

    /// Run ADMM from `init` (or zeros) against the given box radii, which
    /// enter only through the soft-threshold levels `radii_j / rho`.
    pub fn solve(
        &self,
        radii: &Array1<f64>,
        tol: f64,
        max_iter: usize,
        init: Option<&AdmmState>,
        deadline: Option<Instant>,
    ) -> Result<(Array1<f64>, DualSolution, AdmmState)> {
        let ap = self.ap;
        let rho = self.rho;
        let p = ap.p();
        let m1 = ap.m1();

        if m1 == 0 {
            let beta = self.solver.solve(&self.xty)?;
            let dual = DualSolution {
                u: Array1::zeros(0),
                iterations: 0,
                converged: true,
                residual: 0.0,
                objective_history: vec![],
            };
            return Ok((beta, dual, AdmmState { z: Array1::zeros(0), y: Array1::zeros(0) }));
        }

        let (mut z, mut y) = match init {
            Some(state) => (state.z.clone(), state.y.clone()),
            None => (Array1::<f64>::zeros(m1), Array1::<f64>::zeros(m1)),
        };
        let mut beta = Array1::<f64>::zeros(p);
        let mut converged = false;
        let mut iterations = 0;
        let mut residual = f64::INFINITY;

        for iter in 0..max_iter {
            iterations = iter + 1;
            let rhs = &self.xty + &(ap.l1_matrix.t().dot(&(&z - &y)) * rho);
            beta = self.solver.solve(&rhs)?;
            let a_beta = ap.l1_matrix.dot(&beta);

            let z_prev = z.clone();
            for j in 0..m1 {
                z[j] = soft_threshold(a_beta[j] + y[j], radii[j] / rho);
            }
            let gap = &a_beta - &z;
            y += &gap;

            let r_pri = gap.dot(&gap).sqrt();
            let s_dual = {
                let dz = &z - &z_prev;
                let at_dz = ap.l1_matrix.t().dot(&dz) * rho;
                at_dz.dot(&at_dz).sqrt()
            };
            let eps_pri = (m1 as f64).sqrt() * tol
                + tol * a_beta.dot(&a_beta).sqrt().max(z.dot(&z).sqrt());
            let eps_dual = {
                let aty = ap.l1_matrix.t().dot(&y) * rho;
                (p as f64).sqrt() * tol + tol * aty.dot(&aty).sqrt()
            };
            residual = r_pri.max(s_dual);
            if r_pri <= eps_pri && s_dual <= eps_dual {
                converged = true;
                break;
            }
            if let Some(deadline) = deadline {
                if Instant::now() >= deadline {
                    break;
                }
            }
        }

        let mut u = &y * rho;
        for j in 0..m1 {
            u[j] = box_project(u[j], radii[j]);
        }
        let dual = DualSolution { u, iterations, converged, residual, objective_history: vec![] };
        Ok((beta, dual, AdmmState { z, y }))
    }
}

/// Scaled-form ADMM with a cached factorization of `X~'X~ + rho A'A` for
/// the beta update and soft-thresholding z updates. Stops when both the
/// primal residual `||A b - z||` and the dual residual `rho ||A'(z - z_prev)||`
/// fall below combined absolute/relative thresholds built from `tol`.
///
/// Returns the primal iterate together with the implied dual point
/// `u = rho * y` (projected onto the box) so the common optimality
/// reporting applies.
pub fn solve_admm(
    ap: &AugmentedProblem,
    rho: f64,
    tol: f64,
    max_iter: usize,
    deadline: Option<Instant>,
) -> Result<(Array1<f64>, DualSolution)> {
    let workspace = AdmmWorkspace::new(ap, rho)?;
    let (beta, dual, _) = workspace.solve(&ap.box_radii(), tol, max_iter, None, deadline)?;
    Ok((beta, dual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::numerics::SeededRng;
    use crate::penalty::{augment, make_estimator, make_estimator_p, Hyperparams, Preset};
    use crate::solver::{build_dual, recover_primal, solve_cd};
    use approx::assert_abs_diff_eq;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    }

    #[test]
    fn zero_penalty_reproduces_least_squares() {
        let spec =
            make_estimator_p(Preset::Lasso, None, Some(2), Hyperparams::default()).unwrap();
        let x = array![[2.0, 0.0], [0.0, 4.0], [1.0, 1.0]];
        let y = array![2.0, 8.0, 3.0];
        let ap = augment(&x, &y, &spec).unwrap();
        let (beta, sol) = solve_admm(&ap, 1.0, 1e-10, 10_000, None).unwrap();
        assert!(sol.converged);
        assert_abs_diff_eq!(beta[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(beta[1], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn matches_coordinate_descent_on_the_chain_toy() {
        let g = Graph::chain(2).unwrap();
        let spec = make_estimator(
            Preset::Gen,
            Some(&g),
            Hyperparams { lambda1: 0.5, lambda2: 0.0, ..Default::default() },
        )
        .unwrap();
        let x: Array2<f64> = Array2::eye(2);
        let y = array![1.0, 3.0];
        let ap = augment(&x, &y, &spec).unwrap();
        let (beta, _) = solve_admm(&ap, 1.0, 1e-8, 100_000, None).unwrap();
        let dp = build_dual(&ap, DEFAULT_SVD_RTOL).unwrap();
        let cd = solve_cd(&dp, 1e-12, 100_000, None, None);
        let beta_cd = recover_primal(&ap, &dp, &cd.u);
        for i in 0..2 {
            assert!((beta[i] - beta_cd[i]).abs() <= 1e-4);
        }
        // 1D fused lasso closed form: shrink the single difference by 2 * lambda1
        assert_abs_diff_eq!(beta_cd[0], 1.5, epsilon = 1e-8);
        assert_abs_diff_eq!(beta_cd[1], 2.5, epsilon = 1e-8);
    }

    #[test]
    fn random_instances_agree_with_cd() {
        let mut rng = SeededRng::new(7001);
        let g = Graph::chain(6).unwrap();
        for _ in 0..10 {
            let x = Array2::from_shape_fn((12, 6), |_| rng.standard_normal());
            let y = rng.normal_vector(12);
            let spec = make_estimator(
                Preset::Gen,
                Some(&g),
                Hyperparams { lambda1: 0.4, lambda2: 0.2, ..Default::default() },
            )
            .unwrap();
            let ap = augment(&x, &y, &spec).unwrap();
            let (beta, sol) = solve_admm(&ap, 1.0, 1e-9, 200_000, None).unwrap();
            assert!(sol.converged);
            let dp = build_dual(&ap, DEFAULT_SVD_RTOL).unwrap();
            let cd = solve_cd(&dp, 1e-12, 200_000, None, None);
            let beta_cd = recover_primal(&ap, &dp, &cd.u);
            for i in 0..6 {
                assert!((beta[i] - beta_cd[i]).abs() <= 1e-4);
            }
        }
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let g = Graph::chain(4).unwrap();
        let spec = make_estimator(
            Preset::Gen,
            Some(&g),
            Hyperparams { lambda1: 1.0, lambda2: 0.0, ..Default::default() },
        )
        .unwrap();
        let mut rng = SeededRng::new(3);
        let x = Array2::from_shape_fn((8, 4), |_| rng.standard_normal());
        let y = rng.normal_vector(8);
        let ap = augment(&x, &y, &spec).unwrap();
        let (_, sol) = solve_admm(&ap, 1.0, 1e-12, 3, None).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
    }
}
