//! Cyclic coordinate descent on the box-constrained dual.

use std::time::Instant;

use ndarray::prelude::*;

use super::{box_project, DualProblem, DualSolution};

/// Gauss-Seidel sweeps over the coordinates in natural order:
/// `u_i <- T_{r_i}((b_i - sum_{j != i} Q_ij u_j) / Q_ii)`,
/// stopping when the per-sweep step norm `||u_k - u_{k-1}||_2` drops to
/// `tol` or the sweep cap is hit.
///
/// Coordinates whose diagonal `Q_ii` is numerically zero correspond to
/// dual directions annihilated by the problem; any feasible value is
/// optimal for them given the rest, and they are frozen at 0.
///
/// The gradient `Q u` is maintained incrementally and refreshed every 64
/// sweeps to stop floating-point drift from accumulating across long runs.
pub fn solve_cd(
    dp: &DualProblem,
    tol: f64,
    max_iter: usize,
    init: Option<&Array1<f64>>,
    deadline: Option<Instant>,
) -> DualSolution {
    let m = dp.m1();
    if m == 0 {
        return DualSolution {
            u: Array1::zeros(0),
            iterations: 0,
            converged: true,
            residual: 0.0,
            objective_history: vec![],
        };
    }

    let max_diag = dp.q.diag().iter().cloned().fold(0.0_f64, f64::max);
    let pin_cutoff = f64::EPSILON * max_diag;

    let mut u = Array1::zeros(m);
    if let Some(init) = init {
        for i in 0..m {
            u[i] = box_project(init[i], dp.box_radii[i]);
        }
    }
    for i in 0..m {
        if dp.q[[i, i]] <= pin_cutoff {
            u[i] = 0.0;
        }
    }

    let mut grad = dp.q.dot(&u); // Q u, kept in sync with u
    let mut history = Vec::new();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;

    while sweeps < max_iter {
        let mut step_sq = 0.0;
        for i in 0..m {
            let qii = dp.q[[i, i]];
            if qii <= pin_cutoff {
                continue;
            }
            // b_i - sum_{j != i} Q_ij u_j = b_i - grad_i + Q_ii u_i
            let target = (dp.b[i] - grad[i]) / qii + u[i];
            let new = box_project(target, dp.box_radii[i]);
            let delta = new - u[i];
            if delta != 0.0 {
                u[i] = new;
                grad.scaled_add(delta, &dp.q.row(i));
                step_sq += delta * delta;
            }
        }
        sweeps += 1;
        if sweeps % 64 == 0 {
            grad = dp.q.dot(&u);
        }
        history.push(0.5 * u.dot(&grad) - dp.b.dot(&u));
        residual = step_sq.sqrt();
        if residual <= tol {
            converged = true;
            break;
        }
        if let Some(deadline) = deadline {
            if Instant::now() >= deadline {
                break;
            }
        }
    }

    DualSolution { u, iterations: sweeps, converged, residual, objective_history: history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use approx::assert_abs_diff_eq;

    fn dual_problem(q: Array2<f64>, b: Array1<f64>, radii: Array1<f64>) -> DualProblem {
        let p = q.nrows().max(1);
        DualProblem {
            q,
            b,
            box_radii: radii,
            kernel_dim_xtilde: 0,
            beta_ls: Array1::zeros(p),
            recover_map: Array2::zeros((p, 0)),
            offset: 0.0,
        }
    }

    /// Projected gradient with a tiny step; independent oracle for the
    /// same box-constrained quadratic.
    pub(crate) fn projected_gradient(
        q: &Array2<f64>,
        b: &Array1<f64>,
        radii: &Array1<f64>,
        iters: usize,
    ) -> Array1<f64> {
        let m = b.len();
        let mut u = Array1::zeros(m);
        let lip = q
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(1e-12_f64, f64::max);
        let step = 1.0 / lip;
        for _ in 0..iters {
            let grad = q.dot(&u) - b;
            for i in 0..m {
                u[i] = box_project(u[i] - step * grad[i], radii[i]);
            }
        }
        u
    }

    #[test]
    fn one_dimensional_interior_and_clamped_minima() {
        let dp = dual_problem(array![[2.0]], array![-2.0], array![10.0]);
        let sol = solve_cd(&dp, 1e-12, 1000, None, None);
        assert!(sol.converged);
        assert_abs_diff_eq!(sol.u[0], -1.0, epsilon = 1e-10);

        let dp = dual_problem(array![[2.0]], array![-2.0], array![0.5]);
        let sol = solve_cd(&dp, 1e-12, 1000, None, None);
        assert_abs_diff_eq!(sol.u[0], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn matches_projected_gradient_oracle_on_random_instances() {
        let mut rng = SeededRng::new(2024);
        for trial in 0..30 {
            let m = 1 + rng.below(15);
            let a = Array2::from_shape_fn((m + 2, m), |_| rng.standard_normal());
            let q = a.t().dot(&a);
            let b = rng.normal_vector(m);
            let radii = Array1::from_shape_fn(m, |_| 0.1 + rng.uniform());
            let dp = dual_problem(q.clone(), b.clone(), radii.clone());
            let sol = solve_cd(&dp, 1e-12, 200_000, None, None);
            let oracle = projected_gradient(&q, &b, &radii, 1_000_000);
            for i in 0..m {
                assert!(
                    (sol.u[i] - oracle[i]).abs() <= 1e-5,
                    "trial {trial} coord {i}: cd {} vs oracle {}",
                    sol.u[i],
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn dual_objective_is_monotone_per_sweep() {
        let mut rng = SeededRng::new(5150);
        for _ in 0..10 {
            let m = 2 + rng.below(10);
            let a = Array2::from_shape_fn((m, m), |_| rng.standard_normal());
            let q = a.t().dot(&a);
            let b = rng.normal_vector(m);
            let radii = Array1::from_shape_fn(m, |_| 0.2 + rng.uniform());
            let dp = dual_problem(q, b, radii);
            let sol = solve_cd(&dp, 1e-10, 5_000, None, None);
            for w in sol.objective_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "objective rose from {} to {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn returned_point_is_feasible_even_from_infeasible_warm_start() {
        let dp = dual_problem(array![[1.0, 0.0], [0.0, 1.0]], array![5.0, -5.0], array![1.0, 1.0]);
        let init = array![100.0, -100.0];
        let sol = solve_cd(&dp, 1e-12, 100, Some(&init), None);
        assert!(sol.u.iter().zip(dp.box_radii.iter()).all(|(u, r)| u.abs() <= r + 1e-12));
        assert_abs_diff_eq!(sol.u[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.u[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_diagonal_coordinates_are_pinned() {
        let q = array![[2.0, 0.0], [0.0, 0.0]];
        let dp = dual_problem(q, array![-2.0, 7.0], array![10.0, 10.0]);
        let sol = solve_cd(&dp, 1e-12, 1000, None, None);
        assert_abs_diff_eq!(sol.u[0], -1.0, epsilon = 1e-10);
        assert_eq!(sol.u[1], 0.0);
    }

    #[test]
    fn hitting_the_sweep_cap_flags_non_convergence() {
        let mut rng = SeededRng::new(8);
        let m = 10;
        let a = Array2::from_shape_fn((m, m), |_| rng.standard_normal());
        let q = a.t().dot(&a);
        let dp = dual_problem(q, rng.normal_vector(m), Array1::ones(m));
        let sol = solve_cd(&dp, 1e-14, 2, None, None);
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 2);
    }
}
