//! Primal-dual interior point method on the box-constrained dual.
//!
//! The box `|u_i| <= r_i` is written as the inequality pair
//! `f1(u) = u - r <= 0`, `f2(u) = -u - r <= 0` with multipliers
//! `mu1, mu2 >= 0`. Each step solves the Newton system of the perturbed
//! KKT residuals, with the barrier parameter driven by the surrogate
//! duality gap `eta = -f1' mu1 - f2' mu2` via `t = 2 tau m / eta`.

use std::time::Instant;

use ndarray::prelude::*;
use ndarray_linalg::{FactorizeC, SolveC, UPLO};

use crate::error::{Error, Result};

use super::{DualProblem, DualSolution};

#[derive(Debug, Clone)]
pub struct IpParams {
    /// Barrier growth factor, > 1.
    pub tau: f64,
    /// Sufficient-decrease constant for backtracking, in (0, 1).
    pub alpha: f64,
    /// Backtracking shrink factor, in (0, 1).
    pub gamma: f64,
    /// Stop when both the residual norm and the surrogate gap fall to this.
    pub tol: f64,
    pub max_iter: usize,
    pub deadline: Option<Instant>,
}

impl Default for IpParams {
    fn default() -> Self {
        IpParams { tau: 10.0, alpha: 0.01, gamma: 0.5, tol: 1e-4, max_iter: 200, deadline: None }
    }
}

struct IpState {
    u: Array1<f64>,
    mu1: Array1<f64>,
    mu2: Array1<f64>,
}

impl IpState {
    fn constraints(&self, radii: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        (&self.u - radii, -&self.u - radii)
    }

    fn surrogate_gap(&self, radii: &Array1<f64>) -> f64 {
        let (f1, f2) = self.constraints(radii);
        -f1.dot(&self.mu1) - f2.dot(&self.mu2)
    }
}

fn residual_norm(dp: &DualProblem, st: &IpState, t: f64) -> f64 {
    let (f1, f2) = st.constraints(&dp.box_radii);
    let r_dual = dp.q.dot(&st.u) - &dp.b + &st.mu1 - &st.mu2;
    let inv_t = 1.0 / t;
    let mut norm_sq = r_dual.dot(&r_dual);
    for i in 0..f1.len() {
        let c1 = -st.mu1[i] * f1[i] - inv_t;
        let c2 = -st.mu2[i] * f2[i] - inv_t;
        norm_sq += c1 * c1 + c2 * c2;
    }
    norm_sq.sqrt()
}

/// Solve the dual by Algorithm-style primal-dual steps. Requires a strictly
/// feasible start, so all box radii must be positive; a zero box (lambda1 = 0)
/// short-circuits to the exact solution `u = 0`.
pub fn solve_ip(dp: &DualProblem, params: &IpParams) -> Result<DualSolution> {
    if !(params.tau > 1.0) {
        return Err(Error::InvalidParameter(format!("ip: tau must be > 1, got {}", params.tau)));
    }
    for (name, v) in [("alpha", params.alpha), ("gamma", params.gamma)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!("ip: {name} must be in (0, 1), got {v}")));
        }
    }
    let m = dp.m1();
    if m == 0 {
        return Ok(DualSolution {
            u: Array1::zeros(0),
            iterations: 0,
            converged: true,
            residual: 0.0,
            objective_history: vec![],
        });
    }
    if dp.box_radii.iter().any(|&r| r <= 0.0) {
        // the box is the single point 0 in every such coordinate
        return Ok(DualSolution {
            u: Array1::zeros(m),
            iterations: 0,
            converged: true,
            residual: 0.0,
            objective_history: vec![],
        });
    }

    let mut st =
        IpState { u: Array1::zeros(m), mu1: Array1::ones(m), mu2: Array1::ones(m) };
    let mut converged = false;
    let mut eta = st.surrogate_gap(&dp.box_radii);
    let mut steps = 0;

    for iter in 0..params.max_iter {
        eta = st.surrogate_gap(&dp.box_radii);
        let t = 2.0 * params.tau * m as f64 / eta;
        let current_norm = residual_norm(dp, &st, t);
        if current_norm <= params.tol && eta <= params.tol {
            converged = true;
            break;
        }
        if let Some(deadline) = params.deadline {
            if Instant::now() >= deadline {
                break;
            }
        }

        let (f1, f2) = st.constraints(&dp.box_radii);
        let inv_t = 1.0 / t;

        // reduced system: [Q - diag(mu1/f1) - diag(mu2/f2)] du = rhs
        let mut newton = dp.q.clone();
        for i in 0..m {
            newton[[i, i]] += -st.mu1[i] / f1[i] - st.mu2[i] / f2[i];
        }
        let mut rhs = &dp.b - &dp.q.dot(&st.u);
        for i in 0..m {
            rhs[i] += inv_t / f1[i] - inv_t / f2[i];
        }
        let du = solve_spd(&mut newton, &rhs, iter)?;

        let mut dmu1 = Array1::zeros(m);
        let mut dmu2 = Array1::zeros(m);
        for i in 0..m {
            dmu1[i] = -(st.mu1[i] / f1[i] * du[i] + st.mu1[i] + inv_t / f1[i]);
            dmu2[i] = -(-st.mu2[i] / f2[i] * du[i] + st.mu2[i] + inv_t / f2[i]);
        }

        // largest step keeping the multipliers nonnegative
        let mut s = 1.0_f64;
        for i in 0..m {
            if dmu1[i] < 0.0 {
                s = s.min(-st.mu1[i] / dmu1[i]);
            }
            if dmu2[i] < 0.0 {
                s = s.min(-st.mu2[i] / dmu2[i]);
            }
        }
        s = (0.99 * s).min(1.0);

        // shrink until strictly inside the box
        let mut backtracks = 0;
        loop {
            let u_new = &st.u + &(&du * s);
            let strictly_feasible =
                u_new.iter().zip(dp.box_radii.iter()).all(|(&u, &r)| u.abs() < r);
            if strictly_feasible {
                break;
            }
            s *= params.gamma;
            backtracks += 1;
            if backtracks > 200 {
                break;
            }
        }

        // shrink until the residual norm decreases enough
        let mut accepted = None;
        for _ in 0..200 {
            let trial = IpState {
                u: &st.u + &(&du * s),
                mu1: &st.mu1 + &(&dmu1 * s),
                mu2: &st.mu2 + &(&dmu2 * s),
            };
            if residual_norm(dp, &trial, t) <= (1.0 - params.alpha * s) * current_norm {
                accepted = Some(trial);
                break;
            }
            s *= params.gamma;
        }
        match accepted {
            Some(next) => {
                st = next;
                steps = iter + 1;
                // iterate contract: multipliers nonnegative, constraints strict
                debug_assert!(st.mu1.iter().all(|&v| v >= 0.0));
                debug_assert!(st.mu2.iter().all(|&v| v >= 0.0));
                debug_assert!({
                    let (f1, f2) = st.constraints(&dp.box_radii);
                    f1.iter().all(|&v| v < 0.0) && f2.iter().all(|&v| v < 0.0)
                });
            }
            // step stalled; report the best point found so far
            None => break,
        }
    }

    // exact box feasibility on exit
    let mut u = st.u;
    for i in 0..m {
        u[i] = super::box_project(u[i], dp.box_radii[i]);
    }
    Ok(DualSolution { u, iterations: steps, converged, residual: eta, objective_history: vec![] })
}

/// Cholesky solve with jitter escalation; the Newton matrix is positive
/// definite in exact arithmetic but can lose definiteness to rounding when
/// the barrier diagonals underflow along kernel directions of `Q`.
fn solve_spd(m: &mut Array2<f64>, rhs: &Array1<f64>, iter: usize) -> Result<Array1<f64>> {
    let n = m.nrows();
    let trace: f64 = m.diag().sum();
    let mut jitter = 0.0_f64;
    for attempt in 0..4 {
        if attempt > 0 {
            let bump = jitter.max(1e-14 * trace / n as f64) * if attempt > 1 { 100.0 } else { 1.0 };
            for i in 0..n {
                m[[i, i]] += bump - jitter;
            }
            jitter = bump;
        }
        if let Ok(f) = m.factorizec(UPLO::Lower) {
            if let Ok(x) = f.solvec(rhs) {
                return Ok(x);
            }
        }
    }
    Err(Error::Linalg(format!("ip: singular Newton system at iteration {iter}")))
}
