//! Solvers for the augmented l1 problem
//! `min (1/2) ||y~ - X~ b||^2 + lambda1 sum_j w_j |(A b)_j|`
//! through its box-constrained dual quadratic program
//! `min (1/2) u' Q u - b' u  s.t.  |u_j| <= lambda1 w_j`,
//! plus an ADMM reference solver on the primal split and the primal
//! recovery / optimality certificates tying the two together.

mod admm;
mod cd;
mod ip;

pub use admm::{solve_admm, AdmmState, AdmmWorkspace};
pub use cd::solve_cd;
pub use ip::{solve_ip, IpParams};

use std::time::Instant;

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd_rank, svd_thin, DEFAULT_SVD_RTOL};
use crate::penalty::{augment, AugmentedProblem, PenaltySpec};

/// Box-constrained dual of the augmented problem.
///
/// With `P = pinv(X~)` and `G = A P`, the dual objective is
/// `(1/2) u' Q u - b' u` over the box `|u_j| <= lambda1 w_j`, where
/// `Q = G G'` and `b = G y~`. The extra fields cache what primal recovery
/// and the duality gap need so the expensive SVD happens exactly once.
#[derive(Debug, Clone)]
pub struct DualProblem {
    /// `m1 x m1` symmetric PSD Gram matrix.
    pub q: Array2<f64>,
    /// Linear term, length `m1`.
    pub b: Array1<f64>,
    /// Per-coordinate box radii `lambda1 * w_j`.
    pub box_radii: Array1<f64>,
    /// Dimension of `ker(X~)`. Nonzero means the dropped row-space
    /// constraint of the exact dual is active; see [`build_dual`].
    pub kernel_dim_xtilde: usize,
    /// Minimum-norm least-squares solution `pinv(X~) y~`.
    beta_ls: Array1<f64>,
    /// `p x m1` map so that `beta(u) = beta_ls - recover_map u`.
    recover_map: Array2<f64>,
    /// `(1/2) ||y~ - proj_col(X~) y~||^2`, the constant part of the dual value.
    offset: f64,
}

impl DualProblem {
    pub fn m1(&self) -> usize {
        self.b.len()
    }

    pub fn p(&self) -> usize {
        self.beta_ls.len()
    }

    /// Value of the Lagrange dual function at a feasible `u`:
    /// `offset + b' u - (1/2) u' Q u`.
    pub fn dual_value(&self, u: &Array1<f64>) -> f64 {
        self.offset + self.b.dot(u) - 0.5 * u.dot(&self.q.dot(u))
    }

    /// The dual objective minimized by the iterative solvers
    /// (`(1/2) u' Q u - b' u`, without the constant).
    pub fn dual_objective(&self, u: &Array1<f64>) -> f64 {
        0.5 * u.dot(&self.q.dot(u)) - self.b.dot(u)
    }
}

/// Result of an iterative dual solve.
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Feasible dual point (projected onto the box).
    pub u: Array1<f64>,
    /// Sweeps (CD), Newton steps (IP) or iterations (ADMM).
    pub iterations: usize,
    pub converged: bool,
    /// Last step norm (CD/ADMM) or surrogate duality gap (IP) at exit.
    pub residual: f64,
    /// Dual objective value after each sweep; filled by coordinate descent,
    /// where per-sweep monotonicity is part of the contract.
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Cd,
    Ip,
    Admm,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Cd => "cd",
            SolverKind::Ip => "ip",
            SolverKind::Admm => "admm",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cd" => Ok(SolverKind::Cd),
            "ip" => Ok(SolverKind::Ip),
            "admm" => Ok(SolverKind::Admm),
            other => Err(Error::InvalidParameter(format!("unknown solver '{other}'"))),
        }
    }
}

/// Options shared by [`fit`] and the individual solvers.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub solver: SolverKind,
    /// Convergence tolerance. Default 1e-4 for CD/IP and 1e-3 for ADMM.
    pub tol: Option<f64>,
    /// Iteration cap. Default 100_000 sweeps for CD and ADMM, 200 Newton
    /// steps for IP.
    pub max_iter: Option<usize>,
    /// Interior point barrier growth factor (> 1).
    pub tau: f64,
    /// Interior point backtracking sufficient-decrease constant, in (0, 1).
    pub alpha: f64,
    /// Interior point backtracking shrink factor, in (0, 1).
    pub gamma: f64,
    /// ADMM penalty parameter.
    pub rho_admm: f64,
    /// Warm start for the dual solvers.
    pub init_u: Option<Array1<f64>>,
    /// Relative singular-value cutoff for the SVD of `X~`.
    pub svd_rel_tol: f64,
    /// Optional wall-clock cutoff; solvers return non-converged at expiry.
    pub deadline: Option<Instant>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            solver: SolverKind::Cd,
            tol: None,
            max_iter: None,
            tau: 10.0,
            alpha: 0.01,
            gamma: 0.5,
            rho_admm: 1.0,
            init_u: None,
            svd_rel_tol: DEFAULT_SVD_RTOL,
            deadline: None,
        }
    }
}

impl FitOptions {
    pub fn with_solver(solver: SolverKind) -> Self {
        FitOptions { solver, ..Default::default() }
    }

    pub fn tolerance(&self) -> f64 {
        self.tol.unwrap_or(match self.solver {
            SolverKind::Cd | SolverKind::Ip => 1e-4,
            SolverKind::Admm => 1e-3,
        })
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iter.unwrap_or(match self.solver {
            SolverKind::Cd | SolverKind::Admm => 100_000,
            SolverKind::Ip => 200,
        })
    }
}

/// A fitted model with its optimality certificates.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: Array1<f64>,
    pub dual: DualSolution,
    /// Sup-norm violation of the stationarity condition at the best valid
    /// subgradient consistent with `beta_hat` and the dual certificate.
    pub kkt_residual: f64,
    /// Primal objective minus the Lagrange dual value at the returned `u`.
    pub duality_gap: f64,
    pub solver: SolverKind,
    /// Seconds spent building the dual (where applicable) and solving;
    /// diagnostics are excluded.
    pub wall_time: f64,
}

/// Clamp a scalar to `[-radius, radius]`.
pub fn box_project(x: f64, radius: f64) -> f64 {
    x.clamp(-radius, radius)
}

/// Build the dual problem from an augmented problem via one thin SVD of
/// `X~`. When `ker(X~)` is nontrivial the exact dual carries the extra
/// constraint `A' u in row(X~)`; this implementation drops it, logs a
/// warning and records the kernel dimension for the caller.
pub fn build_dual(ap: &AugmentedProblem, rel_tol: f64) -> Result<DualProblem> {
    build_dual_impl(ap, rel_tol, true)
}

/// As [`build_dual`] but with the kernel warning suppressed, for callers
/// that inspect `kernel_dim_xtilde` and reroute themselves.
pub(crate) fn build_dual_impl(
    ap: &AugmentedProblem,
    rel_tol: f64,
    warn_on_kernel: bool,
) -> Result<DualProblem> {
    let p = ap.p();
    let m1 = ap.m1();
    let (u_svd, s, vt) = svd_thin(&ap.x_tilde)?;
    let rank = svd_rank(&s, rel_tol);
    let kernel_dim = p - rank;
    if kernel_dim > 0 && warn_on_kernel {
        log::warn!(
            "X~ has a {kernel_dim}-dimensional kernel; solving the relaxed dual \
             (row-space constraint dropped), primal recovery uses the minimum-norm representative"
        );
    }
    let u_r = u_svd.slice(s![.., ..rank]);
    let vt_r = vt.slice(s![..rank, ..]);
    let inv_s = s.slice(s![..rank]).mapv(|x| 1.0 / x);

    // v_scaled = V_r diag(1/s), so pinv(X~) = v_scaled U_r'
    let v_scaled = &vt_r.t() * &inv_s; // p x r
    let uy = u_r.t().dot(&ap.y_tilde); // r
    let beta_ls = v_scaled.dot(&uy);
    let y_norm_sq = ap.y_tilde.dot(&ap.y_tilde);
    let offset = 0.5 * (y_norm_sq - uy.dot(&uy)).max(0.0);

    let (q, b, recover_map) = if m1 == 0 {
        (Array2::zeros((0, 0)), Array1::zeros(0), Array2::zeros((p, 0)))
    } else {
        let w = ap.l1_matrix.dot(&v_scaled); // m1 x r
        let q = w.dot(&w.t());
        let q = (&q + &q.t()) * 0.5;
        let b = w.dot(&uy);
        let recover_map = v_scaled.dot(&w.t()); // p x m1
        (q, b, recover_map)
    };

    Ok(DualProblem {
        q,
        b,
        box_radii: ap.box_radii(),
        kernel_dim_xtilde: kernel_dim,
        beta_ls,
        recover_map,
        offset,
    })
}

/// Recover the primal point `beta(u) = pinv(X~)(y_proj - G' u)` for a
/// feasible dual `u`. The kernel component of the exact primal-dual relation
/// is taken as zero, i.e. this returns the minimum-norm representative.
pub fn recover_primal(ap: &AugmentedProblem, dp: &DualProblem, u: &Array1<f64>) -> Array1<f64> {
    debug_assert_eq!(ap.p(), dp.p());
    if dp.m1() == 0 {
        return dp.beta_ls.clone();
    }
    &dp.beta_ls - &dp.recover_map.dot(u)
}

/// Threshold below which `(A beta)_j` counts as zero when fixing
/// subgradient signs; `sign()` is discontinuous, so an exact-zero test
/// would misclassify converged coordinates.
const SUBGRADIENT_DEAD_ZONE: f64 = 1e-8;

/// Stationarity residual `|| X~'(y~ - X~ b) - lambda1 A' s ||_inf` at the
/// best valid subgradient `s` consistent with the dual certificate:
/// `s_j = w_j sign((A b)_j)` where `(A b)_j` is outside the dead zone, and
/// `s_j = clamp(u_j / lambda1, [-w_j, w_j])` where it is inside.
pub fn kkt_residual(ap: &AugmentedProblem, beta: &Array1<f64>, u: &Array1<f64>) -> f64 {
    let grad = ap.x_tilde.t().dot(&(&ap.y_tilde - &ap.x_tilde.dot(beta)));
    if ap.lambda1 == 0.0 || ap.m1() == 0 {
        return grad.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    }
    let a_beta = ap.l1_matrix.dot(beta);
    let mut s = Array1::zeros(ap.m1());
    for j in 0..ap.m1() {
        let w = ap.l1_weights[j];
        s[j] = if a_beta[j].abs() > SUBGRADIENT_DEAD_ZONE {
            w * a_beta[j].signum()
        } else {
            box_project(u[j] / ap.lambda1, w)
        };
    }
    let resid = &grad - &(ap.l1_matrix.t().dot(&s) * ap.lambda1);
    resid.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Optimality certificates at a primal-dual pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub kkt_residual: f64,
    pub duality_gap: f64,
}

/// Certificates computed against an already-built [`DualProblem`].
pub fn optimality_report_with_dual(
    ap: &AugmentedProblem,
    dp: &DualProblem,
    beta: &Array1<f64>,
    u: &Array1<f64>,
) -> OptimalityReport {
    OptimalityReport {
        kkt_residual: kkt_residual(ap, beta, u),
        duality_gap: ap.objective(beta) - dp.dual_value(u),
    }
}

/// Certificates from `(beta, u)` alone. The dual value is obtained by
/// minimizing the Lagrangian over the primal variable, which needs one
/// symmetric eigendecomposition of `X~' X~` instead of the dual's SVD.
pub fn optimality_report(
    ap: &AugmentedProblem,
    beta: &Array1<f64>,
    u: &Array1<f64>,
) -> Result<OptimalityReport> {
    let gram = ap.x_tilde.t().dot(&ap.x_tilde);
    let mut rhs = ap.x_tilde.t().dot(&ap.y_tilde);
    if ap.m1() > 0 {
        rhs -= &ap.l1_matrix.t().dot(u);
    }
    let (vals, vecs) = crate::numerics::eigh_sym(&gram)?;
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = DEFAULT_SVD_RTOL * vmax;
    let coeffs = vecs.t().dot(&rhs);
    let scaled =
        Array1::from_iter(vals.iter().zip(coeffs.iter()).map(
            |(&v, &c)| {
                if v > cutoff {
                    c / v
                } else {
                    0.0
                }
            },
        ));
    let beta_u = vecs.dot(&scaled);
    let resid = &ap.y_tilde - &ap.x_tilde.dot(&beta_u);
    let mut dual_value = 0.5 * resid.dot(&resid);
    if ap.m1() > 0 {
        dual_value += u.dot(&ap.l1_matrix.dot(&beta_u));
    }
    Ok(OptimalityReport {
        kkt_residual: kkt_residual(ap, beta, u),
        duality_gap: ap.objective(beta) - dual_value,
    })
}

/// Fit a penalized model end to end: augment, solve by the selected
/// algorithm, recover the primal and attach optimality certificates.
/// `wall_time` covers augmentation through primal recovery.
pub fn fit(
    x: &Array2<f64>,
    y: &Array1<f64>,
    spec: &PenaltySpec,
    opts: &FitOptions,
) -> Result<FitResult> {
    let start = Instant::now();
    let ap = augment(x, y, spec)?;
    match opts.solver {
        SolverKind::Cd | SolverKind::Ip => {
            let dp = build_dual(&ap, opts.svd_rel_tol)?;
            let dual = match opts.solver {
                SolverKind::Cd => solve_cd(
                    &dp,
                    opts.tolerance(),
                    opts.iteration_cap(),
                    opts.init_u.as_ref(),
                    opts.deadline,
                ),
                SolverKind::Ip => solve_ip(
                    &dp,
                    &IpParams {
                        tau: opts.tau,
                        alpha: opts.alpha,
                        gamma: opts.gamma,
                        tol: opts.tolerance(),
                        max_iter: opts.iteration_cap(),
                        deadline: opts.deadline,
                    },
                )?,
                SolverKind::Admm => unreachable!(),
            };
            let beta_hat = recover_primal(&ap, &dp, &dual.u);
            let wall_time = start.elapsed().as_secs_f64();
            let report = optimality_report_with_dual(&ap, &dp, &beta_hat, &dual.u);
            Ok(FitResult {
                beta_hat,
                dual,
                kkt_residual: report.kkt_residual,
                duality_gap: report.duality_gap,
                solver: opts.solver,
                wall_time,
            })
        }
        SolverKind::Admm => {
            let (beta_hat, dual) = solve_admm(
                &ap,
                opts.rho_admm,
                opts.tolerance(),
                opts.iteration_cap(),
                opts.deadline,
            )?;
            let wall_time = start.elapsed().as_secs_f64();
            let report = optimality_report(&ap, &beta_hat, &dual.u)?;
            Ok(FitResult {
                beta_hat,
                dual,
                kkt_residual: report.kkt_residual,
                duality_gap: report.duality_gap,
                solver: SolverKind::Admm,
                wall_time,
            })
        }
    }
}
