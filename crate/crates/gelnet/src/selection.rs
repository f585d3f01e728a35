//! k-fold cross-validation with exhaustive grid search, scored by negative
//! mean squared error on the held-out fold.

use std::collections::BTreeMap;

use ndarray::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::SeededRng;
use crate::penalty::{augment, make_estimator_p, Hyperparams, Preset};
use crate::solver::{
    build_dual_impl, fit, recover_primal, solve_cd, AdmmState, AdmmWorkspace, FitOptions,
    FitResult,
};

/// Cross-validation plan: fold count, seed, estimator preset and one
/// ascending value grid per hyperparameter the preset consumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CVPlan {
    pub k: usize,
    pub seed: u64,
    pub preset: Preset,
    pub grids: BTreeMap<String, Vec<f64>>,
}

impl CVPlan {
    pub fn new(k: usize, seed: u64, preset: Preset, grids: BTreeMap<String, Vec<f64>>) -> Result<CVPlan> {
        let plan = CVPlan { k, seed, preset, grids };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!("cv needs k >= 2 folds, got {}", self.k)));
        }
        for name in self.preset.hyperparameters() {
            let grid = self
                .grids
                .get(*name)
                .ok_or_else(|| Error::InvalidParameter(format!("missing grid for {name}")))?;
            if grid.is_empty() {
                return Err(Error::InvalidParameter(format!("empty grid for {name}")));
            }
            if grid.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "grid for {name} must be finite and nonnegative"
                )));
            }
            if grid.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidParameter(format!("grid for {name} must be ascending")));
            }
        }
        Ok(())
    }
}

/// 20 logarithmically spaced values spanning `[1e-3, 1e2]`, plus 0.
pub fn default_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let (lo, hi, count) = (-3.0_f64, 2.0_f64, 20usize);
    for i in 0..count {
        let e = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        grid.push(10f64.powf(e));
    }
    grid
}

/// A default grid for every hyperparameter of `preset`.
pub fn default_grids(preset: Preset) -> BTreeMap<String, Vec<f64>> {
    preset
        .hyperparameters()
        .iter()
        .map(|name| (name.to_string(), default_grid()))
        .collect()
}

/// Seeded permutation of `0..n` split into `k` contiguous blocks with sizes
/// differing by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut perm);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Hyperparameter points in grid order: the cartesian product of the
/// preset's grids, with the last-named hyperparameter varying fastest.
pub fn grid_points(preset: Preset, grids: &BTreeMap<String, Vec<f64>>) -> Result<Vec<Hyperparams>> {
    let names = preset.hyperparameters();
    let mut points = vec![Hyperparams::default()];
    for name in names {
        let grid = grids
            .get(*name)
            .ok_or_else(|| Error::InvalidParameter(format!("missing grid for {name}")))?;
        let mut next = Vec::with_capacity(points.len() * grid.len());
        for point in &points {
            for &v in grid {
                let mut h = *point;
                h.set(name, v)?;
                next.push(h);
            }
        }
        points = next;
    }
    Ok(points)
}

/// Regularization-preferring tie-break order: larger
/// `(lambda2, lambda1, lambdaL, lambdaE)` wins among equal scores.
fn tie_break_key(h: &Hyperparams) -> [f64; 4] {
    [h.lambda2, h.lambda1, h.lambda_l, h.lambda_e]
}

fn tuple_greater(a: [f64; 4], b: [f64; 4]) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x > y {
            return true;
        }
        if x < y {
            return false;
        }
    }
    false
}

/// Evaluation of one grid point on one validation split.
#[derive(Debug, Clone)]
pub struct PointScore {
    /// Negative mean squared validation error; NaN when the fit failed.
    pub score: f64,
    pub converged: bool,
    /// The fitted coefficients behind the score.
    pub beta: Array1<f64>,
}

/// Index of the best converged grid point, ties broken toward stronger
/// regularization; `None` when nothing converged.
pub(crate) fn tie_break_best(points: &[Hyperparams], scores: &[PointScore]) -> Option<usize> {
    let mut best: Option<(f64, [f64; 4], usize)> = None;
    for (idx, (h, ps)) in points.iter().zip(scores.iter()).enumerate() {
        if !ps.converged || !ps.score.is_finite() {
            continue;
        }
        let key = tie_break_key(h);
        let better = match &best {
            None => true,
            Some((score, tuple, _)) => {
                ps.score > *score || (ps.score == *score && tuple_greater(key, *tuple))
            }
        };
        if better {
            best = Some((ps.score, key, idx));
        }
    }
    best.map(|(_, _, idx)| idx)
}

/// Structure key for dual reuse: grid points sharing the l1 operator and
/// the augmented design (`B`, `lambda2`) share `Q` and `b`; only the box
/// radii differ. Returns `(a_kind, b_kind, lambda2_bits)`.
fn dual_group_key(preset: Preset, h: &Hyperparams) -> (u8, u8, u64) {
    // a_kind: 0 = graph incidence, 1 = incidence stacked on identity, 2 = identity, 3 = empty
    // b_kind: 0 = none, 1 = graph incidence, 2 = identity
    match preset {
        Preset::Ols => (3, 0, 0),
        Preset::Lasso => (2, 0, 0),
        Preset::ElasticNet => {
            let l2 = if h.lambda_e > 0.0 { 2 } else { 0 };
            (2, l2, h.lambda_e.to_bits())
        }
        Preset::FusedLasso => {
            if h.lambda1 == 0.0 {
                (2, 0, 0)
            } else if h.lambda_l == 0.0 {
                (0, 0, 0)
            } else {
                (1, 0, 0)
            }
        }
        Preset::SmoothLasso => {
            let l2 = if h.lambda2 > 0.0 { 1 } else { 0 };
            (2, l2, h.lambda2.to_bits())
        }
        Preset::Gen => {
            let l2 = if h.lambda2 > 0.0 { 1 } else { 0 };
            (0, l2, h.lambda2.to_bits())
        }
    }
}

/// Evaluate every grid point fitted on `(x_train, y_train)` and scored by
/// negative MSE on `(x_val, y_val)`. Grid points that share a dual build
/// it once; consecutive points within a group warm-start from each other.
///
/// Groups whose augmented design has a nontrivial kernel (where the dual
/// route only solves a relaxation) are evaluated by ADMM on the primal
/// instead, sharing one factorization across the group.
pub(crate) fn evaluate_grid_on_split(
    x_train: &Array2<f64>,
    y_train: &Array1<f64>,
    x_val: &Array2<f64>,
    y_val: &Array1<f64>,
    graph: Option<&Graph>,
    preset: Preset,
    points: &[Hyperparams],
    opts: &FitOptions,
) -> Result<Vec<PointScore>> {
    let p = x_train.ncols();
    let mut groups: BTreeMap<(u8, u8, u64), Vec<usize>> = BTreeMap::new();
    for (idx, h) in points.iter().enumerate() {
        groups.entry(dual_group_key(preset, h)).or_default().push(idx);
    }
    let score_of = |beta: &Array1<f64>| {
        let r = y_val - &x_val.dot(beta);
        -r.dot(&r) / y_val.len() as f64
    };
    let mut scores =
        vec![PointScore { score: f64::NAN, converged: false, beta: Array1::zeros(0) }; points.len()];
    for indices in groups.values() {
        let first = &points[indices[0]];
        let spec = make_estimator_p(preset, graph, Some(p), *first)?;
        let ap = augment(x_train, y_train, &spec)?;
        let mut dp = build_dual_impl(&ap, opts.svd_rel_tol, false)?;
        if dp.kernel_dim_xtilde == 0 {
            let mut warm: Option<Array1<f64>> = None;
            for &idx in indices {
                let h = &points[idx];
                // same A and X~ within the group; only the box radii move
                let spec_pt = make_estimator_p(preset, graph, Some(p), *h)?;
                dp.box_radii = &spec_pt.l1_weights * spec_pt.lambda1;
                let sol =
                    solve_cd(&dp, opts.tolerance(), opts.iteration_cap(), warm.as_ref(), opts.deadline);
                let beta = recover_primal(&ap, &dp, &sol.u);
                scores[idx] =
                    PointScore { score: score_of(&beta), converged: sol.converged, beta };
                warm = Some(sol.u);
            }
        } else {
            // balance the two operators so the splitting converges fast
            let rho = {
                let data = ap.x_tilde.t().dot(&ap.x_tilde).diag().sum();
                let op = ap.l1_matrix.t().dot(&ap.l1_matrix).diag().sum();
                if op > 0.0 { (data / op).max(1e-6) } else { opts.rho_admm }
            };
            let workspace = AdmmWorkspace::new(&ap, rho)?;
            let tol = opts.tol.unwrap_or(1e-3);
            let mut warm: Option<AdmmState> = None;
            for &idx in indices {
                let h = &points[idx];
                let spec_pt = make_estimator_p(preset, graph, Some(p), *h)?;
                let radii = &spec_pt.l1_weights * spec_pt.lambda1;
                let (beta, sol, state) = workspace.solve(
                    &radii,
                    tol,
                    opts.iteration_cap(),
                    warm.as_ref(),
                    opts.deadline,
                )?;
                scores[idx] =
                    PointScore { score: score_of(&beta), converged: sol.converged, beta };
                warm = Some(state);
            }
        }
    }
    Ok(scores)
}

/// Mean and per-fold scores of one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPointResult {
    pub params: Hyperparams,
    /// Mean of the fold scores; NaN when any fold failed to converge.
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
    pub all_converged: bool,
}

/// Cross-validation output: the full score table, the winning parameters
/// and a refit on the complete data at those parameters.
#[derive(Debug)]
pub struct CVResult {
    pub best_params: Hyperparams,
    pub table: Vec<GridPointResult>,
    pub refit: FitResult,
}

/// Exhaustive k-fold grid search. For each grid point and fold the model is
/// fitted on the other folds and scored by `-(1/n_val) ||y_val - X_val b||^2`
/// on the held-out one; the point maximizing the mean score wins, with ties
/// broken toward stronger regularization. Non-converged points stay in the
/// table flagged but are excluded from the argmax.
pub fn grid_search_cv(
    x: &Array2<f64>,
    y: &Array1<f64>,
    graph: Option<&Graph>,
    plan: &CVPlan,
    opts: &FitOptions,
) -> Result<CVResult> {
    plan.validate()?;
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {n} rows but y has {}",
            y.len()
        )));
    }
    let folds = kfold_indices(n, plan.k, plan.seed)?;
    let points = grid_points(plan.preset, &plan.grids)?;

    let fold_results: Vec<Result<Vec<PointScore>>> = folds
        .par_iter()
        .map(|val_idx| {
            let in_val = {
                let mut mask = vec![false; n];
                for &i in val_idx {
                    mask[i] = true;
                }
                mask
            };
            let train_idx: Vec<usize> = (0..n).filter(|i| !in_val[*i]).collect();
            let x_train = x.select(Axis(0), &train_idx);
            let y_train = y.select(Axis(0), &train_idx);
            let x_val = x.select(Axis(0), val_idx);
            let y_val = y.select(Axis(0), val_idx);
            evaluate_grid_on_split(&x_train, &y_train, &x_val, &y_val, graph, plan.preset, &points, opts)
        })
        .collect();

    let mut per_fold = Vec::with_capacity(plan.k);
    for r in fold_results {
        per_fold.push(r?);
    }

    let mut table = Vec::with_capacity(points.len());
    let mut best: Option<(f64, [f64; 4], Hyperparams)> = None;
    for (idx, h) in points.iter().enumerate() {
        let fold_scores: Vec<f64> = per_fold.iter().map(|f| f[idx].score).collect();
        let all_converged = per_fold.iter().all(|f| f[idx].converged);
        let mean_score = if all_converged && fold_scores.iter().all(|s| s.is_finite()) {
            fold_scores.iter().sum::<f64>() / fold_scores.len() as f64
        } else {
            f64::NAN
        };
        if mean_score.is_finite() {
            let key = tie_break_key(h);
            let better = match &best {
                None => true,
                Some((score, tuple, _)) => {
                    mean_score > *score || (mean_score == *score && tuple_greater(key, *tuple))
                }
            };
            if better {
                best = Some((mean_score, key, *h));
            }
        }
        table.push(GridPointResult { params: *h, mean_score, fold_scores, all_converged });
    }

    let (_, _, best_params) =
        best.ok_or_else(|| Error::Degenerate("every grid point failed to converge".into()))?;
    let spec = make_estimator_p(plan.preset, graph, Some(x.ncols()), best_params)?;
    let refit = fit(x, y, &spec, opts)?;
    Ok(CVResult { best_params, table, refit })
}

/// Convenience wrapper building the spec for a single parameter point.
pub fn fit_preset(
    x: &Array2<f64>,
    y: &Array1<f64>,
    graph: Option<&Graph>,
    preset: Preset,
    h: Hyperparams,
    opts: &FitOptions,
) -> Result<FitResult> {
    let spec = make_estimator_p(preset, graph, Some(x.ncols()), h)?;
    fit(x, y, &spec, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn folds_partition_the_index_range() {
        let folds = kfold_indices(4, 2, 7).unwrap();
        assert_eq!(folds.len(), 2);
        assert_eq!(folds[0].len(), 2);
        assert_eq!(folds[1].len(), 2);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);

        let folds = kfold_indices(5, 2, 7).unwrap();
        assert_eq!(folds[0].len(), 3);
        assert_eq!(folds[1].len(), 2);

        for n in [6usize, 11, 23] {
            for k in [2usize, 3, 5] {
                let folds = kfold_indices(n, k, 13).unwrap();
                let mut all: Vec<usize> = folds.concat();
                all.sort_unstable();
                assert_eq!(all, (0..n).collect::<Vec<_>>());
                let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
                let min = *sizes.iter().min().unwrap();
                let max = *sizes.iter().max().unwrap();
                assert!(max - min <= 1);
            }
        }
    }

    #[test]
    fn folds_are_deterministic_in_the_seed() {
        assert_eq!(kfold_indices(10, 3, 5).unwrap(), kfold_indices(10, 3, 5).unwrap());
        assert_ne!(kfold_indices(10, 3, 5).unwrap(), kfold_indices(10, 3, 6).unwrap());
        assert!(kfold_indices(3, 4, 0).is_err());
    }

    #[test]
    fn default_grid_includes_zero_and_twenty_log_points() {
        let g = default_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_abs_diff_eq!(g[1], 1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(g[20], 1e2, epsilon = 1e-12);
    }

    #[test]
    fn grid_points_are_the_cartesian_product() {
        let mut grids = BTreeMap::new();
        grids.insert("lambda1".to_string(), vec![0.0, 1.0]);
        grids.insert("lambda2".to_string(), vec![0.5, 2.0, 3.0]);
        let pts = grid_points(Preset::Gen, &grids).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].lambda1, 0.0);
        assert_eq!(pts[0].lambda2, 0.5);
        assert_eq!(pts[5].lambda1, 1.0);
        assert_eq!(pts[5].lambda2, 3.0);
    }

    #[test]
    fn plan_validation_rejects_bad_grids() {
        let mut grids = BTreeMap::new();
        grids.insert("lambdaL".to_string(), vec![1.0, 0.5]);
        assert!(CVPlan::new(5, 0, Preset::Lasso, grids.clone()).is_err());
        grids.insert("lambdaL".to_string(), vec![]);
        assert!(CVPlan::new(5, 0, Preset::Lasso, grids.clone()).is_err());
        grids.insert("lambdaL".to_string(), vec![0.5, 1.0]);
        assert!(CVPlan::new(1, 0, Preset::Lasso, grids.clone()).is_err());
        assert!(CVPlan::new(5, 0, Preset::Lasso, grids).is_ok());
        assert!(CVPlan::new(5, 0, Preset::Gen, BTreeMap::new()).is_err());
    }
}
