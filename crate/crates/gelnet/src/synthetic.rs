//! Synthetic experiment families: graph-aligned signals with controlled
//! jump counts and total variation, correlated Gaussian designs, noise,
//! and the error metrics reported for each estimator.

use ndarray::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphShape};
use crate::numerics::{sample_gaussian_rows, CovarianceMatrix, SeededRng};
use crate::penalty::{Hyperparams, Preset};
use crate::selection::{evaluate_grid_on_split, grid_points, tie_break_best, PointScore};
use crate::solver::FitOptions;

/// Signal families. Total variation below always means `||Gamma b||_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFamily {
    /// Staircase: `n_jumps` equal-height jumps at evenly spaced edges.
    PiecewiseConstant,
    /// Linear ramp; every crossed edge carries `tv / edges`.
    SmoothRamp,
    /// Few large jumps carrying half the variation plus a ramp carrying
    /// the other half; `n_jumps` counts the total support of `Gamma b`.
    Mixed,
    /// Barbell graphs: clique A at one level, clique B at the other,
    /// linear interpolation along the connecting path.
    BarbellLevels,
}

impl std::str::FromStr for SignalFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise_constant" | "pc" => Ok(SignalFamily::PiecewiseConstant),
            "smooth_ramp" | "ramp" => Ok(SignalFamily::SmoothRamp),
            "mixed" => Ok(SignalFamily::Mixed),
            "barbell_levels" | "barbell" => Ok(SignalFamily::BarbellLevels),
            other => Err(Error::InvalidParameter(format!("unknown signal family '{other}'"))),
        }
    }
}

/// Declared shape of a generated signal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SignalSpec {
    pub family: SignalFamily,
    /// Desired `||Gamma b||_1`.
    pub target_tv: f64,
    /// Desired `||Gamma b||_0` (piecewise constant / mixed families).
    pub n_jumps: usize,
    /// Clique levels for the barbell family.
    pub levels: (f64, f64),
}

impl SignalSpec {
    pub fn piecewise(target_tv: f64, n_jumps: usize) -> SignalSpec {
        SignalSpec {
            family: SignalFamily::PiecewiseConstant,
            target_tv,
            n_jumps,
            levels: (0.0, 0.0),
        }
    }

    pub fn ramp(target_tv: f64) -> SignalSpec {
        SignalSpec { family: SignalFamily::SmoothRamp, target_tv, n_jumps: 0, levels: (0.0, 0.0) }
    }

    pub fn mixed(target_tv: f64, n_jumps: usize) -> SignalSpec {
        SignalSpec { family: SignalFamily::Mixed, target_tv, n_jumps, levels: (0.0, 0.0) }
    }

    pub fn barbell_levels(a: f64, b: f64) -> SignalSpec {
        SignalSpec {
            family: SignalFamily::BarbellLevels,
            target_tv: (b - a).abs(),
            n_jumps: 0,
            levels: (a, b),
        }
    }
}

/// Level layout shared by the chain/grid generators: the signal varies
/// along axis 0 only, so a 2D grid behaves like a chain of `rows` levels
/// with `cols` parallel edges per boundary.
fn row_layout(g: &Graph) -> Result<(usize, usize)> {
    match g.shape() {
        GraphShape::Chain => Ok((g.p(), 1)),
        GraphShape::Grid(dims) if dims.len() == 2 => Ok((dims[0], dims[1])),
        _ => Err(Error::InvalidParameter(
            "this signal family is defined for chain and 2D grid graphs".into(),
        )),
    }
}

/// Evenly spaced boundary rows for `k` jumps over `rows` levels. Requires
/// `rows >= k + 1`; the returned rows are distinct and at most `rows - 2`
/// (a boundary at row `r` separates rows `r` and `r + 1`).
fn even_boundaries(rows: usize, k: usize) -> Vec<usize> {
    (1..=k).map(|t| t * rows / (k + 1) - 1).collect()
}

fn levels_to_signal(levels: &Array1<f64>, cols: usize) -> Array1<f64> {
    let rows = levels.len();
    let mut beta = Array1::zeros(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            beta[r * cols + c] = levels[r];
        }
    }
    beta
}

/// Generate a signal on `g` matching the declared total variation exactly
/// (within floating-point rounding) and the declared jump count exactly.
pub fn make_signal(g: &Graph, spec: &SignalSpec) -> Result<Array1<f64>> {
    if spec.target_tv < 0.0 || !spec.target_tv.is_finite() {
        return Err(Error::InvalidParameter("target_tv must be finite and >= 0".into()));
    }
    match spec.family {
        SignalFamily::PiecewiseConstant => {
            let (rows, cols) = row_layout(g)?;
            if spec.n_jumps == 0 || spec.n_jumps % cols != 0 {
                return Err(Error::InvalidParameter(format!(
                    "piecewise constant on this graph needs n_jumps to be a positive multiple of {cols}"
                )));
            }
            let boundaries = spec.n_jumps / cols;
            if boundaries + 1 > rows {
                return Err(Error::InvalidParameter(format!(
                    "{boundaries} jump boundaries do not fit {rows} levels"
                )));
            }
            // tv = boundaries * cols * height
            let height = spec.target_tv / spec.n_jumps as f64;
            let jump_rows = even_boundaries(rows, boundaries);
            let mut levels = Array1::zeros(rows);
            let mut value = 0.0;
            let mut next = 0;
            for r in 0..rows {
                levels[r] = value;
                if next < jump_rows.len() && jump_rows[next] == r {
                    value += height;
                    next += 1;
                }
            }
            Ok(levels_to_signal(&levels, cols))
        }
        SignalFamily::SmoothRamp => {
            let (rows, cols) = row_layout(g)?;
            if rows < 2 {
                return Err(Error::InvalidParameter("ramp needs at least two levels".into()));
            }
            // tv = (rows - 1) * cols * step
            let step = spec.target_tv / ((rows - 1) * cols) as f64;
            let levels = Array1::from_shape_fn(rows, |r| r as f64 * step);
            Ok(levels_to_signal(&levels, cols))
        }
        SignalFamily::Mixed => {
            let (rows, cols) = row_layout(g)?;
            if spec.n_jumps % cols != 0 {
                return Err(Error::InvalidParameter(format!(
                    "mixed on this graph needs n_jumps to be a multiple of {cols}"
                )));
            }
            let total_boundaries = spec.n_jumps / cols;
            if total_boundaries < 2 {
                return Err(Error::InvalidParameter(
                    "mixed needs at least 2 jump boundaries".into(),
                ));
            }
            // a few large jumps carry half the variation, a ramp the rest
            let jump_boundaries = (total_boundaries / 10).max(1);
            let ramp_boundaries = total_boundaries - jump_boundaries;
            let jump_region_rows = rows / 2;
            let ramp_rows = ramp_boundaries + 1;
            if jump_boundaries + 1 > jump_region_rows || jump_region_rows + ramp_rows > rows {
                return Err(Error::InvalidParameter(format!(
                    "mixed signal with {total_boundaries} boundaries does not fit {rows} levels"
                )));
            }
            let jump_height = 0.5 * spec.target_tv / (jump_boundaries * cols) as f64;
            let ramp_step = 0.5 * spec.target_tv / (ramp_boundaries * cols) as f64;

            let jump_rows = even_boundaries(jump_region_rows, jump_boundaries);
            let mut levels = Array1::zeros(rows);
            let mut value = 0.0;
            let mut next = 0;
            for r in 0..jump_region_rows {
                levels[r] = value;
                if next < jump_rows.len() && jump_rows[next] == r {
                    value += jump_height;
                    next += 1;
                }
            }
            let ramp_start = rows - ramp_rows;
            for r in jump_region_rows..ramp_start {
                levels[r] = value;
            }
            for (i, r) in (ramp_start..rows).enumerate() {
                levels[r] = value + i as f64 * ramp_step;
            }
            Ok(levels_to_signal(&levels, cols))
        }
        SignalFamily::BarbellLevels => {
            let (k, path_edges) = match g.shape() {
                GraphShape::Barbell { clique, path_edges } => (*clique, *path_edges),
                _ => {
                    return Err(Error::InvalidParameter(
                        "barbell_levels requires a barbell graph".into(),
                    ))
                }
            };
            let p = g.p();
            let (a, b) = spec.levels;
            if a == b {
                return Err(Error::InvalidParameter("barbell levels must differ".into()));
            }
            let mut beta = Array1::zeros(p);
            for v in 0..k {
                beta[v] = a;
            }
            for v in (p - k)..p {
                beta[v] = b;
            }
            // linear interpolation along the path vertices k-1 ..= p-k
            let step = (b - a) / path_edges as f64;
            for (i, v) in ((k - 1)..=(p - k)).enumerate() {
                beta[v] = a + i as f64 * step;
            }
            beta[p - k] = b;
            Ok(beta)
        }
    }
}

/// Norms of `Gamma b` plus plain sparsity, with zero threshold `1e-12`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalStats {
    pub tv_l0: usize,
    pub tv_l1: f64,
    pub tv_linf: f64,
    /// `(q, sum_j |(Gamma b)_j|^q)` for each requested `q` in (0, 1].
    pub lq_sums: Vec<(f64, f64)>,
    /// `||b||_0`.
    pub sparsity: usize,
}

const ZERO_THRESHOLD: f64 = 1e-12;

pub fn signal_stats(g: &Graph, beta: &Array1<f64>, q_list: &[f64]) -> Result<SignalStats> {
    if beta.len() != g.p() {
        return Err(Error::DimensionMismatch(format!(
            "beta has {} entries for a graph on {} vertices",
            beta.len(),
            g.p()
        )));
    }
    let diffs: Vec<f64> = g.edges().iter().map(|&(i, j)| (beta[i] - beta[j]).abs()).collect();
    let tv_l0 = diffs.iter().filter(|&&d| d > ZERO_THRESHOLD).count();
    let tv_l1 = diffs.iter().sum();
    let tv_linf = diffs.iter().cloned().fold(0.0, f64::max);
    let mut lq_sums = Vec::with_capacity(q_list.len());
    for &q in q_list {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParameter(format!("q must be in (0, 1], got {q}")));
        }
        let sum = diffs.iter().filter(|&&d| d > ZERO_THRESHOLD).map(|d| d.powf(q)).sum();
        lq_sums.push((q, sum));
    }
    let sparsity = beta.iter().filter(|&&v| v.abs() > ZERO_THRESHOLD).count();
    Ok(SignalStats { tv_l0, tv_l1, tv_linf, lq_sums, sparsity })
}

/// One draw of the regression model `y = X b* + eps` with train,
/// validation and test splits, fully determined by the seed.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub x_train: Array2<f64>,
    pub y_train: Array1<f64>,
    pub x_val: Array2<f64>,
    pub y_val: Array1<f64>,
    pub x_test: Array2<f64>,
    pub y_test: Array1<f64>,
    pub beta_star: Array1<f64>,
    pub sigma: f64,
    pub seed: u64,
}

/// Draw the three splits independently from `N(0, Sigma)` designs and
/// `N(0, sigma^2)` noise.
pub fn simulate(
    sigma_cov: &CovarianceMatrix,
    beta_star: &Array1<f64>,
    sigma: f64,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<ExperimentRun> {
    if sigma < 0.0 {
        return Err(Error::InvalidParameter(format!("noise sd must be >= 0, got {sigma}")));
    }
    if beta_star.len() != sigma_cov.p() {
        return Err(Error::DimensionMismatch(format!(
            "beta_star has {} entries, covariance is {}x{}",
            beta_star.len(),
            sigma_cov.p(),
            sigma_cov.p()
        )));
    }
    let mut rng = SeededRng::new(seed);
    let draw = |n: usize, rng: &mut SeededRng| -> Result<(Array2<f64>, Array1<f64>)> {
        let x = sample_gaussian_rows(n, sigma_cov, rng)?;
        let noise = rng.normal_vector(n) * sigma;
        let y = x.dot(beta_star) + noise;
        Ok((x, y))
    };
    let (x_train, y_train) = draw(n_train, &mut rng)?;
    let (x_val, y_val) = draw(n_val, &mut rng)?;
    let (x_test, y_test) = draw(n_test, &mut rng)?;
    Ok(ExperimentRun {
        x_train,
        y_train,
        x_val,
        y_val,
        x_test,
        y_test,
        beta_star: beta_star.clone(),
        sigma,
        seed,
    })
}

/// Estimation and prediction errors of an estimate against the truth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `||b_hat - b*||_2`
    pub estimation_error: f64,
    /// `(1/n_test) ||X_test (b_hat - b*)||_2^2`
    pub prediction_error: f64,
}

pub fn evaluate(beta_hat: &Array1<f64>, run: &ExperimentRun) -> Result<ErrorMetrics> {
    if beta_hat.len() != run.beta_star.len() {
        return Err(Error::DimensionMismatch(format!(
            "beta_hat has {} entries, beta_star has {}",
            beta_hat.len(),
            run.beta_star.len()
        )));
    }
    let diff = beta_hat - &run.beta_star;
    let proj = run.x_test.dot(&diff);
    Ok(ErrorMetrics {
        estimation_error: diff.dot(&diff).sqrt(),
        prediction_error: proj.dot(&proj) / run.x_test.nrows() as f64,
    })
}

/// Full experiment definition: model, scale, estimators and their grids.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graph: Graph,
    pub covariance: CovarianceMatrix,
    pub signal: SignalSpec,
    pub sigma: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub base_seed: u64,
    pub replicates: usize,
    pub estimators: Vec<Preset>,
    /// Grids per hyperparameter name; estimators pick the ones they use.
    pub grids: std::collections::BTreeMap<String, Vec<f64>>,
    pub fit: FitOptions,
}

/// Per-replicate outcome of one estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub preset: Preset,
    pub params: Hyperparams,
    pub estimation_error: f64,
    pub prediction_error: f64,
    pub converged: bool,
}

/// Median and quartiles of one metric for one estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub preset: Preset,
    pub metric: String,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub replicates: Vec<ReplicateRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Run the experiment: per replicate, draw data with seed `base + i`, pick
/// each estimator's hyperparameters by the best validation score over its
/// grid (fit on train, score -MSE on the validation split), then report
/// errors of the selected fit against the truth on the test split.
/// Replicates run in parallel; the output order is deterministic.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let beta_star = make_signal(&cfg.graph, &cfg.signal)?;
    let results: Vec<Result<Vec<ReplicateRecord>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = SeededRng::derive(cfg.base_seed, rep as u64);
            let run = simulate(
                &cfg.covariance,
                &beta_star,
                cfg.sigma,
                cfg.n_train,
                cfg.n_val,
                cfg.n_test,
                seed,
            )?;
            let mut records = Vec::with_capacity(cfg.estimators.len());
            for &preset in &cfg.estimators {
                let points = grid_points(preset, &cfg.grids)?;
                let scores: Vec<PointScore> = evaluate_grid_on_split(
                    &run.x_train,
                    &run.y_train,
                    &run.x_val,
                    &run.y_val,
                    Some(&cfg.graph),
                    preset,
                    &points,
                    &cfg.fit,
                )?;
                let best = tie_break_best(&points, &scores);
                // the selected grid point's training fit is the final model
                let (params, beta_hat, selected) = match best {
                    Some(idx) => (points[idx], &scores[idx].beta, true),
                    // no grid point converged; report the first and flag it
                    None => (points[0], &scores[0].beta, false),
                };
                let metrics = evaluate(beta_hat, &run)?;
                records.push(ReplicateRecord {
                    replicate: rep,
                    seed,
                    preset,
                    params,
                    estimation_error: metrics.estimation_error,
                    prediction_error: metrics.prediction_error,
                    converged: selected,
                });
            }
            Ok(records)
        })
        .collect();

    let mut replicates = Vec::with_capacity(cfg.replicates * cfg.estimators.len());
    for r in results {
        replicates.extend(r?);
    }

    let mut summary = Vec::new();
    for &preset in &cfg.estimators {
        let rows: Vec<&ReplicateRecord> =
            replicates.iter().filter(|r| r.preset == preset).collect();
        let failures = rows.iter().filter(|r| !r.converged).count();
        for (metric, pick) in [
            (
                "estimation_error",
                (|r: &&ReplicateRecord| r.estimation_error) as fn(&&ReplicateRecord) -> f64,
            ),
            ("prediction_error", |r: &&ReplicateRecord| r.prediction_error),
        ] {
            let mut vals: Vec<f64> = rows.iter().filter(|r| r.converged).map(pick).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            summary.push(SummaryRow {
                preset,
                metric: metric.to_string(),
                median: percentile(&vals, 0.5),
                q25: percentile(&vals, 0.25),
                q75: percentile(&vals, 0.75),
                failures,
            });
        }
    }
    Ok(ExperimentReport { replicates, summary })
}
