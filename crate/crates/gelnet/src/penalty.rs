//! The unified penalty `lambda1 * sum_j w_j |(A b)_j| + lambda2 * ||B b||_2^2`
//! and the augmentation trick that folds the quadratic part into the loss,
//! leaving a weighted l1-only problem. Presets cover OLS, the Lasso, the
//! Elastic Net, the Fused Lasso, the Smooth Lasso and the graph elastic net.

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Scaling convention for the squared-error loss.
///
/// * `HalfSumSquares`: `(1/2) ||y - X b||^2` — the computational convention
///   used by every solver in this crate.
/// * `MeanSumSquares`: `(1/n) ||y - X b||^2` — the convention of the
///   population-level analysis. Converting to `HalfSumSquares` multiplies
///   both penalty levels by `n / 2` and leaves the minimizer unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossConvention {
    HalfSumSquares,
    MeanSumSquares,
}

/// Estimator presets expressible in the unified penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Ols,
    Lasso,
    ElasticNet,
    FusedLasso,
    SmoothLasso,
    Gen,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Ols => "ols",
            Preset::Lasso => "lasso",
            Preset::ElasticNet => "elastic_net",
            Preset::FusedLasso => "fused_lasso",
            Preset::SmoothLasso => "smooth_lasso",
            Preset::Gen => "gen",
        }
    }

    pub fn needs_graph(&self) -> bool {
        matches!(self, Preset::FusedLasso | Preset::SmoothLasso | Preset::Gen)
    }

    /// Hyperparameter names this preset consumes, in grid order.
    pub fn hyperparameters(&self) -> &'static [&'static str] {
        match self {
            Preset::Ols => &[],
            Preset::Lasso => &["lambdaL"],
            Preset::ElasticNet => &["lambdaL", "lambdaE"],
            Preset::FusedLasso => &["lambda1", "lambdaL"],
            Preset::SmoothLasso => &["lambda2", "lambdaL"],
            Preset::Gen => &["lambda1", "lambda2"],
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(Preset::Ols),
            "lasso" | "l" => Ok(Preset::Lasso),
            "elastic_net" | "en" => Ok(Preset::ElasticNet),
            "fused_lasso" | "fl" => Ok(Preset::FusedLasso),
            "smooth_lasso" | "sl" => Ok(Preset::SmoothLasso),
            "gen" => Ok(Preset::Gen),
            other => Err(Error::InvalidParameter(format!("unknown preset '{other}'"))),
        }
    }
}

/// Hyperparameter bundle for [`make_estimator`]. Unused values default to 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Level of the graph-difference l1 term.
    pub lambda1: f64,
    /// Level of the quadratic graph-difference term.
    pub lambda2: f64,
    /// Level of the plain l1 term (Lasso component).
    pub lambda_l: f64,
    /// Level of the plain ridge term (Elastic Net component).
    pub lambda_e: f64,
}

impl Hyperparams {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "lambda1" => Some(self.lambda1),
            "lambda2" => Some(self.lambda2),
            "lambdaL" => Some(self.lambda_l),
            "lambdaE" => Some(self.lambda_e),
            _ => None,
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "lambda1" => self.lambda1 = value,
            "lambda2" => self.lambda2 = value,
            "lambdaL" => self.lambda_l = value,
            "lambdaE" => self.lambda_e = value,
            other => {
                return Err(Error::InvalidParameter(format!("unknown hyperparameter '{other}'")))
            }
        }
        Ok(())
    }
}

/// One representation for every supported penalty:
/// `lambda1 * sum_j w_j |(A b)_j| + lambda2 * ||B b||_2^2` added to the loss.
#[derive(Debug, Clone)]
pub struct PenaltySpec {
    /// l1 operator, `m1 x p`.
    pub l1_matrix: Array2<f64>,
    /// Positive per-row weights for the l1 term, length `m1`.
    pub l1_weights: Array1<f64>,
    pub lambda1: f64,
    /// Quadratic operator, `m2 x p`.
    pub l2_matrix: Array2<f64>,
    pub lambda2: f64,
    pub loss: LossConvention,
}

impl PenaltySpec {
    pub fn new(
        l1_matrix: Array2<f64>,
        l1_weights: Array1<f64>,
        lambda1: f64,
        l2_matrix: Array2<f64>,
        lambda2: f64,
        loss: LossConvention,
    ) -> Result<PenaltySpec> {
        if lambda1 < 0.0 || lambda2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "penalty levels must be nonnegative (lambda1 = {lambda1}, lambda2 = {lambda2})"
            )));
        }
        if l1_weights.len() != l1_matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} l1 rows",
                l1_weights.len(),
                l1_matrix.nrows()
            )));
        }
        if l1_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter("l1 weights must be positive".into()));
        }
        if l1_matrix.ncols() != l2_matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "l1 operator has {} columns, l2 operator has {}",
                l1_matrix.ncols(),
                l2_matrix.ncols()
            )));
        }
        Ok(PenaltySpec { l1_matrix, l1_weights, lambda1, l2_matrix, lambda2, loss })
    }

    pub fn p(&self) -> usize {
        self.l1_matrix.ncols()
    }

    /// Rescale a mean-loss spec into the half-loss convention for a sample
    /// of size `n`: both lambdas pick up a factor `n / 2`. Half-loss specs
    /// are returned unchanged.
    pub fn to_half_sum_squares(&self, n: usize) -> PenaltySpec {
        match self.loss {
            LossConvention::HalfSumSquares => self.clone(),
            LossConvention::MeanSumSquares => {
                let f = n as f64 / 2.0;
                PenaltySpec {
                    l1_matrix: self.l1_matrix.clone(),
                    l1_weights: self.l1_weights.clone(),
                    lambda1: self.lambda1 * f,
                    l2_matrix: self.l2_matrix.clone(),
                    lambda2: self.lambda2 * f,
                    loss: LossConvention::HalfSumSquares,
                }
            }
        }
    }

    /// Per-coordinate dual box radii `lambda1 * w_j`.
    pub fn box_radii(&self) -> Array1<f64> {
        &self.l1_weights * self.lambda1
    }

    /// Penalty value at `beta`.
    pub fn penalty_value(&self, beta: &Array1<f64>) -> f64 {
        signal_penalty_value(beta, self)
    }

    /// Full objective `loss + penalty` at `beta`.
    pub fn objective(&self, x: &Array2<f64>, y: &Array1<f64>, beta: &Array1<f64>) -> f64 {
        let r = y - &x.dot(beta);
        let ss = r.dot(&r);
        let loss = match self.loss {
            LossConvention::HalfSumSquares => 0.5 * ss,
            LossConvention::MeanSumSquares => ss / y.len() as f64,
        };
        loss + self.penalty_value(beta)
    }
}

fn empty_rows(p: usize) -> Array2<f64> {
    Array2::zeros((0, p))
}

/// Build the [`PenaltySpec`] for a preset in the half-loss convention.
///
/// A graph is required for the graph-based presets; the graph-independent
/// presets use it only to size their identity operators. The degenerate
/// Fused Lasso with `lambda1 = 0` is represented as a plain Lasso to avoid
/// 0/0 weights, and `lambdaL = 0` drops the identity block entirely.
pub fn make_estimator(preset: Preset, g: Option<&Graph>, h: Hyperparams) -> Result<PenaltySpec> {
    make_estimator_p(preset, g, g.map(|g| g.p()), h)
}

/// As [`make_estimator`] but with an explicit coordinate count for the
/// graph-independent presets (OLS, Lasso, Elastic Net).
pub fn make_estimator_p(
    preset: Preset,
    g: Option<&Graph>,
    p: Option<usize>,
    h: Hyperparams,
) -> Result<PenaltySpec> {
    for (name, v) in [
        ("lambda1", h.lambda1),
        ("lambda2", h.lambda2),
        ("lambdaL", h.lambda_l),
        ("lambdaE", h.lambda_e),
    ] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let graph = || {
        g.ok_or_else(|| {
            Error::InvalidParameter(format!("preset '{}' requires a graph", preset.name()))
        })
    };
    let coords = || {
        p.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "preset '{}' needs a coordinate count (pass a graph or p)",
                preset.name()
            ))
        })
    };
    let conv = LossConvention::HalfSumSquares;
    match preset {
        Preset::Ols => {
            let p = coords()?;
            PenaltySpec::new(empty_rows(p), Array1::zeros(0), 0.0, empty_rows(p), 0.0, conv)
        }
        Preset::Lasso => {
            let p = coords()?;
            PenaltySpec::new(Array2::eye(p), Array1::ones(p), h.lambda_l, empty_rows(p), 0.0, conv)
        }
        Preset::ElasticNet => {
            let p = coords()?;
            PenaltySpec::new(
                Array2::eye(p),
                Array1::ones(p),
                h.lambda_l,
                Array2::eye(p),
                h.lambda_e,
                conv,
            )
        }
        Preset::FusedLasso => {
            let g = graph()?;
            let p = g.p();
            if h.lambda1 == 0.0 {
                // degenerates to lasso(lambdaL)
                return PenaltySpec::new(
                    Array2::eye(p),
                    Array1::ones(p),
                    h.lambda_l,
                    empty_rows(p),
                    0.0,
                    conv,
                );
            }
            let gamma = g.incidence_matrix();
            if h.lambda_l == 0.0 {
                return PenaltySpec::new(
                    gamma,
                    Array1::ones(g.m()),
                    h.lambda1,
                    empty_rows(p),
                    0.0,
                    conv,
                );
            }
            let m = g.m();
            let mut a = Array2::zeros((m + p, p));
            a.slice_mut(s![..m, ..]).assign(&gamma);
            a.slice_mut(s![m.., ..]).assign(&Array2::eye(p));
            let mut w = Array1::ones(m + p);
            w.slice_mut(s![m..]).fill(h.lambda_l / h.lambda1);
            PenaltySpec::new(a, w, h.lambda1, empty_rows(p), 0.0, conv)
        }
        Preset::SmoothLasso => {
            let g = graph()?;
            let p = g.p();
            PenaltySpec::new(
                Array2::eye(p),
                Array1::ones(p),
                h.lambda_l,
                g.incidence_matrix(),
                h.lambda2,
                conv,
            )
        }
        Preset::Gen => {
            let g = graph()?;
            let gamma = g.incidence_matrix();
            PenaltySpec::new(gamma.clone(), Array1::ones(g.m()), h.lambda1, gamma, h.lambda2, conv)
        }
    }
}

/// The combined l1 + quadratic penalty evaluated at a signal vector.
pub fn signal_penalty_value(beta: &Array1<f64>, spec: &PenaltySpec) -> f64 {
    let mut value = 0.0;
    if spec.lambda1 > 0.0 && spec.l1_matrix.nrows() > 0 {
        let a_beta = spec.l1_matrix.dot(beta);
        value += spec.lambda1
            * a_beta.iter().zip(spec.l1_weights.iter()).map(|(x, w)| w * x.abs()).sum::<f64>();
    }
    if spec.lambda2 > 0.0 && spec.l2_matrix.nrows() > 0 {
        let b_beta = spec.l2_matrix.dot(beta);
        value += spec.lambda2 * b_beta.dot(&b_beta);
    }
    value
}

/// The l1-only problem obtained by stacking `sqrt(2 lambda2) B` under `X`.
#[derive(Debug, Clone)]
pub struct AugmentedProblem {
    /// `(n + m2) x p` stacked design.
    pub x_tilde: Array2<f64>,
    /// `(n + m2)` response with zeros appended.
    pub y_tilde: Array1<f64>,
    /// l1 operator carried through, `m1 x p`.
    pub l1_matrix: Array2<f64>,
    /// Positive weights carried through.
    pub l1_weights: Array1<f64>,
    pub lambda1: f64,
    /// Number of genuine observations (rows of the original `X`).
    pub n_observations: usize,
}

impl AugmentedProblem {
    pub fn p(&self) -> usize {
        self.x_tilde.ncols()
    }

    pub fn m1(&self) -> usize {
        self.l1_matrix.nrows()
    }

    /// Dual box radii `lambda1 * w_j`.
    pub fn box_radii(&self) -> Array1<f64> {
        &self.l1_weights * self.lambda1
    }

    /// `(1/2) ||y_tilde - x_tilde b||^2 + lambda1 sum_j w_j |(A b)_j|`,
    /// the half-loss objective of the augmented problem.
    pub fn objective(&self, beta: &Array1<f64>) -> f64 {
        let r = &self.y_tilde - &self.x_tilde.dot(beta);
        let mut value = 0.5 * r.dot(&r);
        if self.lambda1 > 0.0 && self.m1() > 0 {
            let a_beta = self.l1_matrix.dot(beta);
            value += self.lambda1
                * a_beta.iter().zip(self.l1_weights.iter()).map(|(x, w)| w * x.abs()).sum::<f64>();
        }
        value
    }
}

/// Stack `sqrt(2 lambda2) B` under `X` and zeros under `y`. Mean-loss specs
/// are rescaled to the half-loss convention first; when `lambda2 = 0` the
/// augmentation adds no rows.
pub fn augment(x: &Array2<f64>, y: &Array1<f64>, spec: &PenaltySpec) -> Result<AugmentedProblem> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {n} rows but y has {} entries",
            y.len()
        )));
    }
    let spec = spec.to_half_sum_squares(n);
    let p = x.ncols();
    if spec.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "penalty is over {} coordinates but X has {p} columns",
            spec.p()
        )));
    }
    let extra = if spec.lambda2 > 0.0 { spec.l2_matrix.nrows() } else { 0 };
    let mut x_tilde = Array2::zeros((n + extra, p));
    x_tilde.slice_mut(s![..n, ..]).assign(x);
    if extra > 0 {
        let scale = (2.0 * spec.lambda2).sqrt();
        x_tilde.slice_mut(s![n.., ..]).assign(&(&spec.l2_matrix * scale));
    }
    let mut y_tilde = Array1::zeros(n + extra);
    y_tilde.slice_mut(s![..n]).assign(y);
    Ok(AugmentedProblem {
        x_tilde,
        y_tilde,
        l1_matrix: spec.l1_matrix,
        l1_weights: spec.l1_weights,
        lambda1: spec.lambda1,
        n_observations: n,
    })
}
