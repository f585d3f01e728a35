//! Command-line surface: every subcommand resolves its inputs, runs the
//! corresponding library operation and writes CSV/JSON artifacts plus a
//! `manifest.json` echoing the resolved configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use ndarray::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{graph_spectra, Graph};
use crate::io;
use crate::numerics::{covariance, CovarianceKind, CovarianceMatrix, DEFAULT_SVD_RTOL};
use crate::penalty::{Hyperparams, Preset};
use crate::selection::{default_grid, grid_search_cv, CVPlan};
use crate::solver::{fit, FitOptions, FitResult, SolverKind};
use crate::synthetic::{
    make_signal, run_experiment, signal_stats, ExperimentConfig, SignalFamily, SignalSpec,
};
use crate::theory::{min_eigen_curve, re_condition_trial, theoretical_lambdas};

/// Exit codes: 0 success, 2 usage/validation, 3 solver non-convergence,
/// 4 I/O error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Parse(_) => EXIT_IO,
        Error::Linalg(_) => EXIT_NONCONVERGED,
        Error::InvalidParameter(_) | Error::DimensionMismatch(_) | Error::Degenerate(_) => {
            EXIT_USAGE
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gelnet", version, about = "Graph elastic net regression toolkit")]
pub struct Cli {
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit one penalized model and write beta.csv + diagnostics.json.
    Fit(FitArgs),
    /// k-fold cross-validated grid search; writes cv_table.csv, best.json, beta.csv.
    Cv(CvArgs),
    /// Synthetic study from a config file; writes replicates.csv, summary.csv.
    Synth(SynthArgs),
    /// Wall-time benchmark over problem sizes; writes runtimes.csv.
    Bench(BenchArgs),
    /// Minimum-eigenvalue curve of (1/64) Sigma + lambda2 L; writes eigen_curve.csv.
    EigenCurve(EigenCurveArgs),
    /// Monte Carlo check of the restricted-eigenvalue event; writes re_check.csv.
    ReCheck(ReCheckArgs),
    /// Dump incidence/Laplacian matrices and spectra of a graph.
    Graph(GraphArgs),
}

#[derive(Args, Debug)]
pub struct SolverArgs {
    /// cd, ip or admm (default cd).
    #[arg(long)]
    pub solver: Option<String>,
    /// Convergence tolerance (defaults: cd/ip 1e-4, admm 1e-3).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Interior point barrier growth factor.
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    /// Interior point backtracking decrease constant.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Interior point backtracking shrink factor.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// ADMM penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    pub rho_admm: f64,
}

impl SolverArgs {
    pub fn to_options(&self) -> Result<FitOptions> {
        Ok(FitOptions {
            solver: SolverKind::from_str(self.solver.as_deref().unwrap_or("cd"))?,
            tol: self.tol,
            max_iter: self.max_iter,
            tau: self.tau,
            alpha: self.alpha,
            gamma: self.gamma,
            rho_admm: self.rho_admm,
            ..FitOptions::default()
        })
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Design matrix CSV (rows = observations).
    #[arg(long, short = 'x')]
    pub x: Option<PathBuf>,
    /// Response vector CSV.
    #[arg(long, short = 'y')]
    pub y: Option<PathBuf>,
    /// Graph: edge-list path or preset like chain:10, grid:3x3, star:5,
    /// complete:6, barbell:4,3.
    #[arg(long)]
    pub graph: Option<String>,
    /// ols, lasso, elastic_net, fused_lasso, smooth_lasso or gen.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long = "lambdaL")]
    pub lambda_l: Option<f64>,
    #[arg(long = "lambdaE")]
    pub lambda_e: Option<f64>,
    /// Key-value run configuration (keys: x, y, graph, preset, lambda1,
    /// lambda2, lambdaL, lambdaE, solver, tol, max_iter). Flags given on
    /// the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory (created if absent).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long, short = 'x')]
    pub x: PathBuf,
    #[arg(long, short = 'y')]
    pub y: PathBuf,
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long, default_value = "gen")]
    pub preset: String,
    /// Fold count.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated ascending grids; defaults to 0 plus 20 log-spaced
    /// values in [1e-3, 1e2] for every hyperparameter the preset uses.
    #[arg(long = "grid-lambda1")]
    pub grid_lambda1: Option<String>,
    #[arg(long = "grid-lambda2")]
    pub grid_lambda2: Option<String>,
    #[arg(long = "grid-lambdaL")]
    pub grid_lambda_l: Option<String>,
    #[arg(long = "grid-lambdaE")]
    pub grid_lambda_e: Option<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Experiment definition file (key = value lines, # comments).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated points graph:PxN, e.g. chain:250x2000,chain:500x2000.
    #[arg(long)]
    pub points: String,
    /// Comma-separated solvers out of cd, ip, admm.
    #[arg(long, default_value = "cd")]
    pub solvers: String,
    /// Per-run wall-clock cutoff in seconds; overruns are censored.
    #[arg(long, default_value_t = 600.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest adjacent signal difference of the synthetic truth.
    #[arg(long, default_value_t = 0.3)]
    pub tv_linf: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EigenCurveArgs {
    /// identity:P, toeplitz:P,RHO or laplacian_inverse:C (uses --graph).
    #[arg(long)]
    pub covariance: String,
    #[arg(long)]
    pub graph: String,
    /// Comma list or lo:hi:count linspace, e.g. 0:1:21.
    #[arg(long = "lambda2-grid", default_value = "0:1:21")]
    pub lambda2_grid: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReCheckArgs {
    #[arg(long)]
    pub covariance: String,
    #[arg(long)]
    pub graph: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 20)]
    pub directions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    /// chain, grid, star, complete or barbell.
    #[arg(long)]
    pub kind: Option<String>,
    /// Vertex count for chain/star/complete.
    #[arg(long)]
    pub p: Option<usize>,
    /// Grid dimensions like 3x3.
    #[arg(long)]
    pub dims: Option<String>,
    /// Barbell clique size.
    #[arg(long)]
    pub clique: Option<usize>,
    /// Barbell path edge count.
    #[arg(long = "path-len")]
    pub path_len: Option<usize>,
    /// Alternatively: a full graph spec or edge-list path.
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parse `chain:10`, `grid:3x3`, `star:5`, `complete:6`, `barbell:4,3`,
/// or fall back to reading an edge-list file.
pub fn parse_graph_source(s: &str) -> Result<Graph> {
    if let Some((kind, params)) = s.split_once(':') {
        match kind {
            "chain" => return Graph::chain(parse_num(params)?),
            "star" => return Graph::star(parse_num(params)?),
            "complete" => return Graph::complete(parse_num(params)?),
            "grid" => {
                let dims: Vec<usize> = params
                    .split('x')
                    .map(parse_num)
                    .collect::<Result<_>>()?;
                return Graph::grid(&dims);
            }
            "barbell" => {
                let parts: Vec<&str> = params.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::InvalidParameter(
                        "barbell takes clique,path_edges".into(),
                    ));
                }
                return Graph::barbell(parse_num(parts[0])?, parse_num(parts[1])?);
            }
            _ => {}
        }
    }
    io::read_edge_list(Path::new(s))
}

fn parse_num(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::InvalidParameter(format!("'{s}' is not a positive integer")))
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("'{s}' is not a number")))
}

/// Parse `identity:P`, `toeplitz:P,RHO` or `laplacian_inverse:C` (the last
/// takes its graph from context).
pub fn parse_covariance(s: &str, graph: Option<&Graph>) -> Result<CovarianceMatrix> {
    let (kind, params) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidParameter(format!("covariance spec '{s}' needs kind:params")))?;
    match kind {
        "identity" => covariance(CovarianceKind::Identity { p: parse_num(params)? }),
        "toeplitz" => {
            let parts: Vec<&str> = params.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::InvalidParameter("toeplitz takes p,rho".into()));
            }
            covariance(CovarianceKind::Toeplitz {
                p: parse_num(parts[0])?,
                rho: parse_float(parts[1])?,
            })
        }
        "laplacian_inverse" => {
            let g = graph.ok_or_else(|| {
                Error::InvalidParameter("laplacian_inverse covariance needs a graph".into())
            })?;
            covariance(CovarianceKind::LaplacianInverse { graph: g.clone(), c: parse_float(params)? })
        }
        other => Err(Error::InvalidParameter(format!("unknown covariance kind '{other}'"))),
    }
}

/// Comma list of values, or `lo:hi:count` for a linspace.
pub fn parse_value_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let mut values = if parts.len() == 3 {
        let lo = parse_float(parts[0])?;
        let hi = parse_float(parts[1])?;
        let count = parse_num(parts[2])?;
        if count < 2 {
            return Err(Error::InvalidParameter("linspace needs at least 2 points".into()));
        }
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
    } else {
        s.split(',').map(parse_float).collect::<Result<Vec<f64>>>()?
    };
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(values)
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_manifest(dir: &Path, command: &str, config: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

fn load_xy(
    x_path: &Path,
    y_path: &Path,
    graph: Option<&Graph>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let x = io::read_matrix_csv(x_path)?;
    let y = io::read_vector_csv(y_path)?;
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but y has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if let Some(g) = graph {
        if g.p() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "graph has {} vertices but X has {} columns",
                g.p(),
                x.ncols()
            )));
        }
    }
    Ok((x, y))
}

fn fit_diagnostics(result: &FitResult) -> serde_json::Value {
    json!({
        "solver": result.solver.name(),
        "iterations": result.dual.iterations,
        "converged": result.dual.converged,
        "residual": result.dual.residual,
        "kkt_residual": result.kkt_residual,
        "duality_gap": result.duality_gap,
        "wall_time_seconds": result.wall_time,
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let config = match &args.config {
        Some(path) => parse_kv_config(path)?,
        None => BTreeMap::new(),
    };
    let merged_path = |flag: &Option<PathBuf>, key: &str| -> Result<PathBuf> {
        flag.clone()
            .or_else(|| config.get(key).map(PathBuf::from))
            .ok_or_else(|| Error::InvalidParameter(format!("missing --{key} (flag or config key)")))
    };
    let merged_level = |flag: Option<f64>, key: &str| -> Result<f64> {
        match flag {
            Some(v) => Ok(v),
            None => config.get(key).map(|s| parse_float(s)).transpose().map(|v| v.unwrap_or(0.0)),
        }
    };
    let x_path = merged_path(&args.x, "x")?;
    let y_path = merged_path(&args.y, "y")?;
    let graph_src = args.graph.clone().or_else(|| config.get("graph").cloned());
    let graph = graph_src.as_deref().map(parse_graph_source).transpose()?;
    let preset_name = args
        .preset
        .clone()
        .or_else(|| config.get("preset").cloned())
        .unwrap_or_else(|| "gen".to_string());
    let preset = Preset::from_str(&preset_name)?;
    let (x, y) = load_xy(&x_path, &y_path, graph.as_ref())?;
    let h = Hyperparams {
        lambda1: merged_level(args.lambda1, "lambda1")?,
        lambda2: merged_level(args.lambda2, "lambda2")?,
        lambda_l: merged_level(args.lambda_l, "lambdaL")?,
        lambda_e: merged_level(args.lambda_e, "lambdaE")?,
    };
    let spec = crate::penalty::make_estimator_p(preset, graph.as_ref(), Some(x.ncols()), h)?;
    let mut opts = args.solver.to_options()?;
    if args.solver.solver.is_none() {
        if let Some(s) = config.get("solver") {
            opts.solver = SolverKind::from_str(s)?;
        }
    }
    if opts.tol.is_none() {
        opts.tol = config.get("tol").map(|s| parse_float(s)).transpose()?;
    }
    if opts.max_iter.is_none() {
        opts.max_iter = config.get("max_iter").map(|s| parse_num(s)).transpose()?;
    }
    let result = fit(&x, &y, &spec, &opts)?;

    ensure_out_dir(&args.out)?;
    io::write_vector_csv(&args.out.join("beta.csv"), &result.beta_hat.view())?;
    std::fs::write(
        args.out.join("diagnostics.json"),
        serde_json::to_string_pretty(&fit_diagnostics(&result))? + "\n",
    )?;
    write_manifest(
        &args.out,
        "fit",
        json!({
            "x": x_path, "y": y_path, "graph": graph_src, "preset": preset.name(),
            "lambda1": h.lambda1, "lambda2": h.lambda2,
            "lambdaL": h.lambda_l, "lambdaE": h.lambda_e,
            "solver": opts.solver.name(), "tol": opts.tolerance(),
            "max_iter": opts.iteration_cap(),
            "tau": opts.tau, "alpha": opts.alpha, "gamma": opts.gamma,
            "rho_admm": opts.rho_admm,
        }),
    )?;
    Ok(if result.dual.converged { EXIT_OK } else { EXIT_NONCONVERGED })
}

pub fn cmd_cv(args: &CvArgs) -> Result<i32> {
    let graph = args.graph.as_deref().map(parse_graph_source).transpose()?;
    let preset = Preset::from_str(&args.preset)?;
    let (x, y) = load_xy(&args.x, &args.y, graph.as_ref())?;

    let mut grids: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let overrides = [
        ("lambda1", &args.grid_lambda1),
        ("lambda2", &args.grid_lambda2),
        ("lambdaL", &args.grid_lambda_l),
        ("lambdaE", &args.grid_lambda_e),
    ];
    for name in preset.hyperparameters() {
        let grid = overrides
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, v)| v.as_deref())
            .map(parse_value_grid)
            .transpose()?
            .unwrap_or_else(default_grid);
        grids.insert(name.to_string(), grid);
    }

    let plan = CVPlan::new(args.k, args.seed, preset, grids)?;
    let opts = args.solver.to_options()?;
    let cv = grid_search_cv(&x, &y, graph.as_ref(), &plan, &opts)?;

    ensure_out_dir(&args.out)?;
    let mut table = String::from("lambda1,lambda2,lambdaL,lambdaE,mean_score,all_converged");
    for f in 0..args.k {
        table.push_str(&format!(",fold{f}"));
    }
    table.push('\n');
    for row in &cv.table {
        table.push_str(&format!(
            "{},{},{},{},{},{}",
            row.params.lambda1,
            row.params.lambda2,
            row.params.lambda_l,
            row.params.lambda_e,
            row.mean_score,
            row.all_converged
        ));
        for s in &row.fold_scores {
            table.push_str(&format!(",{s}"));
        }
        table.push('\n');
    }
    std::fs::write(args.out.join("cv_table.csv"), table)?;
    io::write_vector_csv(&args.out.join("beta.csv"), &cv.refit.beta_hat.view())?;
    std::fs::write(
        args.out.join("best.json"),
        serde_json::to_string_pretty(&json!({
            "best_params": {
                "lambda1": cv.best_params.lambda1,
                "lambda2": cv.best_params.lambda2,
                "lambdaL": cv.best_params.lambda_l,
                "lambdaE": cv.best_params.lambda_e,
            },
            "refit": fit_diagnostics(&cv.refit),
        }))? + "\n",
    )?;
    write_manifest(
        &args.out,
        "cv",
        json!({
            "x": args.x, "y": args.y, "graph": args.graph, "preset": preset.name(),
            "k": args.k, "seed": args.seed,
            "grids": plan.grids,
            "solver": opts.solver.name(), "tol": opts.tolerance(),
        }),
    )?;
    Ok(if cv.refit.dual.converged { EXIT_OK } else { EXIT_NONCONVERGED })
}

/// Key-value experiment definition: `key = value` lines, `#` comments.
fn parse_kv_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            Error::Parse(format!("{}:{}: expected key = value", path.display(), lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_signal_spec(kv: &BTreeMap<String, String>) -> Result<SignalSpec> {
    let family: SignalFamily = kv
        .get("signal")
        .ok_or_else(|| Error::InvalidParameter("config needs signal = <family>".into()))?
        .parse()?;
    let tv = kv.get("signal_tv").map(|s| parse_float(s)).transpose()?.unwrap_or(15.0);
    let jumps = kv.get("signal_jumps").map(|s| parse_num(s)).transpose()?.unwrap_or(0);
    let level_a = kv.get("signal_level_a").map(|s| parse_float(s)).transpose()?.unwrap_or(20.0);
    let level_b = kv.get("signal_level_b").map(|s| parse_float(s)).transpose()?.unwrap_or(5.0);
    Ok(match family {
        SignalFamily::PiecewiseConstant => SignalSpec::piecewise(tv, jumps),
        SignalFamily::SmoothRamp => SignalSpec::ramp(tv),
        SignalFamily::Mixed => SignalSpec::mixed(tv, jumps),
        SignalFamily::BarbellLevels => SignalSpec::barbell_levels(level_a, level_b),
    })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let kv = parse_kv_config(&args.config)?;
    let get = |key: &str| {
        kv.get(key)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("config needs {key} = ...")))
    };
    let graph = parse_graph_source(&get("graph")?)?;
    let cov = parse_covariance(&get("covariance")?, Some(&graph))?;
    if cov.p() != graph.p() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{} but the graph has {} vertices",
            cov.p(),
            cov.p(),
            graph.p()
        )));
    }
    let signal = parse_signal_spec(&kv)?;
    let estimators: Vec<Preset> = get("estimators")?
        .split(',')
        .map(|s| Preset::from_str(s.trim()))
        .collect::<Result<_>>()?;

    let mut grids = BTreeMap::new();
    for name in ["lambda1", "lambda2", "lambdaL", "lambdaE"] {
        let grid = kv
            .get(&format!("grid_{name}"))
            .map(|s| parse_value_grid(s))
            .transpose()?
            .unwrap_or_else(default_grid);
        grids.insert(name.to_string(), grid);
    }

    let mut fit_opts = FitOptions::default();
    if let Some(s) = kv.get("solver") {
        fit_opts.solver = SolverKind::from_str(s)?;
    }
    if let Some(s) = kv.get("tol") {
        fit_opts.tol = Some(parse_float(s)?);
    }
    if let Some(s) = kv.get("max_iter") {
        fit_opts.max_iter = Some(parse_num(s)?);
    }

    let cfg = ExperimentConfig {
        signal,
        sigma: kv.get("sigma").map(|s| parse_float(s)).transpose()?.unwrap_or(1.0),
        n_train: parse_num(&get("n_train")?)?,
        n_val: parse_num(&get("n_val")?)?,
        n_test: parse_num(&get("n_test")?)?,
        base_seed: kv.get("seed").map(|s| parse_num(s)).transpose()?.unwrap_or(0) as u64,
        replicates: kv.get("replicates").map(|s| parse_num(s)).transpose()?.unwrap_or(50),
        estimators,
        grids,
        fit: fit_opts,
        graph,
        covariance: cov,
    };

    let report = run_experiment(&cfg)?;

    ensure_out_dir(&args.out)?;
    let mut replicates = String::from(
        "replicate,seed,estimator,lambda1,lambda2,lambdaL,lambdaE,estimation_error,prediction_error,converged\n",
    );
    for r in &report.replicates {
        replicates.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.replicate,
            r.seed,
            r.preset.name(),
            r.params.lambda1,
            r.params.lambda2,
            r.params.lambda_l,
            r.params.lambda_e,
            r.estimation_error,
            r.prediction_error,
            r.converged
        ));
    }
    std::fs::write(args.out.join("replicates.csv"), replicates)?;

    let mut summary = String::from("estimator,metric,median,q25,q75,failures\n");
    for s in &report.summary {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.preset.name(),
            s.metric,
            s.median,
            s.q25,
            s.q75,
            s.failures
        ));
    }
    std::fs::write(args.out.join("summary.csv"), summary)?;
    write_manifest(&args.out, "synth", json!({ "config_file": args.config, "resolved": kv }))?;
    Ok(EXIT_OK)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let solvers: Vec<SolverKind> = args
        .solvers
        .split(',')
        .map(|s| SolverKind::from_str(s.trim()))
        .collect::<Result<_>>()?;
    let mut rows = String::from("graph,p,n,solver,run1,run2,run3,median_seconds,converged,censored\n");

    for (pi, point) in args.points.split(',').enumerate() {
        let (kind, rest) = point
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("bench point '{point}' needs kind:PxN")))?;
        let (p_str, n_str) = rest
            .split_once('x')
            .ok_or_else(|| Error::InvalidParameter(format!("bench point '{point}' needs kind:PxN")))?;
        let p = parse_num(p_str)?;
        let n = parse_num(n_str)?;
        let graph = parse_graph_source(&format!("{kind}:{p}"))?;
        if graph.p() != p {
            return Err(Error::InvalidParameter(format!(
                "bench point '{point}': {kind}:{p} builds a graph on {} vertices",
                graph.p()
            )));
        }

        // synthetic truth with the requested largest adjacent difference;
        // tuning follows the closed-form rules
        let jumps = (p / 10).max(1);
        let tv = args.tv_linf * jumps as f64;
        let beta_star = make_signal(&graph, &SignalSpec::piecewise(tv, jumps))?;
        let cov = covariance(CovarianceKind::Identity { p })?;
        let tuning = theoretical_lambdas(1.0, &cov, &graph, n, &beta_star)?;
        let stats = signal_stats(&graph, &beta_star, &[])?;
        let lambda1 = tuning.lambda1;
        let lambda2 = lambda1 / (8.0 * stats.tv_linf);

        let run = crate::synthetic::simulate(
            &cov,
            &beta_star,
            1.0,
            n,
            1,
            1,
            crate::numerics::SeededRng::derive(args.seed, pi as u64),
        )?;
        let spec = crate::penalty::make_estimator(
            Preset::Gen,
            Some(&graph),
            Hyperparams { lambda1, lambda2, ..Default::default() },
        )?;

        for &solver in &solvers {
            let mut times = Vec::with_capacity(3);
            let mut converged = true;
            let mut censored = false;
            for _ in 0..3 {
                let opts = FitOptions {
                    solver,
                    deadline: Some(Instant::now() + Duration::from_secs_f64(args.timeout)),
                    ..FitOptions::default()
                };
                let result = fit(&run.x_train, &run.y_train, &spec, &opts)?;
                converged &= result.dual.converged;
                censored |= result.wall_time >= args.timeout;
                times.push(result.wall_time);
            }
            let mut sorted = times.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rows.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                kind, p, n, solver.name(), times[0], times[1], times[2], sorted[1], converged, censored
            ));
        }
    }

    ensure_out_dir(&args.out)?;
    std::fs::write(args.out.join("runtimes.csv"), rows)?;
    write_manifest(
        &args.out,
        "bench",
        json!({
            "points": args.points, "solvers": args.solvers, "timeout": args.timeout,
            "seed": args.seed, "tv_linf": args.tv_linf,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_eigen_curve(args: &EigenCurveArgs) -> Result<i32> {
    let graph = parse_graph_source(&args.graph)?;
    let cov = parse_covariance(&args.covariance, Some(&graph))?;
    let grid = parse_value_grid(&args.lambda2_grid)?;
    let curve = min_eigen_curve(cov.matrix(), &graph.laplacian(), &grid)?;

    ensure_out_dir(&args.out)?;
    let mut csv =
        String::from("lambda2,gmin,gmin_ge_lambda2_over64,gmin_ge_sqrt_lambda2_over64\n");
    for i in 0..curve.lambda2.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            curve.lambda2[i], curve.gmin[i], curve.ge_linear[i], curve.ge_sqrt[i]
        ));
    }
    std::fs::write(args.out.join("eigen_curve.csv"), csv)?;
    write_manifest(
        &args.out,
        "eigen-curve",
        json!({
            "covariance": args.covariance, "graph": args.graph,
            "lambda2_grid": args.lambda2_grid,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_re_check(args: &ReCheckArgs) -> Result<i32> {
    let graph = parse_graph_source(&args.graph)?;
    let cov = parse_covariance(&args.covariance, Some(&graph))?;
    let fraction =
        re_condition_trial(&cov, &graph, args.n, args.trials, args.directions, args.seed)?;

    ensure_out_dir(&args.out)?;
    std::fs::write(
        args.out.join("re_check.csv"),
        format!(
            "n,trials,directions,seed,pass_fraction\n{},{},{},{},{}\n",
            args.n, args.trials, args.directions, args.seed, fraction
        ),
    )?;
    write_manifest(
        &args.out,
        "re-check",
        json!({
            "covariance": args.covariance, "graph": args.graph, "n": args.n,
            "trials": args.trials, "directions": args.directions, "seed": args.seed,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_graph(args: &GraphArgs) -> Result<i32> {
    let graph = if let Some(src) = &args.graph {
        parse_graph_source(src)?
    } else {
        let kind = args
            .kind
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("pass --kind or --graph".into()))?;
        match kind {
            "chain" | "star" | "complete" => {
                let p = args
                    .p
                    .ok_or_else(|| Error::InvalidParameter(format!("{kind} needs --p")))?;
                parse_graph_source(&format!("{kind}:{p}"))?
            }
            "grid" => {
                let dims = args
                    .dims
                    .as_deref()
                    .ok_or_else(|| Error::InvalidParameter("grid needs --dims like 3x3".into()))?;
                parse_graph_source(&format!("grid:{dims}"))?
            }
            "barbell" => {
                let k = args
                    .clique
                    .ok_or_else(|| Error::InvalidParameter("barbell needs --clique".into()))?;
                let l = args
                    .path_len
                    .ok_or_else(|| Error::InvalidParameter("barbell needs --path-len".into()))?;
                Graph::barbell(k, l)?
            }
            other => return Err(Error::InvalidParameter(format!("unknown graph kind '{other}'"))),
        }
    };

    let spectra = graph_spectra(&graph, DEFAULT_SVD_RTOL)?;
    ensure_out_dir(&args.out)?;
    io::write_matrix_csv(&args.out.join("incidence.csv"), &graph.incidence_matrix().view())?;
    io::write_matrix_csv(&args.out.join("laplacian.csv"), &graph.laplacian().view())?;
    io::write_edge_list(&args.out.join("edges.txt"), &graph)?;
    std::fs::write(
        args.out.join("spectra.json"),
        serde_json::to_string_pretty(&json!({
            "p": graph.p(),
            "m": graph.m(),
            "rho": spectra.rho,
            "n_components": spectra.n_components,
            "max_degree": spectra.max_degree,
        }))? + "\n",
    )?;
    write_manifest(
        &args.out,
        "graph",
        json!({
            "kind": args.kind, "p": args.p, "dims": args.dims,
            "clique": args.clique, "path_len": args.path_len, "graph": args.graph,
        }),
    )?;
    Ok(EXIT_OK)
}

/// Dispatch a parsed command line; returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    if cli.jobs > 0 {
        // ignore the error if a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Bench(args) => cmd_bench(args),
        Command::EigenCurve(args) => cmd_eigen_curve(args),
        Command::ReCheck(args) => cmd_re_check(args),
        Command::Graph(args) => cmd_graph(args),
    }
}
