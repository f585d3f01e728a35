//! C ABI for the gelnet library: opaque graph handles, a one-call fitting
//! entry point and status codes. Every function is safe to call from C;
//! panics are caught at the boundary and surfaced as `GELNET_STATUS_PANIC`.
//!
//! The generated header lives at `include/gelnet.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::prelude::*;

use gelnet::graph::{graph_spectra, Graph};
use gelnet::penalty::{make_estimator_p, Hyperparams, Preset};
use gelnet::solver::{fit, FitOptions, SolverKind};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GelnetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A parameter violated its documented precondition.
    InvalidArgument = 2,
    /// The solver failed (singular system or non-convergence treated as
    /// failure by the caller).
    SolverFailure = 3,
    /// An internal panic was caught at the boundary.
    Panic = 4,
}

/// Estimator presets; mirrors the library's presets one to one.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GelnetPreset {
    Ols = 0,
    Lasso = 1,
    ElasticNet = 2,
    FusedLasso = 3,
    SmoothLasso = 4,
    Gen = 5,
}

impl GelnetPreset {
    fn to_preset(self) -> Preset {
        match self {
            GelnetPreset::Ols => Preset::Ols,
            GelnetPreset::Lasso => Preset::Lasso,
            GelnetPreset::ElasticNet => Preset::ElasticNet,
            GelnetPreset::FusedLasso => Preset::FusedLasso,
            GelnetPreset::SmoothLasso => Preset::SmoothLasso,
            GelnetPreset::Gen => Preset::Gen,
        }
    }
}

/// Solver selection.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GelnetSolver {
    Cd = 0,
    Ip = 1,
    Admm = 2,
}

impl GelnetSolver {
    fn to_kind(self) -> SolverKind {
        match self {
            GelnetSolver::Cd => SolverKind::Cd,
            GelnetSolver::Ip => SolverKind::Ip,
            GelnetSolver::Admm => SolverKind::Admm,
        }
    }
}

/// Hyperparameters; levels not used by the chosen preset are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GelnetHyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_l: f64,
    pub lambda_e: f64,
}

/// Solver options; pass `tol = 0` or `max_iter = 0` for the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GelnetSolverOptions {
    pub solver: GelnetSolver,
    pub tol: f64,
    pub max_iter: usize,
}

/// Fit diagnostics filled by `gelnet_fit`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GelnetFitInfo {
    pub iterations: usize,
    /// 1 when the solver met its tolerance, 0 otherwise.
    pub converged: u8,
    pub kkt_residual: f64,
    pub duality_gap: f64,
    pub wall_time_seconds: f64,
}

/// Opaque graph handle created by the `gelnet_graph_*` constructors and
/// released with `gelnet_graph_free`.
pub struct GelnetGraph {
    inner: Graph,
}

/// Message describing the most recent error on this thread. The pointer
/// stays valid until the next failing call from the same thread.
#[no_mangle]
pub extern "C" fn gelnet_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static null-terminated string.
#[no_mangle]
pub extern "C" fn gelnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn boxed_graph(result: gelnet::Result<Graph>) -> *mut GelnetGraph {
    match result {
        Ok(inner) => Box::into_raw(Box::new(GelnetGraph { inner })),
        Err(err) => {
            set_error(&err.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Path graph on `p` vertices. Returns null on invalid input.
#[no_mangle]
pub extern "C" fn gelnet_graph_chain(p: usize) -> *mut GelnetGraph {
    boxed_graph(Graph::chain(p))
}

/// 2D lattice with `rows x cols` vertices in row-major order.
#[no_mangle]
pub extern "C" fn gelnet_graph_grid(rows: usize, cols: usize) -> *mut GelnetGraph {
    boxed_graph(Graph::grid(&[rows, cols]))
}

/// Star graph with center vertex 0.
#[no_mangle]
pub extern "C" fn gelnet_graph_star(p: usize) -> *mut GelnetGraph {
    boxed_graph(Graph::star(p))
}

/// Complete graph on `p` vertices.
#[no_mangle]
pub extern "C" fn gelnet_graph_complete(p: usize) -> *mut GelnetGraph {
    boxed_graph(Graph::complete(p))
}

/// Two `clique`-cliques joined by a path with `path_edges` edges.
#[no_mangle]
pub extern "C" fn gelnet_graph_barbell(clique: usize, path_edges: usize) -> *mut GelnetGraph {
    boxed_graph(Graph::barbell(clique, path_edges))
}

/// Build a graph from `n_edges` vertex pairs laid out as
/// `[i0, j0, i1, j1, ...]` (0-based). Returns null on invalid input.
///
/// # Safety
/// `edges` must point to `2 * n_edges` readable `size_t` values.
#[no_mangle]
pub unsafe extern "C" fn gelnet_graph_from_edges(
    p: usize,
    edges: *const usize,
    n_edges: usize,
) -> *mut GelnetGraph {
    if edges.is_null() && n_edges > 0 {
        set_error("edges pointer is null");
        return std::ptr::null_mut();
    }
    let flat = if n_edges == 0 { &[][..] } else { std::slice::from_raw_parts(edges, 2 * n_edges) };
    let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    boxed_graph(Graph::from_edges(p, pairs))
}

/// Release a graph handle; null is ignored.
///
/// # Safety
/// `graph` must be a pointer previously returned by a constructor, and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gelnet_graph_free(graph: *mut GelnetGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of vertices; 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gelnet_graph_vertex_count(graph: *const GelnetGraph) -> usize {
    graph.as_ref().map(|g| g.inner.p()).unwrap_or(0)
}

/// Number of edges; 0 for a null handle.
///
/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gelnet_graph_edge_count(graph: *const GelnetGraph) -> usize {
    graph.as_ref().map(|g| g.inner.m()).unwrap_or(0)
}

/// Inverse scaling factor (largest column norm of the incidence
/// pseudoinverse), written to `out_rho`.
///
/// # Safety
/// `graph` must be a live handle; `out_rho` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gelnet_graph_rho(
    graph: *const GelnetGraph,
    out_rho: *mut f64,
) -> GelnetStatus {
    let (Some(graph), false) = (graph.as_ref(), out_rho.is_null()) else {
        set_error("null argument to gelnet_graph_rho");
        return GelnetStatus::NullArgument;
    };
    match catch_unwind(AssertUnwindSafe(|| graph_spectra(&graph.inner, 1e-10))) {
        Ok(Ok(spectra)) => {
            *out_rho = spectra.rho;
            GelnetStatus::Ok
        }
        Ok(Err(err)) => {
            set_error(&err.to_string());
            GelnetStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic in gelnet_graph_rho");
            GelnetStatus::Panic
        }
    }
}

/// Fit a penalized least-squares model.
///
/// `x` is row-major `n x p`, `y` has length `n`, `out_beta` must hold `p`
/// values. `graph` may be null for the graph-independent presets (OLS,
/// Lasso, Elastic Net). `out_info` may be null when diagnostics are not
/// wanted. A non-converged solve still writes `out_beta` and reports
/// `converged = 0` with status `GELNET_STATUS_OK`.
///
/// # Safety
/// All pointers must satisfy the size contracts above.
#[no_mangle]
pub unsafe extern "C" fn gelnet_fit(
    graph: *const GelnetGraph,
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    preset: GelnetPreset,
    hyper: GelnetHyperparams,
    options: GelnetSolverOptions,
    out_beta: *mut f64,
    out_info: *mut GelnetFitInfo,
) -> GelnetStatus {
    if x.is_null() || y.is_null() || out_beta.is_null() {
        set_error("null data pointer passed to gelnet_fit");
        return GelnetStatus::NullArgument;
    }
    if n == 0 || p == 0 {
        set_error("n and p must be positive");
        return GelnetStatus::InvalidArgument;
    }
    let x_slice = std::slice::from_raw_parts(x, n * p);
    let y_slice = std::slice::from_raw_parts(y, n);
    let graph = graph.as_ref().map(|g| &g.inner);

    let outcome = catch_unwind(AssertUnwindSafe(|| -> gelnet::Result<_> {
        let x = Array2::from_shape_vec((n, p), x_slice.to_vec())
            .map_err(|e| gelnet::Error::DimensionMismatch(e.to_string()))?;
        let y = Array1::from_vec(y_slice.to_vec());
        let h = Hyperparams {
            lambda1: hyper.lambda1,
            lambda2: hyper.lambda2,
            lambda_l: hyper.lambda_l,
            lambda_e: hyper.lambda_e,
        };
        let spec = make_estimator_p(preset.to_preset(), graph, Some(p), h)?;
        let opts = FitOptions {
            solver: options.solver.to_kind(),
            tol: (options.tol > 0.0).then_some(options.tol),
            max_iter: (options.max_iter > 0).then_some(options.max_iter),
            ..FitOptions::default()
        };
        fit(&x, &y, &spec, &opts)
    }));

    match outcome {
        Ok(Ok(result)) => {
            let out = std::slice::from_raw_parts_mut(out_beta, p);
            out.copy_from_slice(result.beta_hat.as_slice().unwrap());
            if let Some(info) = out_info.as_mut() {
                *info = GelnetFitInfo {
                    iterations: result.dual.iterations,
                    converged: u8::from(result.dual.converged),
                    kkt_residual: result.kkt_residual,
                    duality_gap: result.duality_gap,
                    wall_time_seconds: result.wall_time,
                };
            }
            GelnetStatus::Ok
        }
        Ok(Err(err)) => {
            set_error(&err.to_string());
            match err {
                gelnet::Error::Linalg(_) => GelnetStatus::SolverFailure,
                _ => GelnetStatus::InvalidArgument,
            }
        }
        Err(_) => {
            set_error("internal panic in gelnet_fit");
            GelnetStatus::Panic
        }
    }
}
