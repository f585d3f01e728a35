#ifndef GELNET_H
#define GELNET_H

/* Generated by cbindgen from the gelnet-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Estimator presets; mirrors the library's presets one to one.
 */
typedef enum GelnetPreset {
  GELNET_PRESET_OLS = 0,
  GELNET_PRESET_LASSO = 1,
  GELNET_PRESET_ELASTIC_NET = 2,
  GELNET_PRESET_FUSED_LASSO = 3,
  GELNET_PRESET_SMOOTH_LASSO = 4,
  GELNET_PRESET_GEN = 5,
} GelnetPreset;

/*
 Solver selection.
 */
typedef enum GelnetSolver {
  GELNET_SOLVER_CD = 0,
  GELNET_SOLVER_IP = 1,
  GELNET_SOLVER_ADMM = 2,
} GelnetSolver;

/*
 Status codes returned by every fallible entry point.
 */
typedef enum GelnetStatus {
  GELNET_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  GELNET_STATUS_NULL_ARGUMENT = 1,
  /*
   A parameter violated its documented precondition.
   */
  GELNET_STATUS_INVALID_ARGUMENT = 2,
  /*
   The solver failed (singular system or non-convergence treated as
   failure by the caller).
   */
  GELNET_STATUS_SOLVER_FAILURE = 3,
  /*
   An internal panic was caught at the boundary.
   */
  GELNET_STATUS_PANIC = 4,
} GelnetStatus;

/*
 Opaque graph handle created by the `gelnet_graph_*` constructors and
 released with `gelnet_graph_free`.
 */
typedef struct GelnetGraph GelnetGraph;

/*
 Hyperparameters; levels not used by the chosen preset are ignored.
 */
typedef struct GelnetHyperparams {
  double lambda1;
  double lambda2;
  double lambda_l;
  double lambda_e;
} GelnetHyperparams;

/*
 Solver options; pass `tol = 0` or `max_iter = 0` for the defaults.
 */
typedef struct GelnetSolverOptions {
  enum GelnetSolver solver;
  double tol;
  size_t max_iter;
} GelnetSolverOptions;

/*
 Fit diagnostics filled by `gelnet_fit`.
 */
typedef struct GelnetFitInfo {
  size_t iterations;
  /*
   1 when the solver met its tolerance, 0 otherwise.
   */
  uint8_t converged;
  double kkt_residual;
  double duality_gap;
  double wall_time_seconds;
} GelnetFitInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the most recent error on this thread. The pointer
 stays valid until the next failing call from the same thread.
 */
const char *gelnet_last_error_message(void);

/*
 Library version as a static null-terminated string.
 */
const char *gelnet_version(void);

/*
 Path graph on `p` vertices. Returns null on invalid input.
 */
struct GelnetGraph *gelnet_graph_chain(size_t p);

/*
 2D lattice with `rows x cols` vertices in row-major order.
 */
struct GelnetGraph *gelnet_graph_grid(size_t rows, size_t cols);

/*
 Star graph with center vertex 0.
 */
struct GelnetGraph *gelnet_graph_star(size_t p);

/*
 Complete graph on `p` vertices.
 */
struct GelnetGraph *gelnet_graph_complete(size_t p);

/*
 Two `clique`-cliques joined by a path with `path_edges` edges.
 */
struct GelnetGraph *gelnet_graph_barbell(size_t clique, size_t path_edges);

/*
 Build a graph from `n_edges` vertex pairs laid out as
 `[i0, j0, i1, j1, ...]` (0-based). Returns null on invalid input.

 # Safety
 `edges` must point to `2 * n_edges` readable `size_t` values.
 */
struct GelnetGraph *gelnet_graph_from_edges(size_t p, const size_t *edges, size_t n_edges);

/*
 Release a graph handle; null is ignored.

 # Safety
 `graph` must be a pointer previously returned by a constructor, and
 must not be used afterwards.
 */
void gelnet_graph_free(struct GelnetGraph *graph);

/*
 Number of vertices; 0 for a null handle.

 # Safety
 `graph` must be a live handle or null.
 */
size_t gelnet_graph_vertex_count(const struct GelnetGraph *graph);

/*
 Number of edges; 0 for a null handle.

 # Safety
 `graph` must be a live handle or null.
 */
size_t gelnet_graph_edge_count(const struct GelnetGraph *graph);

/*
 Inverse scaling factor (largest column norm of the incidence
 pseudoinverse), written to `out_rho`.

 # Safety
 `graph` must be a live handle; `out_rho` must be writable.
 */
enum GelnetStatus gelnet_graph_rho(const struct GelnetGraph *graph, double *out_rho);

/*
 Fit a penalized least-squares model.

 `x` is row-major `n x p`, `y` has length `n`, `out_beta` must hold `p`
 values. `graph` may be null for the graph-independent presets (OLS,
 Lasso, Elastic Net). `out_info` may be null when diagnostics are not
 wanted. A non-converged solve still writes `out_beta` and reports
 `converged = 0` with status `GELNET_STATUS_OK`.

 # Safety
 All pointers must satisfy the size contracts above.
 */
enum GelnetStatus gelnet_fit(const struct GelnetGraph *graph,
                             const double *x,
                             size_t n,
                             size_t p,
                             const double *y,
                             enum GelnetPreset preset,
                             struct GelnetHyperparams hyper,
                             struct GelnetSolverOptions options,
                             double *out_beta,
                             struct GelnetFitInfo *out_info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GELNET_H */
