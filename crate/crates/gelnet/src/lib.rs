//! Penalized least-squares regression over graphs.
//!
//! The estimator minimizes a squared-error loss plus a graph elastic net
//! penalty `lambda1 * ||G b||_1 + lambda2 * ||G b||_2^2`, where `G` is the
//! signed edge-vertex incidence matrix of an undirected graph. The same
//! weighted-penalty machinery expresses the Lasso, the Elastic Net, the
//! Fused Lasso and the Smooth Lasso, so all of them share one solver stack:
//!
//! * [`solver::solve_cd`] — coordinate descent on the box-constrained dual,
//! * [`solver::solve_ip`] — a primal-dual interior point method on the same dual,
//! * [`solver::solve_admm`] — an ADMM reference solver on the primal split.
//!
//! Supporting modules cover graph construction and spectra ([`graph`]),
//! dense linear algebra and sampling ([`numerics`]), penalty presets
//! ([`penalty`]), k-fold cross-validation ([`selection`]), synthetic
//! experiment generation ([`synthetic`]) and diagnostics derived from the
//! estimator's theory ([`theory`]).

pub mod cli;
pub mod error;
pub mod graph;
pub mod io;
pub mod numerics;
pub mod penalty;
pub mod selection;
pub mod solver;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};
pub use graph::Graph;


