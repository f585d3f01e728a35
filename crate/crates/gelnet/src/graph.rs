//! Undirected graphs and the linear-algebra objects derived from them:
//! the signed incidence matrix, the Laplacian, the pseudoinverse of the
//! incidence matrix, the kernel projector and the inverse scaling factor.

use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{svd_rank, svd_thin};
#[cfg(test)]
use crate::numerics::DEFAULT_SVD_RTOL;

/// How a graph was constructed. Signal generators use this to lay regions
/// out on the vertex set; graphs read from edge lists are `Custom`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphShape {
    Chain,
    /// Lattice dimensions, slowest axis first (row-major vertex order).
    Grid(Vec<usize>),
    Star,
    Complete,
    /// Two k-cliques joined by a path with `path_edges` edges.
    Barbell { clique: usize, path_edges: usize },
    Custom,
}

/// An undirected simple graph on vertices `0..p`.
///
/// Edges are stored in construction order as `(min, max)` pairs; that order
/// fixes the row order of the incidence matrix, so all derived matrices are
/// reproducible bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    p: usize,
    edges: Vec<(usize, usize)>,
    shape: GraphShape,
}

impl Graph {
    /// Build a graph from an explicit edge list, validating the invariants:
    /// endpoints in `[0, p)`, no self-loops, no repeated edges.
    pub fn from_edges(p: usize, edges: Vec<(usize, usize)>) -> Result<Graph> {
        if p == 0 {
            return Err(Error::InvalidParameter("graph needs at least one vertex".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (i, j) in edges {
            if i >= p || j >= p {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for p = {p}"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {i}")));
            }
            let e = (i.min(j), i.max(j));
            if !seen.insert(e) {
                return Err(Error::InvalidParameter(format!("repeated edge ({}, {})", e.0, e.1)));
            }
            normalized.push(e);
        }
        Ok(Graph { p, edges: normalized, shape: GraphShape::Custom })
    }

    /// Path graph with edges `(i, i+1)`.
    pub fn chain(p: usize) -> Result<Graph> {
        if p < 1 {
            return Err(Error::InvalidParameter("chain requires p >= 1".into()));
        }
        let edges = (0..p.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Ok(Graph { p, edges, shape: GraphShape::Chain })
    }

    /// Lattice over the given dimensions, vertices in row-major order.
    /// Edges are enumerated axis by axis; within an axis, in vertex order.
    pub fn grid(dims: &[usize]) -> Result<Graph> {
        if dims.is_empty() || dims.iter().any(|&d| d < 1) {
            return Err(Error::InvalidParameter("grid requires dimensions >= 1".into()));
        }
        let p: usize = dims.iter().product();
        let mut strides = vec![1usize; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let mut edges = Vec::new();
        for (axis, (&d, &stride)) in dims.iter().zip(&strides).enumerate() {
            let _ = axis;
            if d < 2 {
                continue;
            }
            for v in 0..p {
                let coord = (v / stride) % d;
                if coord + 1 < d {
                    edges.push((v, v + stride));
                }
            }
        }
        Ok(Graph { p, edges, shape: GraphShape::Grid(dims.to_vec()) })
    }

    /// Star with center vertex 0 and edges `(0, j)`.
    pub fn star(p: usize) -> Result<Graph> {
        if p < 2 {
            return Err(Error::InvalidParameter("star requires p >= 2".into()));
        }
        let edges = (1..p).map(|j| (0, j)).collect();
        Ok(Graph { p, edges, shape: GraphShape::Star })
    }

    /// Complete graph, edges in lexicographic order.
    pub fn complete(p: usize) -> Result<Graph> {
        if p < 1 {
            return Err(Error::InvalidParameter("complete requires p >= 1".into()));
        }
        let mut edges = Vec::with_capacity(p * (p - 1) / 2);
        for i in 0..p {
            for j in (i + 1)..p {
                edges.push((i, j));
            }
        }
        Ok(Graph { p, edges, shape: GraphShape::Complete })
    }

    /// Two cliques of size `k` joined by a path with `path_edges` edges.
    /// The path runs from the last vertex of clique A (`k - 1`) to the first
    /// vertex of clique B (`p - k`), so `p = 2k + path_edges - 1`.
    pub fn barbell(k: usize, path_edges: usize) -> Result<Graph> {
        if k < 2 {
            return Err(Error::InvalidParameter("barbell requires clique size k >= 2".into()));
        }
        if path_edges < 1 {
            return Err(Error::InvalidParameter("barbell requires path length >= 1".into()));
        }
        let p = 2 * k + path_edges - 1;
        let mut edges = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                edges.push((i, j));
            }
        }
        let b0 = p - k;
        for i in b0..p {
            for j in (i + 1)..p {
                edges.push((i, j));
            }
        }
        for v in (k - 1)..b0 {
            edges.push((v, v + 1));
        }
        Ok(Graph { p, edges, shape: GraphShape::Barbell { clique: k, path_edges } })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn shape(&self) -> &GraphShape {
        &self.shape
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.p];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Number of connected components by breadth-first traversal.
    pub fn component_count(&self) -> usize {
        let mut adj = vec![Vec::new(); self.p];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.p];
        let mut count = 0;
        let mut queue = std::collections::VecDeque::new();
        for start in 0..self.p {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    /// Signed edge-vertex incidence matrix: row `e` for edge `(i, j)` has
    /// `+1` at column `min(i, j)`, `-1` at column `max(i, j)`, zeros elsewhere.
    pub fn incidence_matrix(&self) -> Array2<f64> {
        let mut gamma = Array2::zeros((self.edges.len(), self.p));
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            gamma[[e, i]] = 1.0;
            gamma[[e, j]] = -1.0;
        }
        gamma
    }

    /// Unnormalized Laplacian, assembled combinatorially so that it equals
    /// `Gamma^T Gamma` exactly in integer arithmetic.
    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = Array2::zeros((self.p, self.p));
        for &(i, j) in &self.edges {
            l[[i, i]] += 1.0;
            l[[j, j]] += 1.0;
            l[[i, j]] -= 1.0;
            l[[j, i]] -= 1.0;
        }
        l
    }
}

/// Spectral objects derived from a graph's incidence matrix.
#[derive(Debug, Clone)]
pub struct GraphSpectra {
    /// `Gamma^T Gamma`, symmetric PSD.
    pub laplacian: Array2<f64>,
    /// Moore-Penrose inverse of the incidence matrix, `p x m`.
    pub pinv_incidence: Array2<f64>,
    /// Orthogonal projector onto `ker(Gamma)`, `p x p`.
    pub kernel_projection: Array2<f64>,
    /// Dimension of `ker(Gamma)` = number of connected components.
    pub n_components: usize,
    /// Maximum vertex degree.
    pub max_degree: usize,
    /// Inverse scaling factor: the largest column norm of the pseudoinverse.
    pub rho: f64,
}

/// Compute [`GraphSpectra`] via one SVD of the incidence matrix. Singular
/// values below `svd_tol * s_max` count as zero; `svd_tol` must lie in (0, 1).
pub fn graph_spectra(g: &Graph, svd_tol: f64) -> Result<GraphSpectra> {
    if !(svd_tol > 0.0 && svd_tol < 1.0) {
        return Err(Error::InvalidParameter(format!("svd_tol must be in (0, 1), got {svd_tol}")));
    }
    let p = g.p();
    let m = g.m();
    let laplacian = g.laplacian();
    if m == 0 {
        return Ok(GraphSpectra {
            laplacian,
            pinv_incidence: Array2::zeros((p, 0)),
            kernel_projection: Array2::eye(p),
            n_components: p,
            max_degree: 0,
            rho: 0.0,
        });
    }
    let gamma = g.incidence_matrix();
    let (u, s, vt) = svd_thin(&gamma)?;
    let rank = svd_rank(&s, svd_tol);
    let u_r = u.slice(s![.., ..rank]);
    let vt_r = vt.slice(s![..rank, ..]);
    let inv_s = s.slice(s![..rank]).mapv(|x| 1.0 / x);
    // pinv = V_r diag(1/s) U_r^T; projector onto ker = I - V_r V_r^T.
    let pinv_incidence = (&vt_r.t() * &inv_s).dot(&u_r.t());
    let kernel_projection = Array2::eye(p) - vt_r.t().dot(&vt_r);
    let rho = (0..m)
        .map(|j| pinv_incidence.column(j).dot(&pinv_incidence.column(j)).sqrt())
        .fold(0.0_f64, f64::max);
    Ok(GraphSpectra {
        laplacian,
        pinv_incidence,
        kernel_projection,
        n_components: p - rank,
        max_degree: g.max_degree(),
        rho,
    })
}

/// `sqrt(|S|) * ||beta||_2 / ||(Gamma beta)_S||_1` for a nonempty edge set
/// `S`. By definition this is at least the compatibility factor `k_S`, and
/// at least `1 / (2 sqrt(min(d, |S|)))` for incidence matrices.
pub fn compatibility_ratio(g: &Graph, s: &[usize], beta: &Array1<f64>) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::InvalidParameter("edge set S must be nonempty".into()));
    }
    if beta.len() != g.p() {
        return Err(Error::DimensionMismatch(format!(
            "beta has length {}, graph has {} vertices",
            beta.len(),
            g.p()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for &e in s {
        if e >= g.m() {
            return Err(Error::InvalidParameter(format!("edge index {e} out of range")));
        }
        if !seen.insert(e) {
            return Err(Error::InvalidParameter(format!("repeated edge index {e} in S")));
        }
    }
    let mut denom = 0.0;
    for &e in s {
        let (i, j) = g.edges()[e];
        denom += (beta[i] - beta[j]).abs();
    }
    if denom == 0.0 {
        return Err(Error::Degenerate("(Gamma beta)_S is identically zero".into()));
    }
    Ok((s.len() as f64).sqrt() * beta.dot(beta).sqrt() / denom)
}

/// Hutter-Rigollet lower bound `1 / (2 sqrt(min(d, |S|)))` on the
/// compatibility factor of an incidence matrix.
pub fn compatibility_lower_bound(max_degree: usize, s_len: usize) -> f64 {
    1.0 / (2.0 * (max_degree.min(s_len) as f64).sqrt())
}
