//! Shared oracles for integration tests. Everything here is written from
//! the problem statement alone and stays independent of the library's
//! solver path.

#![allow(dead_code)]

use ndarray::prelude::*;

/// Projected gradient with a conservative fixed step for
/// `min (1/2) u' Q u - b' u  s.t.  |u_i| <= r_i`.
pub fn pg_box_qp(q: &Array2<f64>, b: &Array1<f64>, radii: &Array1<f64>, iters: usize) -> Array1<f64> {
    let m = b.len();
    let mut u = Array1::zeros(m);
    let lip = q
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(1e-12_f64, f64::max);
    let step = 1.0 / lip;
    for _ in 0..iters {
        let grad = q.dot(&u) - b;
        for i in 0..m {
            u[i] = (u[i] - step * grad[i]).clamp(-radii[i], radii[i]);
        }
    }
    u
}

/// One-dimensional total variation denoising
/// `min (1/2) ||y - b||^2 + lam * sum_i |b_{i+1} - b_i|`
/// via projected gradient on its own dual, built here from scratch.
pub fn tv1d_denoise(y: &Array1<f64>, lam: f64, iters: usize) -> Array1<f64> {
    let n = y.len();
    if n <= 1 || lam == 0.0 {
        return y.clone();
    }
    let m = n - 1;
    // difference operator d: (d u)_i = u_i - u_{i+1} applied transposed
    let dt = |u: &Array1<f64>| -> Array1<f64> {
        let mut out = Array1::zeros(n);
        for i in 0..m {
            out[i] += u[i];
            out[i + 1] -= u[i];
        }
        out
    };
    let d = |v: &Array1<f64>| -> Array1<f64> {
        Array1::from_shape_fn(m, |i| v[i] - v[i + 1])
    };
    let mut u = Array1::zeros(m);
    // ||D D'|| <= 4 for the chain difference operator
    let step = 0.25;
    for _ in 0..iters {
        let grad = d(&dt(&u)) - d(y);
        for i in 0..m {
            u[i] = (u[i] - step * grad[i]).clamp(-lam, lam);
        }
    }
    y - &dt(&u)
}

/// Ordinary least squares by normal equations with Gaussian elimination,
/// written directly for full-rank designs.
pub fn ols_by_normal_equations(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let p = x.ncols();
    let mut a = x.t().dot(x);
    let mut b = x.t().dot(y);
    // partial-pivot elimination
    for col in 0..p {
        let mut pivot = col;
        for r in (col + 1)..p {
            if a[[r, col]].abs() > a[[pivot, col]].abs() {
                pivot = r;
            }
        }
        if pivot != col {
            for c in 0..p {
                let tmp = a[[col, c]];
                a[[col, c]] = a[[pivot, c]];
                a[[pivot, c]] = tmp;
            }
            b.swap(col, pivot);
        }
        for r in (col + 1)..p {
            let f = a[[r, col]] / a[[col, col]];
            for c in col..p {
                a[[r, c]] -= f * a[[col, c]];
            }
            b[r] -= f * b[col];
        }
    }
    let mut beta = Array1::zeros(p);
    for row in (0..p).rev() {
        let mut s = b[row];
        for c in (row + 1)..p {
            s -= a[[row, c]] * beta[c];
        }
        beta[row] = s / a[[row, row]];
    }
    beta
}

pub fn linf(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
