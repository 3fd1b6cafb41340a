//! Restarted GMRES and bordered systems for operators with a one-dimensional
//! kernel of constants.
//!
//! A bordered system couples a field unknown `eta` with one scalar `beta`:
//!
//! ```text
//! L(eta) + col * beta = r        (one equation per grid point)
//! sum_p w_p eta_p     = s        (gauge row)
//! ```
//!
//! Vectors are stored as `len + 1` reals with `beta` last.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::par;
use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    /// Target for `|b - A x| / |b|`.
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-12,
            restart: 60,
            max_iters: 600,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    /// True relative residual of the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    par::dot(v, v).sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// Always returns the best iterate; `stats.converged` reports whether the
/// tolerance was met. A restart cycle that fails to halve the true residual
/// ends the solve: below that point only roundoff is left.
pub fn gmres<A, M>(
    mut apply: A,
    mut precond: M,
    b: &[f64],
    x0: Option<Vec<f64>>,
    opts: &GmresOptions,
) -> (Vec<f64>, GmresStats)
where
    A: FnMut(&[f64]) -> Vec<f64>,
    M: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return (
            vec![0.0; n],
            GmresStats {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        );
    }
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut previous = f64::INFINITY;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        let stagnated = iterations > 0 && rel > 0.5 * previous;
        previous = rel;
        if rel <= opts.tol || iterations >= opts.max_iters || stagnated {
            return (
                x,
                GmresStats {
                    iterations,
                    residual: rel,
                    converged: rel <= opts.tol,
                },
            );
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns after rotation: h[j] has j + 2 entries.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iters {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            let mut col = vec![0.0; k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = par::dot(&w, v);
                col[i] = hij;
                par::axpy(-hij, v, &mut w);
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let rho = a.hypot(bb);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
            col[k] = rho;
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            cs.push((c, s));
            h.push(col);
            k += 1;
            iterations += 1;
            if g[k].abs() <= 0.5 * opts.tol * bnorm || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] == 0.0 { 0.0 } else { s / h[i][i] };
        }
        let mut u = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            par::axpy(*yj, &basis[j], &mut u);
        }
        let du = precond(&u);
        par::axpy(1.0, &du, &mut x);
    }
}

/// Exact inverse of the bordered system whose field operator is the
/// constant-coefficient multiplier with real symbol `symbol`
/// (zero exactly at the zero mode, nonzero elsewhere).
#[derive(Clone, Debug)]
pub struct SpectralBorderedInverse {
    grid: Grid,
    inv_symbol: Vec<f64>,
    col: f64,
    weights: Vec<f64>,
    weight_sum: f64,
}

impl SpectralBorderedInverse {
    pub fn new(grid: &Grid, symbol: Vec<f64>, col: f64, weights: Vec<f64>) -> Self {
        let inv_symbol = symbol
            .iter()
            .enumerate()
            .map(|(p, &s)| if p == 0 || s == 0.0 { 0.0 } else { 1.0 / s })
            .collect();
        let weight_sum = weights.iter().sum();
        SpectralBorderedInverse {
            grid: grid.clone(),
            inv_symbol,
            col,
            weights,
            weight_sum,
        }
    }

    /// Constant-coefficient model of `sum_kl c[k][l] d_k d_lbar`.
    pub fn from_coefficients(grid: &Grid, c: &[Complex64], col: f64, weights: Vec<f64>) -> Self {
        Self::new(grid, grid.constant_operator_symbol(c), col, weights)
    }

    pub fn apply(&self, rhs: &[f64]) -> Vec<f64> {
        let len = self.grid.len();
        let r = &rhs[..len];
        let s = rhs[len];
        let mean = par::sum(len, |p| r[p]) / len as f64;
        let beta = mean / self.col;
        let mut spec: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.forward(&mut spec);
        par::for_each_chunk_mut(&mut spec, par::CHUNK, |c, chunk| {
            let base = c * par::CHUNK;
            for (i, z) in chunk.iter_mut().enumerate() {
                *z *= self.inv_symbol[base + i];
            }
        });
        self.grid.inverse(&mut spec);
        let mut out: Vec<f64> = spec.iter().map(|z| z.re).collect();
        let w = &self.weights;
        let current = par::sum(len, |p| w[p] * out[p]);
        let shift = (s - current) / self.weight_sum;
        for v in out.iter_mut() {
            *v += shift;
        }
        out.push(beta);
        out
    }
}

/// Apply the bordered operator `[L, col; w^T, 0]` given the field operator `op`.
pub fn bordered_apply(
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    col: f64,
    weights: &[f64],
    x: &[f64],
) -> Vec<f64> {
    let len = weights.len();
    let mut out = op(&x[..len]);
    let beta = x[len];
    for v in out.iter_mut() {
        *v += col * beta;
    }
    out.push(par::dot(weights, &x[..len]));
    out
}

/// Solve the bordered system, returning `(eta, beta)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_bordered(
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    col: f64,
    weights: &[f64],
    precond: &SpectralBorderedInverse,
    r: &[f64],
    s: f64,
    opts: &GmresOptions,
    accept: f64,
) -> Result<(Vec<f64>, f64, GmresStats)> {
    let mut rhs = r.to_vec();
    rhs.push(s);
    let x0 = precond.apply(&rhs);
    let (mut x, stats) = gmres(
        |x| bordered_apply(op, col, weights, x),
        |v| precond.apply(v),
        &rhs,
        Some(x0),
        opts,
    );
    if !(stats.residual <= accept.max(opts.tol)) {
        return Err(Error::LinearSolverFailed {
            iterations: stats.iterations,
            residual: stats.residual,
        });
    }
    let beta = x.pop().unwrap_or(0.0);
    Ok((x, beta, stats))
}
