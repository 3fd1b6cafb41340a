//! Chern-connection calculus on Hermitian metric fields.
//!
//! Conventions: the coefficient matrix is `G[i][j] = g_{i jbar}` and the
//! inverse metric is `g^{k lbar} = (G^{-1})[l][k]`, so `tr_g A = tr(G^{-1} A)`.

use crate::error::{Error, Result};
use crate::field::{integrate, HermitianField, Metric, ScalarField};
use crate::grid::Grid;
use crate::krylov::{solve_bordered, GmresOptions, GmresStats, SpectralBorderedInverse};
use crate::mat::Mat;
use crate::par;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Holomorphic derivatives `d_k G[i][j]`, stored as `grad[(k * n + i) * n + j][p]`.
pub struct MetricGradient {
    n: usize,
    grad: Vec<Vec<Complex64>>,
}

impl MetricGradient {
    pub fn new(g: &HermitianField) -> MetricGradient {
        let grid = g.grid();
        let n = g.dim();
        let mut grad = vec![Vec::new(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                let e = g.entry(i, j);
                let vals = e.values();
                let constant = vals.iter().all(|&z| z == vals[0]);
                let spec = if constant {
                    None
                } else {
                    let mut s = vals.to_vec();
                    grid.forward(&mut s);
                    Some(s)
                };
                for k in 0..n {
                    grad[(k * n + i) * n + j] = match &spec {
                        None => vec![C0; grid.len()],
                        Some(s) => grid.apply_symbol(s, |b| grid.holo_symbol(k, b)),
                    };
                }
            }
        }
        MetricGradient { n, grad }
    }

    #[inline]
    pub fn get(&self, p: usize, k: usize, i: usize, j: usize) -> Complex64 {
        self.grad[(k * self.n + i) * self.n + j][p]
    }
}

/// Torsion components `T^k_{ij}`, antisymmetric in `(i, j)`.
#[derive(Clone, Debug)]
pub struct TorsionField {
    grid: Grid,
    n: usize,
    data: Vec<Complex64>,
}

impl TorsionField {
    #[inline]
    pub fn get(&self, p: usize, k: usize, i: usize, j: usize) -> Complex64 {
        let n = self.n;
        self.data[p * n * n * n + (k * n + i) * n + j]
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sup_norm(&self) -> f64 {
        let d = &self.data;
        par::max(d.len(), |i| d[i].norm())
    }

    /// `sup_i |sum_j T^j_{ji}|`.
    pub fn trace_sup(&self) -> f64 {
        let n = self.n;
        par::max(self.grid.len(), |p| {
            (0..n)
                .map(|i| (0..n).map(|j| self.get(p, j, j, i)).sum::<Complex64>().norm())
                .fold(0.0, f64::max)
        })
    }
}

/// `T^k_{ij} = g^{k lbar} (d_i g_{j lbar} - d_j g_{i lbar})`.
pub fn torsion(g: &Metric) -> TorsionField {
    let n = g.dim();
    let dg = MetricGradient::new(g.field());
    let n3 = n * n * n;
    let mut data = vec![C0; g.grid().len() * n3];
    par::for_each_chunk_mut(&mut data, n3, |p, t| {
        let inv = g.inv_at(p);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let mut s = C0;
                    for l in 0..n {
                        s += inv.get(l, k) * (dg.get(p, i, j, l) - dg.get(p, j, i, l));
                    }
                    t[(k * n + i) * n + j] = s;
                }
            }
        }
    });
    TorsionField {
        grid: g.grid().clone(),
        n,
        data,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDefects {
    pub kaehler_defect: f64,
    pub balanced_defect: f64,
    pub gauduchon_defect: f64,
}

pub fn defects(g: &Metric) -> MetricDefects {
    let n = g.dim();
    let dg = MetricGradient::new(g.field());
    let kaehler_defect = par::max(g.grid().len(), |p| {
        let mut m = 0.0f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    m = m.max((dg.get(p, k, i, j) - dg.get(p, i, k, j)).norm());
                }
            }
        }
        m
    });
    let balanced_defect = torsion(g).trace_sup();
    let one = ScalarField::constant(g.grid(), 1.0);
    let gauduchon_defect = gauduchon_operator(g, &one).sup_abs();
    MetricDefects {
        kaehler_defect,
        balanced_defect,
        gauduchon_defect,
    }
}

/// `Delta f = g^{i jbar} d_i d_jbar f`.
pub fn canonical_laplacian(g: &Metric, f: &ScalarField) -> Result<ScalarField> {
    g.trace_of(&f.ddbar())
}

/// `(tr_g g', tr_g' g)` pointwise.
pub fn trace_pair(g: &Metric, gp: &Metric) -> Result<(ScalarField, ScalarField)> {
    Ok((g.trace_of(gp.field())?, gp.trace_of(g.field())?))
}

/// `|d f|^2_g = g^{k lbar} d_k f d_lbar f` for real `f`.
pub fn gradient_norm_sq(g: &Metric, f: &ScalarField) -> Result<ScalarField> {
    f.same_grid(g.grid())?;
    let n = g.dim();
    let d: Vec<_> = (0..n).map(|k| f.d_holo(k)).collect::<Result<_>>()?;
    let values = par::collect(g.grid().len(), |p| {
        let inv = g.inv_at(p);
        let mut s = C0;
        for k in 0..n {
            for l in 0..n {
                s += d[l].values()[p].conj() * inv.get(l, k) * d[k].values()[p];
            }
        }
        s.re
    });
    ScalarField::new(g.grid(), values)
}

/// `K(v) = sum_kl d_k d_lbar (v * cof(G)[k][l])`, proportional to the
/// coefficient of `i ddbar(v omega^{n-1})` against the flat volume form.
pub fn gauduchon_operator(g: &Metric, v: &ScalarField) -> ScalarField {
    let grid = g.grid();
    let n = g.dim();
    let vals = v.values();
    let mut acc = vec![C0; grid.len()];
    for k in 0..n {
        for l in k..n {
            let mut buf = par::collect(grid.len(), |p| vals[p] * g.cof_at(p).get(k, l));
            if buf.iter().all(|&z| z == buf[0]) {
                continue;
            }
            grid.forward(&mut buf);
            let factor = if k == l { 1.0 } else { 2.0 };
            par::for_each_chunk_mut(&mut acc, par::CHUNK, |c, chunk| {
                let base = c * par::CHUNK;
                for (i, a) in chunk.iter_mut().enumerate() {
                    let p = base + i;
                    *a += factor * grid.ddbar_symbol(k, l, &grid.bins(p)) * buf[p];
                }
            });
        }
    }
    grid.inverse(&mut acc);
    ScalarField::new(grid, acc.iter().map(|z| z.re).collect()).expect("same grid")
}

/// Gauduchon conformal weight: `v > 0` spanning the kernel of
/// [`gauduchon_operator`], normalised by `int v omega^n = 1`, and
/// `u = log(v) / (n - 1)` so that `e^u omega` is Gauduchon.
#[derive(Clone, Debug)]
pub struct GauduchonWeight {
    pub u: ScalarField,
    pub v: ScalarField,
    /// `sup |K(v)| / sup |v|`.
    pub residual: f64,
    pub stats: GmresStats,
}

impl GauduchonWeight {
    /// The metric `e^u g`.
    pub fn metric(&self, g: &Metric) -> Result<Metric> {
        Metric::new(g.field().scale_by(&self.u.map(f64::exp))?)
    }
}

pub fn gauduchon_weight(g: &Metric, opts: &GmresOptions) -> Result<GauduchonWeight> {
    let grid = g.grid();
    let len = grid.len();
    let n = g.dim();
    let nn = n * n;
    let mut mean_cof = vec![C0; nn];
    for (e, slot) in mean_cof.iter_mut().enumerate() {
        let (k, l) = (e / n, e % n);
        let re = par::sum(len, |p| g.cof_at(p).get(k, l).re) / len as f64;
        let im = par::sum(len, |p| g.cof_at(p).get(k, l).im) / len as f64;
        *slot = Complex64::new(re, im);
    }
    let weights = vec![1.0 / len as f64; len];
    let pre = SpectralBorderedInverse::from_coefficients(grid, &mean_cof, 1.0, weights.clone());
    let op = |x: &[f64]| {
        let f = ScalarField::new(grid, x.to_vec()).expect("same grid");
        gauduchon_operator(g, &f).into_values()
    };
    let zero = vec![0.0; len];
    let (v, _, stats) = solve_bordered(&op, 1.0, &weights, &pre, &zero, 1.0, opts, 1e-10)?;
    let v = ScalarField::new(grid, v)?;
    let total = integrate(&v, g)?;
    let v = v.scale(1.0 / total);
    let min = v.inf();
    if !(min > 0.0) {
        return Err(Error::GauduchonKernelNotPositive { min });
    }
    let residual = gauduchon_operator(g, &v).sup_abs() / v.sup_abs();
    let u = v.map(|x| x.ln() / (n as f64 - 1.0));
    Ok(GauduchonWeight {
        u,
        v,
        residual,
        stats,
    })
}

/// Both sides of the integration-by-parts identity for the Gauduchon
/// metric `omega_G = v omega` in dimension two:
/// `int |d psi^{(p+1)/2}|^2_{G_G} omega_G^2` and
/// `((p+1)^2 / 4p) int psi^p (-Delta_G psi) omega_G^2`.
pub fn gauduchon_ibp_sides(
    g: &Metric,
    weight: &GauduchonWeight,
    psi: &ScalarField,
    p: f64,
) -> Result<(f64, f64)> {
    if g.dim() != 2 {
        return Err(Error::InvalidConfig(format!(
            "integration-by-parts identity needs complex dimension 2, got {}",
            g.dim()
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidConfig(format!("exponent p must be >= 1, got {p}")));
    }
    if psi.inf() < 0.0 {
        return Err(Error::InvalidConfig("psi must be nonnegative".into()));
    }
    let v = &weight.v;
    // |.|^2_{G_G} = v^{-1} |.|^2_G and omega_G^2 = v^2 omega^2
    let w = psi.map(|x| x.powf(0.5 * (p + 1.0)));
    let lhs = integrate(&gradient_norm_sq(g, &w)?.mul(v)?, g)?;
    let lap = canonical_laplacian(g, psi)?;
    let integrand = psi.map(|x| x.powf(p)).mul(&lap)?.mul(v)?.scale(-1.0);
    let rhs = (p + 1.0).powi(2) / (4.0 * p) * integrate(&integrand, g)?;
    Ok((lhs, rhs))
}

/// Chern-Ricci form coefficients `-(1 / 2 pi) d_k d_lbar log det g`.
pub fn ricci_form(g: &Metric) -> HermitianField {
    g.log_det().ddbar().scale(-1.0 / (2.0 * PI))
}

/// Largest `|d_k A[i][j] - d_i A[k][j]|`: the `d`-closedness defect of a
/// real (1,1)-form.
///
/// Nyquist modes are removed first: first derivatives annihilate them while
/// the diagonal of `ddbar` does not, so `d ddbar f` would otherwise pick up
/// the unresolved part of `f`.
pub fn closedness_defect(a: &HermitianField) -> f64 {
    let n = a.dim();
    let grid = a.grid();
    let entries: Vec<Vec<Complex64>> = (0..n * n)
        .map(|e| {
            let mut buf = a.entry(e / n, e % n).values().to_vec();
            grid.forward(&mut buf);
            for (p, z) in buf.iter_mut().enumerate() {
                if grid.is_nyquist(&grid.bins(p)) {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
            grid.inverse(&mut buf);
            buf
        })
        .collect();
    let filtered = HermitianField::map_points(grid, |p| Mat::from_fn(n, |i, j| entries[i * n + j][p]));
    let d = MetricGradient::new(&filtered);
    par::max(a.grid().len(), |p| {
        let mut m = 0.0f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    m = m.max((d.get(p, k, i, j) - d.get(p, i, k, j)).norm());
                }
            }
        }
        m
    })
}
