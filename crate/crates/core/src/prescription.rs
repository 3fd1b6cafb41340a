//! Prescribing the Chern-Ricci form in complex dimension two.
//!
//! Wedge normalisation: for a real (1,1)-form `alpha` with coefficient
//! matrix `A`, `alpha ^ omega_G = (1/2) tr_{G_G}(A) omega_G^2`, and
//! `int omega_G^2` uses the same volume normalisation as
//! [`integrate`]. The Ricci form of `g` has coefficients
//! `-(1 / 2 pi) ddbar log det g`.

use crate::error::{Error, Result};
use crate::field::{integrate, HermitianField, Metric, ScalarField};
use crate::geometry::{closedness_defect, gauduchon_weight, ricci_form, GauduchonWeight};
use crate::krylov::{solve_bordered, GmresOptions, SpectralBorderedInverse};
use crate::par;
use crate::solver::{continuity_solve, SolveResult, SolverConfig};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Relative tolerance on `sup |d psi|`, scaled by `1 + sup |psi|`.
pub const CLOSEDNESS_TOL: f64 = 1e-8;
/// Absolute tolerance on the integral constraint.
pub const CONSTRAINT_TOL: f64 = 1e-8;

fn require_dim2(g: &Metric) -> Result<()> {
    if g.dim() != 2 {
        return Err(Error::InvalidConfig(format!(
            "Ricci prescription needs complex dimension 2, got {}",
            g.dim()
        )));
    }
    Ok(())
}

fn check_closed(psi: &HermitianField) -> Result<()> {
    let defect = closedness_defect(psi);
    let tolerance = CLOSEDNESS_TOL * (1.0 + psi.sup_norm());
    if defect > tolerance {
        return Err(Error::NotClosed { defect, tolerance });
    }
    Ok(())
}

/// `int alpha ^ omega_G` for `omega_G = v omega` (dimension two).
pub fn wedge_integral(g: &Metric, alpha: &HermitianField, v: &ScalarField) -> Result<f64> {
    require_dim2(g)?;
    let tr = g.trace_of(alpha)?;
    // tr_{vG} A * det(vG) = v tr_G A det G
    let f = tr.mul(v)?;
    Ok(0.5 * integrate(&f, g)?)
}

/// `int (Ric(omega) - psi) ^ omega_G`.
pub fn constraint_integral(g: &Metric, psi: &HermitianField, weight: &GauduchonWeight) -> Result<f64> {
    require_dim2(g)?;
    check_closed(psi)?;
    let a = ricci_form(g).sub(psi)?;
    wedge_integral(g, &a, &weight.v)
}

#[derive(Clone, Debug)]
pub struct PrescriptionResult {
    pub constraint_value: f64,
    /// Potential with zero grid mean.
    pub f: ScalarField,
    /// `sup |omega_G ^ a| / omega_G^2 = sup |tr_{G_G} a| / 2`.
    pub asd_residual: f64,
    /// Largest coefficient of `a`.
    pub a_sup: f64,
    /// `(int |a|^2_{G_G} omega_G^2)^{1/2}`.
    pub a_l2: f64,
    pub solve: SolveResult,
    /// Largest coefficient of `Ric(omega + i ddbar phi) - psi`.
    pub final_ricci_error: f64,
    /// Largest coefficient of
    /// `Ric(g') - Ric(g) + (1 / 2 pi) ddbar log(det g' / det g)`.
    pub transgression_error: f64,
    pub gauduchon_residual: f64,
}

/// Solve `Delta_G f = rhs` with `grid mean(f) = 0`, where
/// `Delta_G = v^{-1} tr_G ddbar` is the Laplacian of `omega_G = v omega`.
pub fn gauduchon_poisson(
    g: &Metric,
    v: &ScalarField,
    rhs: &ScalarField,
    opts: &GmresOptions,
) -> Result<ScalarField> {
    let grid = g.grid();
    let len = grid.len();
    let n = g.dim();
    let vv = v.values();
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        for l in 0..n {
            let re = par::sum(len, |p| g.inv_at(p).get(l, k).re / vv[p]) / len as f64;
            let im = par::sum(len, |p| g.inv_at(p).get(l, k).im / vv[p]) / len as f64;
            c[k * n + l] = Complex64::new(re, im);
        }
    }
    let weights = vec![1.0 / len as f64; len];
    let pre = SpectralBorderedInverse::from_coefficients(grid, &c, 1.0, weights.clone());
    let op = |x: &[f64]| {
        let f = ScalarField::new(grid, x.to_vec()).expect("same grid");
        let t = g.trace_of(&f.ddbar()).expect("same grid");
        t.values().iter().zip(vv).map(|(a, b)| a / b).collect::<Vec<_>>()
    };
    let (f, _, _) = solve_bordered(&op, 1.0, &weights, &pre, rhs.values(), 0.0, opts, 1e-8)?;
    ScalarField::new(grid, f)
}

pub fn prescribe_ricci(g: &Metric, psi: &HermitianField, config: &SolverConfig) -> Result<PrescriptionResult> {
    require_dim2(g)?;
    config.validate()?;
    let opts = GmresOptions {
        tol: config.linear_tol,
        ..GmresOptions::default()
    };
    let weight = gauduchon_weight(g, &opts)?;
    let constraint_value = constraint_integral(g, psi, &weight)?;
    if constraint_value.abs() > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolated {
            value: constraint_value,
            tolerance: CONSTRAINT_TOL,
        });
    }
    let ric = ricci_form(g);
    let a0 = ric.sub(psi)?;
    let v = &weight.v;
    // tr_{G_G} A = v^{-1} tr_G A
    let tr_gg = g.trace_of(&a0)?.zip_map(v, |t, w| t / w)?;
    let f = gauduchon_poisson(g, v, &tr_gg.scale(2.0 * PI), &opts)?;
    let f = f.shift(-f.mean());
    let a = a0.sub(&f.ddbar().scale(1.0 / (2.0 * PI)))?;
    let tr_a = g.trace_of(&a)?.zip_map(v, |t, w| t / w)?;
    let asd_residual = 0.5 * tr_a.sup_abs();
    let gg = weight.metric(g)?;
    let norm_sq = ScalarField::new(
        g.grid(),
        par::collect(g.grid().len(), |p| {
            let m = gg.inv_at(p) * a.at(p);
            m.trace_prod(&m).re
        }),
    )?;
    let a_l2 = integrate(&norm_sq, &gg)?.max(0.0).sqrt();

    let solve = continuity_solve(g, &f, config)?;
    let gp = solve.gprime(g)?;
    let ric_p = ricci_form(&gp);
    let final_ricci_error = ric_p.sub(psi)?.sup_norm();
    let log_ratio = gp.log_det().sub(&g.log_det())?;
    let transgression_error = ric_p
        .sub(&ric)?
        .add(&log_ratio.ddbar().scale(1.0 / (2.0 * PI)))?
        .sup_norm();
    Ok(PrescriptionResult {
        constraint_value,
        f,
        asd_residual,
        a_sup: a.sup_norm(),
        a_l2,
        solve,
        final_ricci_error,
        transgression_error,
        gauduchon_residual: weight.residual,
    })
}
