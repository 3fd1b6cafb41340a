//! Complex Monge-Ampère solver.
//!
//! Solves `log det(g + ddbar phi) - log det g = F + b` for the pair
//! `(phi, b)`. Newton steps solve the bordered system
//!
//! ```text
//! Delta' eta - db = -r
//! sum_p w_p eta_p = -sum_p w_p phi_p
//! ```
//!
//! where `w` is the normalised constraint weight, so every iterate after
//! the first lies in the gauge `sum w phi = 0`. Results are returned in the
//! gauge `sup phi = 0`.

use crate::error::{Error, Result};
use crate::field::{HermitianField, Metric, ScalarField};
use crate::geometry::{canonical_laplacian, gauduchon_weight};
use crate::krylov::{solve_bordered, GmresOptions, SpectralBorderedInverse};
use crate::mat::Mat;
use crate::par;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Weight `w` of the linear gauge `int phi w = 0` used inside Newton.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintWeight {
    /// `w = v det g`, with `v` the Gauduchon weight of the background.
    #[default]
    Gauduchon,
    /// `w = det g`.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub t_step_initial: f64,
    pub t_step_min: f64,
    pub damping: f64,
    pub linear_tol: f64,
    pub constraint_weight: ConstraintWeight,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_newton_iters: 30,
            t_step_initial: 0.1,
            t_step_min: 1e-3,
            damping: 0.5,
            linear_tol: 1e-12,
            constraint_weight: ConstraintWeight::Gauduchon,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.newton_tol > 0.0 && self.linear_tol > 0.0 && self.t_step_min > 0.0) {
            return bad("tolerances and t_step_min must be positive");
        }
        if !(self.t_step_min <= self.t_step_initial && self.t_step_initial <= 1.0) {
            return bad("need t_step_min <= t_step_initial <= 1");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie in (0, 1)");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        Ok(())
    }

    fn gmres(&self) -> GmresOptions {
        GmresOptions {
            tol: self.linear_tol,
            ..GmresOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Normalised so that `sup phi = 0`.
    pub phi: ScalarField,
    pub b: f64,
    pub t_trace: Vec<TraceEntry>,
    /// Sup-norm residual after each Newton iteration of the final solve.
    pub residual_history: Vec<f64>,
    pub min_eigen_gprime: f64,
}

impl SolveResult {
    pub fn residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// The solution metric `g + ddbar phi`.
    pub fn gprime(&self, g: &Metric) -> Result<Metric> {
        Metric::new(g.field().add(&self.phi.ddbar())?)
    }
}

/// `log det(g + ddbar phi) - log det g - F - b`.
pub fn ma_log_residual(
    g: &Metric,
    phi: &ScalarField,
    f: &ScalarField,
    b: f64,
) -> Result<ScalarField> {
    phi.same_grid(g.grid())?;
    f.same_grid(g.grid())?;
    let h = phi.ddbar();
    let (min, point, logdet) = perturbed_logdet(g, &h, None);
    if !(min > 0.0) {
        return Err(Error::NotPositive {
            point,
            eigenvalue: min,
        });
    }
    let fv = f.values();
    ScalarField::new(
        g.grid(),
        par::collect(fv.len(), |p| logdet[p] - g.det_at(p).ln() - fv[p] - b),
    )
}

/// Derivative of `phi -> log det(g + ddbar phi)` at the metric `gp`: the
/// canonical Laplacian of `gp`.
pub fn linearized_apply(gp: &Metric, eta: &ScalarField) -> Result<ScalarField> {
    canonical_laplacian(gp, eta)
}

/// `(min eigenvalue, argmin, log det)` of `g + h + alpha * dh`.
fn perturbed_logdet(
    g: &Metric,
    h: &HermitianField,
    step: Option<(f64, &HermitianField)>,
) -> (f64, usize, Vec<f64>) {
    let len = g.grid().len();
    let mat = |p: usize| -> Mat {
        let m = g.at(p) + h.at(p);
        match step {
            Some((a, dh)) => m + dh.at(p).scale(a),
            None => m,
        }
    };
    let (min, point) = par::argmin(len, |p| mat(p).herm_min_eigenvalue());
    let logdet = if min > 0.0 {
        par::collect(len, |p| mat(p).det().re.ln())
    } else {
        Vec::new()
    };
    (min, point, logdet)
}

/// Normalised constraint weights for the background `g`.
pub fn constraint_weights(g: &Metric, kind: ConstraintWeight, linear_tol: f64) -> Result<Vec<f64>> {
    let len = g.grid().len();
    let raw: Vec<f64> = match kind {
        ConstraintWeight::Uniform => (0..len).map(|p| g.det_at(p)).collect(),
        ConstraintWeight::Gauduchon => {
            let opts = GmresOptions {
                tol: linear_tol,
                ..GmresOptions::default()
            };
            let w = gauduchon_weight(g, &opts)?;
            (0..len).map(|p| w.v.values()[p] * g.det_at(p)).collect()
        }
    };
    let total = par::sum(len, |p| raw[p]);
    Ok(raw.into_iter().map(|x| x / total).collect())
}

struct NewtonOutcome {
    phi: ScalarField,
    b: f64,
    iters: usize,
    history: Vec<f64>,
    min_eig: f64,
}

fn l2(v: &[f64]) -> f64 {
    par::dot(v, v).sqrt()
}

fn newton(
    g: &Metric,
    f: &ScalarField,
    weights: &[f64],
    phi0: ScalarField,
    b0: f64,
    config: &SolverConfig,
) -> Result<NewtonOutcome> {
    let grid = g.grid();
    let len = grid.len();
    let n = g.dim();
    let base: Vec<f64> = (0..len).map(|p| g.det_at(p).ln()).collect();
    let fv = f.values();
    let residual_of = |logdet: &[f64], b: f64| -> Vec<f64> {
        par::collect(len, |p| logdet[p] - base[p] - fv[p] - b)
    };
    let mut phi = phi0;
    let mut b = b0;
    let mut h = phi.ddbar();
    let (mut min_eig, point, logdet) = perturbed_logdet(g, &h, None);
    if !(min_eig > 0.0) {
        return Err(Error::NotPositive {
            point,
            eigenvalue: min_eig,
        });
    }
    let mut r = residual_of(&logdet, b);
    let mut history = Vec::new();
    let mut iters = 0;
    loop {
        let rs = par::max(len, |p| r[p].abs());
        history.push(rs);
        if rs <= config.newton_tol {
            return Ok(NewtonOutcome {
                phi,
                b,
                iters,
                history,
                min_eig,
            });
        }
        if iters >= config.max_newton_iters {
            return Err(Error::MaxItersExceeded {
                iterations: iters,
                residual: rs,
            });
        }
        iters += 1;

        let gp = Metric::new(g.field().add(&h)?)?;
        let mut c = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            for l in 0..n {
                let re = par::sum(len, |p| gp.inv_at(p).get(l, k).re) / len as f64;
                let im = par::sum(len, |p| gp.inv_at(p).get(l, k).im) / len as f64;
                c[k * n + l] = Complex64::new(re, im);
            }
        }
        let pre = SpectralBorderedInverse::from_coefficients(grid, &c, -1.0, weights.to_vec());
        let op = |x: &[f64]| {
            let eta = ScalarField::new(grid, x.to_vec()).expect("same grid");
            linearized_apply(&gp, &eta).expect("same grid").into_values()
        };
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let gauge = -par::dot(weights, phi.values());
        let (eta, db, _) =
            solve_bordered(&op, -1.0, weights, &pre, &rhs, gauge, &config.gmres(), 1e-6)?;
        let eta = ScalarField::new(grid, eta)?;
        let dh = eta.ddbar();

        let merit = l2(&r);
        let mut alpha = 1.0;
        loop {
            let (trial_min, _, trial_logdet) = perturbed_logdet(g, &h, Some((alpha, &dh)));
            if trial_min >= 0.1 * min_eig {
                let trial_r = residual_of(&trial_logdet, b + alpha * db);
                if l2(&trial_r) <= (1.0 - 1e-4 * alpha) * merit {
                    min_eig = trial_min;
                    r = trial_r;
                    break;
                }
            }
            alpha *= config.damping;
            if alpha < 1e-10 {
                return Err(if trial_min < 0.1 * min_eig {
                    Error::PositivityLost {
                        eigenvalue: trial_min,
                    }
                } else {
                    Error::LineSearchStalled { residual: rs }
                });
            }
        }
        phi = phi.zip_map(&eta, |a, e| a + alpha * e)?;
        h = h.add(&dh.scale(alpha))?;
        b += alpha * db;
    }
}

fn finish(out: NewtonOutcome, t_trace: Vec<TraceEntry>) -> SolveResult {
    let sup = out.phi.sup();
    SolveResult {
        phi: out.phi.shift(-sup),
        b: out.b,
        t_trace,
        residual_history: out.history,
        min_eigen_gprime: out.min_eig,
    }
}

/// A single Newton solve at `t = 1` from `initial` (default `(0, 0)`).
pub fn newton_solve(
    g: &Metric,
    f: &ScalarField,
    config: &SolverConfig,
    initial: Option<(&ScalarField, f64)>,
) -> Result<SolveResult> {
    config.validate()?;
    f.same_grid(g.grid())?;
    let weights = constraint_weights(g, config.constraint_weight, config.linear_tol)?;
    let (phi0, b0) = match initial {
        Some((p, b)) => {
            p.same_grid(g.grid())?;
            (p.clone(), b)
        }
        None => (ScalarField::zeros(g.grid()), 0.0),
    };
    let out = newton(g, f, &weights, phi0, b0, config)?;
    let trace = vec![TraceEntry {
        t: 1.0,
        newton_iters: out.iters,
        residual: out.history.last().copied().unwrap_or(0.0),
    }];
    Ok(finish(out, trace))
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::MaxItersExceeded { .. }
            | Error::PositivityLost { .. }
            | Error::LineSearchStalled { .. }
            | Error::LinearSolverFailed { .. }
            | Error::NotPositive { .. }
    )
}

/// Continuity path `(omega + i ddbar phi_t)^n = e^{tF + b_t} omega^n`,
/// `t: 0 -> 1`, warm-started from the previous `(phi_t, b_t)`.
pub fn continuity_solve(g: &Metric, f: &ScalarField, config: &SolverConfig) -> Result<SolveResult> {
    continuity_solve_from(g, f, config, None)
}

/// As [`continuity_solve`], starting the first Newton solve at `initial`
/// instead of `(0, 0)`.
pub fn continuity_solve_from(
    g: &Metric,
    f: &ScalarField,
    config: &SolverConfig,
    initial: Option<(&ScalarField, f64)>,
) -> Result<SolveResult> {
    config.validate()?;
    f.same_grid(g.grid())?;
    let weights = constraint_weights(g, config.constraint_weight, config.linear_tol)?;
    let (mut phi, mut b) = match initial {
        Some((p, b)) => {
            p.same_grid(g.grid())?;
            (p.clone(), b)
        }
        None => (ScalarField::zeros(g.grid()), 0.0),
    };
    let mut t = 0.0;
    let mut step = config.t_step_initial;
    let mut trace = Vec::new();
    loop {
        let t_next = (t + step).min(1.0);
        match newton(g, &f.scale(t_next), &weights, phi.clone(), b, config) {
            Ok(out) => {
                trace.push(TraceEntry {
                    t: t_next,
                    newton_iters: out.iters,
                    residual: out.history.last().copied().unwrap_or(0.0),
                });
                t = t_next;
                if t >= 1.0 {
                    return Ok(finish(out, trace));
                }
                phi = out.phi;
                b = out.b;
                step = (2.0 * step).min(config.t_step_initial);
            }
            Err(e) if recoverable(&e) => {
                step *= 0.5;
                if step < config.t_step_min {
                    return Err(Error::ContinuationStalled { t, step });
                }
            }
            Err(e) => return Err(e),
        }
    }
}
