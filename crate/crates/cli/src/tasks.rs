//! Problem setup and task execution.

use crate::config::{resolve, MetricSpec, PrescriptionSpec, RhsSpec, RunConfig, Task};
use crate::error::CliError;
use crate::expr::Expr;
use cmatorus_core::estimates::{report, sweep, sweep_csv, EstimateReport};
use cmatorus_core::geometry::{defects, gauduchon_weight, ricci_form};
use cmatorus_core::identities::fuzz;
use cmatorus_core::io::{load_hermitian, load_scalar, save_hermitian, save_scalar, write_atomic};
use cmatorus_core::krylov::GmresOptions;
use cmatorus_core::prescription::prescribe_ricci;
use cmatorus_core::samples::random_metric;
use cmatorus_core::solver::{continuity_solve, SolveResult};
use cmatorus_core::{Grid, GridSpec, HermitianField, Mat, Metric, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Output directory with an append-only timestamped log. Every artifact is
/// written atomically; `summary.json` is written by the caller last.
pub struct Output {
    dir: PathBuf,
    log: File,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Output, CliError> {
        let io = |source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        for stale in ["summary.json", "error.json"] {
            let path = dir.join(stale);
            if path.exists() {
                std::fs::remove_file(&path).map_err(io)?;
            }
        }
        let log = File::options()
            .create(true)
            .append(true)
            .open(dir.join("run.log"))
            .map_err(io)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            log,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log(&mut self, message: &str) {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        // The log is diagnostic only; a failed write must not fail the run.
        let _ = writeln!(self.log, "{}.{:03} {message}", now.as_secs(), now.subsec_millis());
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), text.as_bytes())?;
        self.log(&format!("wrote {name}"));
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialise");
        text.push('\n');
        self.text(name, &text)
    }

    pub fn scalar(&mut self, name: &str, f: &ScalarField) -> Result<(), CliError> {
        save_scalar(&self.dir.join(name), f)?;
        self.log(&format!("wrote {name}"));
        Ok(())
    }

    pub fn hermitian(&mut self, name: &str, f: &HermitianField) -> Result<(), CliError> {
        save_hermitian(&self.dir.join(name), f)?;
        self.log(&format!("wrote {name}"));
        Ok(())
    }
}

/// Everything a task needs besides the output directory.
pub struct Context {
    pub config: RunConfig,
    pub base: PathBuf,
    pub seed: u64,
}

fn parse_expr(src: &str, field: &str, dim: usize) -> Result<Expr, CliError> {
    Expr::parse(src, dim).map_err(|source| CliError::Expression {
        field: field.to_string(),
        source,
    })
}

fn position(c: &cmatorus_core::Coords) -> [f64; 6] {
    [c.x[0], c.y[0], c.x[1], c.y[1], c.x[2], c.y[2]]
}

fn expr_field(grid: &Grid, src: &str, field: &str) -> Result<ScalarField, CliError> {
    let e = parse_expr(src, field, grid.dim())?;
    Ok(ScalarField::from_fn(grid, |c| e.eval(&position(c))))
}

impl Context {
    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(GridSpec::from(self.config.grid))?)
    }

    fn path(&self, p: &Path) -> PathBuf {
        resolve(&self.base, p)
    }

    pub fn metric(&self, grid: &Grid) -> Result<Metric, CliError> {
        let n = grid.dim();
        let field = match &self.config.metric {
            MetricSpec::Flat => HermitianField::identity(grid),
            MetricSpec::Conformal { h } => {
                let h = expr_field(grid, h, "metric.h")?;
                HermitianField::identity(grid).scale_by(&h.map(f64::exp))?
            }
            MetricSpec::KaehlerPerturbation { f } => {
                let f = expr_field(grid, f, "metric.f")?;
                HermitianField::identity(grid).add(&f.ddbar())?
            }
            MetricSpec::Explicit { path } => load_hermitian(&self.path(path), grid)?,
            MetricSpec::Diagonal { entries } => {
                if entries.len() != n {
                    return Err(CliError::MissingInput(format!(
                        "metric.entries needs {n} expressions, got {}",
                        entries.len()
                    )));
                }
                let exprs = entries
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse_expr(s, &format!("metric.entries[{i}]"), n))
                    .collect::<Result<Vec<_>, _>>()?;
                HermitianField::from_fn(grid, |c| {
                    let p = position(c);
                    let d: Vec<f64> = exprs.iter().map(|e| e.eval(&p)).collect();
                    Mat::from_real_diag(&d)
                })?
            }
            MetricSpec::Random { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                return Ok(random_metric(grid, &mut rng, *amplitude)?);
            }
        };
        Ok(Metric::new(field)?)
    }

    pub fn rhs(&self, grid: &Grid) -> Result<ScalarField, CliError> {
        match &self.config.rhs {
            None => Ok(ScalarField::zeros(grid)),
            Some(RhsSpec::Expr(s)) => expr_field(grid, s, "rhs.expr"),
            Some(RhsSpec::File(p)) => Ok(load_scalar(&self.path(p), grid)?),
        }
    }
}

fn solve_summary(res: &SolveResult, rep: &EstimateReport) -> Value {
    json!({
        "b": res.b,
        "residual": res.residual(),
        "min_eigen_gprime": res.min_eigen_gprime,
        "newton_iters": res.t_trace.iter().map(|e| e.newton_iters).sum::<usize>(),
        "t_trace": res.t_trace,
        "residual_history": res.residual_history,
        "report": rep,
    })
}

fn trace_csv(res: &SolveResult) -> String {
    let mut out = String::from("t,newton_iters,residual\n");
    for e in &res.t_trace {
        out.push_str(&format!("{},{},{}\n", e.t, e.newton_iters, e.residual));
    }
    out
}

fn report_csv(rep: &EstimateReport) -> String {
    let mut out = String::from("quantity,parameter,value\n");
    for (a, r) in &rep.r_alpha {
        out.push_str(&format!("R_alpha,{a},{r}\n"));
    }
    for (a, c) in &rep.fitted_a_c {
        out.push_str(&format!("C_A,{a},{c}\n"));
    }
    for (name, v) in [
        ("sup_tr", rep.sup_tr),
        ("osc_phi", rep.osc_phi),
        ("C1", rep.c1),
        ("levelset_measure", rep.levelset_measure),
        ("L1_phi", rep.l1_phi),
        ("Q_max", rep.q_max),
    ] {
        out.push_str(&format!("{name},,{v}\n"));
    }
    out
}

/// Run `task`, writing artifacts into `out`, and return the summary.
pub fn run(task: Task, ctx: &Context, out: &mut Output) -> Result<Value, CliError> {
    let grid = ctx.grid()?;
    out.log(&format!("task {} on grid {:?}", task.name(), grid.spec()));
    let mut summary = match task {
        Task::Solve => {
            let g = ctx.metric(&grid)?;
            let f = ctx.rhs(&grid)?;
            let res = continuity_solve(&g, &f, &ctx.config.solver)?;
            out.log(&format!("solved: b = {}, residual = {:e}", res.b, res.residual()));
            let rep = report(&g, &res, &f)?;
            out.scalar("phi.fld", &res.phi)?;
            out.text("trace.csv", &trace_csv(&res))?;
            solve_summary(&res, &rep)
        }
        Task::Report => {
            let g = ctx.metric(&grid)?;
            let f = ctx.rhs(&grid)?;
            let res = match &ctx.config.report {
                Some(input) => {
                    let phi = load_scalar(&ctx.path(&input.phi_file), &grid)?;
                    let gp = Metric::new(g.field().add(&phi.ddbar())?)?;
                    let residual = cmatorus_core::solver::ma_log_residual(&g, &phi, &f, input.b)?.sup_abs();
                    SolveResult {
                        phi,
                        b: input.b,
                        t_trace: Vec::new(),
                        residual_history: vec![residual],
                        min_eigen_gprime: gp.min_eigenvalue(),
                    }
                }
                None => continuity_solve(&g, &f, &ctx.config.solver)?,
            };
            let rep = report(&g, &res, &f)?;
            out.text("report.csv", &report_csv(&rep))?;
            solve_summary(&res, &rep)
        }
        Task::Sweep => {
            let g = ctx.metric(&grid)?;
            let f = ctx.rhs(&grid)?;
            let entries = sweep(&g, &f, &ctx.config.sweep.scales, &ctx.config.solver);
            out.text("sweep.csv", &sweep_csv(&entries))?;
            let rows: Vec<Value> = entries
                .iter()
                .map(|e| match &e.outcome {
                    Ok((res, rep)) => json!({
                        "s": e.s,
                        "status": "ok",
                        "b": res.b,
                        "residual": res.residual(),
                        "report": rep,
                    }),
                    Err(fail) => json!({"s": e.s, "status": fail.kind, "message": fail.message}),
                })
                .collect();
            out.log(&format!("sweep finished with {} entries", rows.len()));
            json!({ "entries": rows })
        }
        Task::Gauduchon => {
            let g = ctx.metric(&grid)?;
            let opts = GmresOptions {
                tol: ctx.config.solver.linear_tol,
                ..GmresOptions::default()
            };
            let w = gauduchon_weight(&g, &opts)?;
            out.scalar("u.fld", &w.u)?;
            out.scalar("v.fld", &w.v)?;
            json!({
                "residual": w.residual,
                "gmres_iterations": w.stats.iterations,
                "v_min": w.v.inf(),
                "v_max": w.v.sup(),
                "defects": defects(&g),
            })
        }
        Task::VerifyIdentities => {
            let dump = out.dir().join("failures");
            let s = fuzz(ctx.seed, ctx.config.identities.instances, Some(&dump))?;
            let mut csv = String::from("check,passed,failed,worst\n");
            for (name, c) in [
                ("trace_inequality", &s.trace_inequality),
                ("n2_identity", &s.n2_identity),
                ("cs_chain", &s.cs_chain),
                ("normal_coordinates", &s.normal_coordinates),
                ("balanced_coordinates", &s.balanced_coordinates),
            ] {
                csv.push_str(&format!("{name},{},{},{}\n", c.passed, c.failed, c.worst));
            }
            out.text("identities.csv", &csv)?;
            out.log(&format!("fuzzing found {} failures", s.failures()));
            json!({ "failures": s.failures(), "fuzz": s })
        }
        Task::PrescribeRicci => {
            let g = ctx.metric(&grid)?;
            let psi = match &ctx.config.prescription {
                None => {
                    return Err(CliError::MissingInput(
                        "prescribe-ricci needs a 'prescription' entry (h, h_file or psi_file)".into(),
                    ))
                }
                Some(PrescriptionSpec::PsiFile(p)) => load_hermitian(&ctx.path(p), &grid)?,
                Some(spec) => {
                    let h = match spec {
                        PrescriptionSpec::H(s) => expr_field(&grid, s, "prescription.h")?,
                        PrescriptionSpec::HFile(p) => load_scalar(&ctx.path(p), &grid)?,
                        PrescriptionSpec::PsiFile(_) => unreachable!("handled above"),
                    };
                    ricci_form(&g).sub(&h.ddbar().scale(1.0 / (2.0 * std::f64::consts::PI)))?
                }
            };
            let r = prescribe_ricci(&g, &psi, &ctx.config.solver)?;
            out.scalar("f.fld", &r.f)?;
            out.scalar("phi.fld", &r.solve.phi)?;
            out.hermitian("psi.fld", &psi)?;
            json!({
                "constraint_value": r.constraint_value,
                "asd_residual": r.asd_residual,
                "a_sup": r.a_sup,
                "a_l2": r.a_l2,
                "final_ricci_error": r.final_ricci_error,
                "transgression_error": r.transgression_error,
                "gauduchon_residual": r.gauduchon_residual,
                "b": r.solve.b,
                "residual": r.solve.residual(),
            })
        }
    };
    summary["task"] = json!(task.name());
    summary["seed"] = json!(ctx.seed);
    summary["grid"] = json!(grid.spec());
    Ok(summary)
}
