//! Acceptance suite: one PASS/FAIL line per criterion, exit status nonzero
//! if any criterion fails. Tolerances are fixed constants below.

use cmatorus_core::estimates::{levelset_measure, r_alpha, report, sweep};
use cmatorus_core::geometry::{gauduchon_ibp_sides, gauduchon_weight, ricci_form};
use cmatorus_core::identities::{fuzz, normal_coordinates, random_jet};
use cmatorus_core::krylov::GmresOptions;
use cmatorus_core::prescription::{constraint_integral, prescribe_ricci};
use cmatorus_core::samples::{random_metric, random_trig_field};
use cmatorus_core::solver::{
    continuity_solve, linearized_apply, ma_log_residual, newton_solve, SolveResult, SolverConfig,
};
use cmatorus_core::{Grid, GridSpec, HermitianField, Mat, Metric, ScalarField};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn grid(n: usize) -> Grid {
    Grid::new(GridSpec::fourier(2, n)).expect("valid grid")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

/// Smooth non-Kaehler background used by the manufactured problems.
fn background(gr: &Grid) -> Metric {
    Metric::new(
        HermitianField::from_fn(gr, |c| {
            let a = (0.15 * (2.0 * PI * c.x[1]).cos()).exp();
            let d = 1.0 + 0.1 * (2.0 * PI * c.y[0]).sin();
            let z = Complex64::new(0.05 * (2.0 * PI * c.y[1]).sin(), 0.03 * (2.0 * PI * c.x[0]).cos());
            Mat::from_fn(2, |i, j| match (i, j) {
                (0, 0) => Complex64::new(a, 0.0),
                (1, 1) => Complex64::new(d, 0.0),
                (0, 1) => z,
                _ => z.conj(),
            })
        })
        .expect("hermitian"),
    )
    .expect("positive")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let gr = grid(16);
    let g = background(&gr);
    let phi_star = ScalarField::from_fn(&gr, |c| {
        0.015 * (2.0 * PI * (c.x[0] + c.y[1])).cos() + 0.01 * (2.0 * PI * c.x[1]).sin()
            - 0.008 * (2.0 * PI * (c.y[0] - c.x[1])).cos()
    });
    let b_star = 0.2;
    // F := log det(g + ddbar phi*) - log det g - b*
    let f = ma_log_residual(&g, &phi_star, &ScalarField::zeros(&gr), b_star).map_err(err)?;
    let res = continuity_solve(&g, &f, &SolverConfig::default()).map_err(err)?;
    let want = phi_star.shift(-phi_star.sup());
    let phi_err = res.phi.sub(&want).map_err(err)?.sup_abs();
    let b_err = (res.b - b_star).abs();
    let secs = start.elapsed().as_secs_f64();
    check(
        phi_err <= 1e-6 && b_err <= 1e-8 && secs <= 300.0,
        format!("sup|phi - phi*| = {phi_err:.2e}, |b - b*| = {b_err:.2e}, {secs:.1} s"),
    )
}

/// Converged solves on random `F` shared by criteria 2, 4 and 7.
struct RandomSuite {
    g: Metric,
    solves: Vec<(ScalarField, SolveResult)>,
    failures: Vec<String>,
}

fn random_suite() -> RandomSuite {
    let gr = grid(8);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = random_metric(&gr, &mut rng, 0.3).expect("positive");
    let mut solves = Vec::new();
    let mut failures = Vec::new();
    for k in 1..=12 {
        let amp = k as f64 / 12.0;
        let f = random_trig_field(&gr, &mut rng, 4, 2, amp);
        match continuity_solve(&g, &f, &SolverConfig::default()) {
            Ok(r) => solves.push((f, r)),
            Err(e) => failures.push(format!("amplitude {amp:.2}: {e}")),
        }
    }
    RandomSuite { g, solves, failures }
}

fn criterion_2(suite: &RandomSuite) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for (f, r) in &suite.solves {
        worst = worst.max(r.b.abs() - f.sup_abs());
    }
    check(
        suite.solves.len() >= 10 && worst <= 1e-8,
        format!(
            "{} converged ({} failed), max(|b| - sup|F|) = {worst:.2e}",
            suite.solves.len(),
            suite.failures.len()
        ),
    )
}

fn criterion_3() -> Outcome {
    let gr = grid(8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = random_metric(&gr, &mut rng, 0.3).map_err(err)?;
    let f = random_trig_field(&gr, &mut rng, 4, 2, 0.6);
    let cfg = SolverConfig::default();
    let reference = continuity_solve(&g, &f, &cfg).map_err(err)?;
    let mut worst = 0.0f64;
    for k in 0..2 {
        let p0 = random_trig_field(&gr, &mut rng, 3, 1, 0.005);
        let start = reference.phi.add(&p0).map_err(err)?;
        let b0 = reference.b + 0.1 * (k as f64 + 1.0);
        let other = newton_solve(&g, &f, &cfg, Some((&start, b0))).map_err(err)?;
        worst = worst.max(other.phi.sub(&reference.phi).map_err(err)?.sup_abs());
        worst = worst.max((other.b - reference.b).abs());
    }
    check(worst <= 1e-8, format!("max difference after sup-normalisation = {worst:.2e}"))
}

fn criterion_4(suite: &RandomSuite) -> Outcome {
    let mut ineq = f64::NEG_INFINITY;
    let mut ident = 0.0f64;
    for (f, r) in &suite.solves {
        let rep = report(&suite.g, r, f).map_err(err)?;
        ineq = ineq.max(rep.checks.trace_inequality_violation);
        ident = ident.max(rep.checks.n2_identity_error.unwrap_or(f64::INFINITY));
    }
    let fz = fuzz(42, 1000, None).map_err(err)?;
    let slack = fz
        .trace_inequality
        .worst
        .min(fz.n2_identity.worst)
        .min(fz.cs_chain.worst);
    let fuzz_failed = fz.trace_inequality.failed + fz.n2_identity.failed + fz.cs_chain.failed;
    check(
        !suite.solves.is_empty() && ineq <= 1e-10 && ident <= 1e-10 && fuzz_failed == 0 && slack >= -1e-12,
        format!(
            "solves: inequality violation {ineq:.2e}, identity error {ident:.2e}; fuzz: {fuzz_failed} failures, worst slack {slack:.2e}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let n = 2 + k % 2;
        let jet = random_jet(n, &mut rng);
        let t = normal_coordinates(&jet).map_err(err)?.apply(&jet);
        let (a, b, c) = t.gauge_defects();
        worst = worst.max(a).max(b).max(c);
    }
    check(worst <= 1e-12, format!("worst gauge defect over 200 jets = {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let gr = grid(16);
    let opts = GmresOptions::default();
    let mut parts = Vec::new();
    let mut ok = true;

    let w = gauduchon_weight(&Metric::flat(&gr), &opts).map_err(err)?;
    let flat_dev = w.v.shift(-1.0).sup_abs();
    ok &= w.residual <= 1e-8 && w.v.inf() > 0.0 && flat_dev <= 1e-12;
    parts.push(format!("flat residual {:.1e} |v - 1| {flat_dev:.1e}", w.residual));

    let h = ScalarField::from_fn(&gr, |c| 0.2 * (2.0 * PI * c.x[0]).cos());
    let conf = Metric::new(HermitianField::identity(&gr).scale_by(&h.map(f64::exp)).map_err(err)?)
        .map_err(err)?;
    let w = gauduchon_weight(&conf, &opts).map_err(err)?;
    let d = w.u.add(&h).map_err(err)?;
    let conf_dev = d.shift(-d.mean()).sup_abs();
    ok &= w.residual <= 1e-8 && w.v.inf() > 0.0 && conf_dev <= 1e-6;
    parts.push(format!("conformal residual {:.1e} |u + h - c| {conf_dev:.1e}", w.residual));

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let rand_g = random_metric(&gr, &mut rng, 0.3).map_err(err)?;
    let w = gauduchon_weight(&rand_g, &opts).map_err(err)?;
    ok &= w.residual <= 1e-8 && w.v.inf() > 0.0;
    parts.push(format!("random residual {:.1e} min v {:.3}", w.residual, w.v.inf()));
    check(ok, parts.join("; "))
}

fn criterion_7(suite: &RandomSuite) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    let mut record = |phi: &ScalarField, mu: &[f64]| {
        let c1 = r_alpha(phi, mu, 1.0);
        let m = levelset_measure(phi, mu, c1 + 1.0);
        worst = worst.min(m - (-c1).exp() / 4.0);
        count += 1;
    };
    let mu = suite.g.probability_weights();
    for (_, r) in &suite.solves {
        record(&r.phi, &mu);
    }
    let gr = grid(8);
    let flat_mu = Metric::flat(&gr).probability_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..100 {
        let phi = random_trig_field(&gr, &mut rng, 6, 3, 0.5 + 0.1 * k as f64);
        let phi = phi.shift(-phi.sup());
        record(&phi, &flat_mu);
    }
    check(
        count >= 110 && worst >= 0.0,
        format!("{count} fields, min(measure - e^-C1 / 4) = {worst:.3e}"),
    )
}

fn criterion_8() -> Outcome {
    let gr = grid(8);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let g = random_metric(&gr, &mut rng, 0.3).map_err(err)?;
    let f = random_trig_field(&gr, &mut rng, 4, 2, 0.5);
    let scales = [0.25, 0.5, 1.0, 1.5, 2.0];
    let entries = sweep(&g, &f, &scales, &SolverConfig::default());
    let mut cs = Vec::new();
    let mut lap = 0.0f64;
    for e in &entries {
        let (_, rep) = e.outcome.as_ref().map_err(|f| format!("s = {}: {}", e.s, f.message))?;
        let c4 = rep
            .fitted_a_c
            .iter()
            .find(|(a, _)| *a == 4.0)
            .map(|&(_, c)| c)
            .ok_or("missing A = 4")?;
        cs.push(c4);
        lap = lap.max(rep.checks.trace_laplacian_error);
    }
    let max = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    check(
        ratio < 4.0 && lap <= 1e-8,
        format!("C(4) over s: {cs:.3?}, max/min = {ratio:.3}, sup|tr - n - Delta phi| = {lap:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let gr = grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let g = random_metric(&gr, &mut rng, 0.2).map_err(err)?;
    let w = gauduchon_weight(&g, &GmresOptions::default()).map_err(err)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let psi = random_trig_field(&gr, &mut rng, 4, 1, 0.6).map(f64::exp);
        for p in [1.0, 2.0, 3.0] {
            let (lhs, rhs) = gauduchon_ibp_sides(&g, &w, &psi, p).map_err(err)?;
            worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
        }
    }
    check(worst <= 1e-6, format!("worst relative gap over 15 cases = {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let gr = grid(16);
    let g = background(&gr);
    let h = ScalarField::from_fn(&gr, |c| {
        0.2 * (2.0 * PI * c.x[0]).cos() + 0.1 * (2.0 * PI * (c.y[0] + c.x[1])).sin()
    });
    let psi = ricci_form(&g).sub(&h.ddbar().scale(1.0 / (2.0 * PI))).map_err(err)?;
    let w = gauduchon_weight(&g, &GmresOptions::default()).map_err(err)?;
    let constraint = constraint_integral(&g, &psi, &w).map_err(err)?.abs();
    let r = prescribe_ricci(&g, &psi, &SolverConfig::default()).map_err(err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut trans = 0.0f64;
    let small = grid(8);
    for _ in 0..3 {
        let rg = random_metric(&small, &mut rng, 0.3).map_err(err)?;
        let phi = random_trig_field(&small, &mut rng, 4, 1, 0.004);
        let gp = Metric::new(rg.field().add(&phi.ddbar()).map_err(err)?).map_err(err)?;
        let log_ratio = gp.log_det().sub(&rg.log_det()).map_err(err)?;
        let e = ricci_form(&gp)
            .sub(&ricci_form(&rg))
            .map_err(err)?
            .add(&log_ratio.ddbar().scale(1.0 / (2.0 * PI)))
            .map_err(err)?
            .sup_norm();
        trans = trans.max(e);
    }
    check(
        r.final_ricci_error <= 1e-6 && constraint <= 1e-10 && trans <= 1e-10,
        format!(
            "final Ricci error {:.2e}, constraint {constraint:.2e}, transgression {trans:.2e}",
            r.final_ricci_error
        ),
    )
}

fn criterion_11() -> Outcome {
    let gr = grid(8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_metric(&gr, &mut rng, 0.3).map_err(err)?;
    let phi = random_trig_field(&gr, &mut rng, 4, 1, 0.004);
    let zero = ScalarField::zeros(&gr);
    let gp = Metric::new(g.field().add(&phi.ddbar()).map_err(err)?).map_err(err)?;
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let eta = random_trig_field(&gr, &mut rng, 4, 2, 1.0);
        let plus = ma_log_residual(&g, &phi.add(&eta.scale(eps)).map_err(err)?, &zero, 0.0).map_err(err)?;
        let minus = ma_log_residual(&g, &phi.sub(&eta.scale(eps)).map_err(err)?, &zero, 0.0).map_err(err)?;
        let fd = plus.sub(&minus).map_err(err)?.scale(0.5 / eps);
        let lin = linearized_apply(&gp, &eta).map_err(err)?;
        worst = worst.max(fd.sub(&lin).map_err(err)?.sup_abs() / lin.sup_abs());
    }
    check(worst <= 1e-5, format!("worst relative error over 10 directions = {worst:.2e}"))
}

fn main() {
    let suite = random_suite();
    let criteria: Vec<Criterion> = vec![
        ("1 manufactured solution on 16^4", Box::new(criterion_1)),
        ("2 constant bound |b| <= sup|F|", Box::new(|| criterion_2(&suite))),
        ("3 uniqueness from perturbed starts", Box::new(criterion_3)),
        ("4 pointwise trace inequality and identity", Box::new(|| criterion_4(&suite))),
        ("5 normal coordinates on 200 jets", Box::new(criterion_5)),
        ("6 Gauduchon weight on 16^4", Box::new(criterion_6)),
        ("7 level-set measure bound", Box::new(|| criterion_7(&suite))),
        ("8 sweep uniformity and trace identity", Box::new(criterion_8)),
        ("9 Gauduchon integration by parts", Box::new(criterion_9)),
        ("10 Ricci prescription end to end", Box::new(criterion_10)),
        ("11 linearisation gradient check", Box::new(criterion_11)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
