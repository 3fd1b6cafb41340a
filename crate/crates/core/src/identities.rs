//! Pointwise algebra at a single point: holomorphic normal coordinates for a
//! metric jet, the trace inequalities, the Cauchy-Schwarz chain for the
//! gradient of the trace, and the identities that hold in balanced
//! coordinates.
//!
//! A jet stores `G = g_{i jbar}(0)`, the holomorphic derivatives
//! `dg[k][i][j] = d_k g_{i jbar}(0)` and the complex Hessian
//! `hess[i][j] = phi_{i jbar}(0)`.

use crate::error::{Error, Result};
use crate::mat::Mat;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct MetricJet {
    pub g0: Mat,
    /// `dg[k]` is the matrix `d_k g_{i jbar}`.
    pub dg: Vec<Mat>,
    pub hess_phi: Mat,
}

/// Holomorphic change `z = L (w + b(w, w) / 2)` with
/// `quadratic[(a * n + b) * n + c] = b^a_{bc}`, symmetric in `(b, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateChange {
    pub linear: Mat,
    pub quadratic: Vec<Complex64>,
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.g0.order()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.dg.len() != n || self.dg.iter().any(|m| m.order() != n) || self.hess_phi.order() != n
        {
            return Err(Error::InvalidConfig("jet components have inconsistent orders".into()));
        }
        Ok(())
    }

    /// Largest violation of the normal-coordinate conditions:
    /// `(|G - I|, max |d_j g_{i ibar}|, max off-diagonal |hess|)`.
    pub fn gauge_defects(&self) -> (f64, f64, f64) {
        let n = self.dim();
        let id = (self.g0 - Mat::identity(n)).max_abs();
        let mut d = 0.0f64;
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                d = d.max(self.dg[j].get(i, i).norm());
                if i != j {
                    off = off.max(self.hess_phi.get(i, j).norm());
                }
            }
        }
        (id, d, off)
    }
}

impl CoordinateChange {
    pub fn identity(n: usize) -> Self {
        CoordinateChange {
            linear: Mat::identity(n),
            quadratic: vec![C0; n * n * n],
        }
    }

    #[inline]
    pub fn b(&self, a: usize, b: usize, c: usize) -> Complex64 {
        let n = self.linear.order();
        self.quadratic[(a * n + b) * n + c]
    }

    /// Jet of the pulled-back metric and Hessian at `w = 0`.
    pub fn apply(&self, jet: &MetricJet) -> MetricJet {
        let n = jet.dim();
        let l = self.linear;
        let g0 = l.transpose() * jet.g0 * l.conj();
        let dg = (0..n)
            .map(|c| {
                Mat::from_fn(n, |a, b| {
                    let mut t = C0;
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                t += l.get(i, a) * jet.dg[k].get(i, j) * l.get(k, c) * l.get(j, b).conj();
                            }
                        }
                    }
                    for e in 0..n {
                        t += self.b(e, a, c) * g0.get(e, b);
                    }
                    t
                })
            })
            .collect();
        MetricJet {
            g0,
            dg,
            hess_phi: l.transpose() * jet.hess_phi * l.conj(),
        }
    }
}

fn to_dmatrix(m: &Mat) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.order(), m.order(), |i, j| m.get(i, j))
}

fn from_dmatrix(m: &DMatrix<Complex64>) -> Mat {
    Mat::from_fn(m.nrows(), |i, j| m[(i, j)])
}

/// Unitary diagonalising the Hermitian `h`: columns are eigenvectors in
/// ascending eigenvalue order, each scaled so its first component of
/// modulus above `1e-12` is real and positive. An already-diagonal `h`
/// yields the identity.
fn diagonalising_unitary(h: &Mat) -> Mat {
    let n = h.order();
    let scale = h.max_abs().max(1.0);
    let off = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(h.get(i, j).norm()));
    if off <= 1e-15 * scale {
        return Mat::identity(n);
    }
    let eig = SymmetricEigen::new(to_dmatrix(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut v = Mat::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        let vec: Vec<Complex64> = (0..n).map(|i| eig.eigenvectors[(i, src)]).collect();
        let pivot = vec.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(Complex64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for (i, z) in vec.iter().enumerate() {
            v.set(i, col, z * phase);
        }
    }
    v
}

/// Explicit coordinates in which `G = I`, `d_j g_{i ibar} = 0` and the
/// Hessian of `phi` is diagonal.
pub fn normal_coordinates(jet: &MetricJet) -> Result<CoordinateChange> {
    jet.validate()?;
    let n = jet.dim();
    let min = jet.g0.herm_min_eigenvalue();
    if !(min > 0.0) {
        return Err(Error::NotPositive {
            point: 0,
            eigenvalue: min,
        });
    }
    let chol = to_dmatrix(&jet.g0).cholesky().ok_or(Error::NotPositive {
        point: 0,
        eigenvalue: min,
    })?;
    // G = C C^*; L0 = (C^{-1})^T gives L0^T G conj(L0) = I.
    let c_inv = chol.l().try_inverse().ok_or(Error::SingularMatrix { point: 0 })?;
    let l0 = from_dmatrix(&c_inv.transpose());
    let phi1 = l0.transpose() * jet.hess_phi * l0.conj();
    let v = diagonalising_unitary(&phi1);
    let linear = l0 * v.conj();
    let first = CoordinateChange {
        linear,
        quadratic: vec![C0; n * n * n],
    };
    let t = first.apply(jet);
    let mut quadratic = vec![C0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let val = -t.dg[j].get(i, i);
            quadratic[(i * n + i) * n + j] = val;
            quadratic[(i * n + j) * n + i] = val;
        }
    }
    Ok(CoordinateChange { linear, quadratic })
}

/// Outcome of a scalar inequality `lhs <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs - lhs) / (1 + |rhs|)`; non-negative when the inequality holds.
    pub slack: f64,
}

impl Margin {
    fn new(lhs: f64, rhs: f64) -> Self {
        Margin {
            lhs,
            rhs,
            slack: (rhs - lhs) / (1.0 + rhs.abs()),
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

/// `tr_g g' <= (tr_g' g)^{n-1} (det g' / det g) / (n-1)!` at one point.
pub fn trace_inequality(g: &Mat, gp: &Mat) -> Result<Margin> {
    let n = g.order();
    let gi = g.inverse().ok_or(Error::SingularMatrix { point: 0 })?;
    let gpi = gp.inverse().ok_or(Error::SingularMatrix { point: 0 })?;
    let tr = gi.trace_prod(gp).re;
    let tr_back = gpi.trace_prod(g).re;
    let fact: f64 = (1..n).map(|k| k as f64).product();
    let ratio = gp.det().re / g.det().re;
    Ok(Margin::new(tr, tr_back.powi(n as i32 - 1) * ratio / fact))
}

/// `|tr_g g' - (tr_g' g) det g' / det g| / (1 + tr_g g')` for order-2 matrices.
pub fn n2_identity_error(g: &Mat, gp: &Mat) -> Result<f64> {
    if g.order() != 2 {
        return Err(Error::InvalidConfig("identity is specific to order 2".into()));
    }
    let m = trace_inequality(g, gp)?;
    Ok((m.lhs - m.rhs).abs() / (1.0 + m.lhs))
}

/// Cauchy-Schwarz chain for the gradient of the trace in coordinates where
/// `g = I` and `g' = diag(lambda)`:
/// `sum_i |sum_j D_ij|^2 / lambda_i / sum_j lambda_j <= sum_ij |D_ij|^2 / (lambda_i lambda_j)`
/// with `D_ij = d_i g'_{j jbar} = dgprime[i](j, j)`.
pub fn check_cs_chain(gprime_diag: &[f64], dgprime: &[Mat]) -> Result<Margin> {
    let n = gprime_diag.len();
    if gprime_diag.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositive {
            point: 0,
            eigenvalue: gprime_diag.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    if dgprime.len() != n {
        return Err(Error::InvalidConfig("derivative tensor has wrong order".into()));
    }
    let d = |i: usize, j: usize| dgprime[i].get(j, j);
    let tr: f64 = gprime_diag.iter().sum();
    let lhs: f64 = (0..n)
        .map(|i| (0..n).map(|j| d(i, j)).sum::<Complex64>().norm_sqr() / gprime_diag[i])
        .sum::<f64>()
        / tr;
    let rhs: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| d(i, j).norm_sqr() / (gprime_diag[i] * gprime_diag[j]))
        .sum();
    Ok(Margin::new(lhs, rhs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalancedCheck {
    /// `sum_j T^j_{ji}` for each `i`.
    pub torsion_trace: Vec<[f64; 2]>,
    /// `sum_j d_j g_{i jbar}` for each `i`.
    pub divergence: Vec<[f64; 2]>,
    /// `max_i |divergence_i - torsion_trace_i|`.
    pub trace_identity_error: f64,
    /// `max_i |d_i tr_g g' - sum_j d_j g'_{i jbar}|`.
    pub gradient_identity_error: f64,
    /// Both identities hold and the torsion trace vanishes, to `1e-12`.
    pub holds: bool,
}

/// Evaluate the balanced-coordinate identities for a jet in normal
/// coordinates. `phi3[k](i, j) = d_k phi_{i jbar}` must be symmetric in
/// `(k, i)`.
pub fn check_balanced_coords(jet: &MetricJet, phi3: &[Mat]) -> Result<BalancedCheck> {
    jet.validate()?;
    let n = jet.dim();
    let (id, d, off) = jet.gauge_defects();
    if id > 1e-12 || d > 1e-12 || off > 1e-12 {
        return Err(Error::GaugeViolated(format!(
            "|G - I| = {id:e}, max |d_j g_(i ibar)| = {d:e}, off-diagonal Hessian {off:e}"
        )));
    }
    if phi3.len() != n {
        return Err(Error::InvalidConfig("third-derivative tensor has wrong order".into()));
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if (phi3[k].get(i, j) - phi3[i].get(k, j)).norm() > 1e-12 {
                    return Err(Error::InvalidConfig(
                        "third derivatives must be symmetric in the holomorphic indices".into(),
                    ));
                }
            }
        }
    }
    let dg = &jet.dg;
    let gp = jet.g0 + jet.hess_phi;
    let dgp: Vec<Mat> = (0..n).map(|k| dg[k] + phi3[k]).collect();
    let ginv = jet.g0.inverse().ok_or(Error::SingularMatrix { point: 0 })?;
    let mut torsion_trace = Vec::new();
    let mut divergence = Vec::new();
    let mut trace_err = 0.0f64;
    let mut grad_err = 0.0f64;
    for i in 0..n {
        let mut tt = C0;
        let mut div = C0;
        for j in 0..n {
            tt += dg[j].get(i, j) - dg[i].get(j, j);
            div += dg[j].get(i, j);
        }
        // d_i tr(G^{-1} G') = tr(G^{-1} d_i G') - tr(G^{-1} d_i G G^{-1} G')
        let grad_tr = ginv.trace_prod(&dgp[i]) - (ginv * dg[i] * ginv).trace_prod(&gp);
        let rhs: Complex64 = (0..n).map(|j| dgp[j].get(i, j)).sum();
        trace_err = trace_err.max((div - tt).norm());
        grad_err = grad_err.max((grad_tr - rhs).norm());
        torsion_trace.push([tt.re, tt.im]);
        divergence.push([div.re, div.im]);
    }
    let tt_max = torsion_trace.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max);
    Ok(BalancedCheck {
        holds: tt_max <= 1e-12 && trace_err <= 1e-12 && grad_err <= 1e-12,
        torsion_trace,
        divergence,
        trace_identity_error: trace_err,
        gradient_identity_error: grad_err,
    })
}

fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random Hermitian matrix with entries in the unit box.
pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> Mat {
    let a = Mat::from_fn(n, |_, _| random_complex(rng));
    (a + a.adjoint()).scale(0.5)
}

/// Random positive definite matrix `A A^* + shift I`.
pub fn random_positive<R: Rng>(n: usize, rng: &mut R, shift: f64) -> Mat {
    let a = Mat::from_fn(n, |_, _| random_complex(rng));
    a * a.adjoint() + Mat::identity(n).scale(shift)
}

pub fn random_jet<R: Rng>(n: usize, rng: &mut R) -> MetricJet {
    MetricJet {
        g0: random_positive(n, rng, 0.5),
        dg: (0..n).map(|_| Mat::from_fn(n, |_, _| random_complex(rng))).collect(),
        hess_phi: random_hermitian(n, rng),
    }
}

fn mat_json(m: &Mat) -> serde_json::Value {
    let n = m.order();
    (0..n)
        .map(|i| (0..n).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .into()
}

impl MetricJet {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "g0": mat_json(&self.g0),
            "dg": self.dg.iter().map(mat_json).collect::<Vec<_>>(),
            "hess_phi": mat_json(&self.hess_phi),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckCount {
    pub passed: usize,
    pub failed: usize,
    /// Smallest slack (or largest negated error) seen.
    pub worst: f64,
}

impl CheckCount {
    fn record(&mut self, ok: bool, score: f64) {
        if self.passed + self.failed == 0 || score < self.worst {
            self.worst = score;
        }
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub seed: u64,
    pub instances: usize,
    pub trace_inequality: CheckCount,
    pub n2_identity: CheckCount,
    pub cs_chain: CheckCount,
    pub normal_coordinates: CheckCount,
    pub balanced_coordinates: CheckCount,
}

impl FuzzSummary {
    pub fn failures(&self) -> usize {
        self.trace_inequality.failed
            + self.n2_identity.failed
            + self.cs_chain.failed
            + self.normal_coordinates.failed
            + self.balanced_coordinates.failed
    }
}

/// Project `dg` so that `sum_j d_j g_{i jbar} = 0` while keeping
/// `d_j g_{i ibar} = 0`.
pub fn project_balanced(jet: &mut MetricJet) {
    let n = jet.dim();
    for i in 0..n {
        let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| jet.dg[j].get(i, j)).sum();
        let corr = s / (n as f64 - 1.0);
        for j in (0..n).filter(|&j| j != i) {
            let v = jet.dg[j].get(i, j) - corr;
            jet.dg[j].set(i, j, v);
        }
    }
}

/// Random third derivatives `phi3[k](i, j)` symmetric in `(k, i)`.
pub fn random_phi3<R: Rng>(n: usize, rng: &mut R) -> Vec<Mat> {
    let mut t = vec![Mat::zeros(n); n];
    for k in 0..n {
        for i in k..n {
            for j in 0..n {
                let z = random_complex(rng);
                t[k].set(i, j, z);
                t[i].set(k, j, z);
            }
        }
    }
    t
}

/// Seeded fuzzing of every pointwise check. Each instance draws its
/// dimension from `{2, 3}`. Failing instances are written as JSON files
/// under `dump_dir` when given.
pub fn fuzz(seed: u64, instances: usize, dump_dir: Option<&Path>) -> Result<FuzzSummary> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = FuzzSummary {
        seed,
        instances,
        ..FuzzSummary::default()
    };
    let dump = |name: &str, idx: usize, value: serde_json::Value| -> Result<()> {
        if let Some(dir) = dump_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("failure_{name}_{idx}.json"));
            let text = serde_json::to_string_pretty(&value).expect("json");
            crate::io::write_atomic(&path, text.as_bytes())?;
        }
        Ok(())
    };
    for idx in 0..instances {
        let n = if rng.random_bool(0.5) { 2 } else { 3 };
        let g = random_positive(n, &mut rng, 0.2);
        let gp = random_positive(n, &mut rng, 0.2);
        let m = trace_inequality(&g, &gp)?;
        let ok = m.holds(1e-12);
        s.trace_inequality.record(ok, m.slack);
        if !ok {
            dump("trace_inequality", idx, serde_json::json!({"g": mat_json(&g), "gprime": mat_json(&gp)}))?;
        }
        if n == 2 {
            let e = n2_identity_error(&g, &gp)?;
            s.n2_identity.record(e <= 1e-12, -e);
            if e > 1e-12 {
                dump("n2_identity", idx, serde_json::json!({"g": mat_json(&g), "gprime": mat_json(&gp)}))?;
            }
        }

        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..5.0)).collect();
        let dgp: Vec<Mat> = (0..n).map(|_| Mat::from_fn(n, |_, _| random_complex(&mut rng))).collect();
        let cs = check_cs_chain(&lambda, &dgp)?;
        s.cs_chain.record(cs.holds(1e-12), cs.slack);
        if !cs.holds(1e-12) {
            dump(
                "cs_chain",
                idx,
                serde_json::json!({"lambda": lambda, "dgprime": dgp.iter().map(mat_json).collect::<Vec<_>>()}),
            )?;
        }

        let jet = random_jet(n, &mut rng);
        let change = normal_coordinates(&jet)?;
        let t = change.apply(&jet);
        let (a, b, c) = t.gauge_defects();
        let worst = a.max(b).max(c);
        s.normal_coordinates.record(worst <= 1e-12, -worst);
        if worst > 1e-12 {
            dump("normal_coordinates", idx, jet.to_json())?;
        }

        let mut bal = t.clone();
        project_balanced(&mut bal);
        let phi3 = random_phi3(n, &mut rng);
        let chk = check_balanced_coords(&bal, &phi3)?;
        let err = chk.trace_identity_error.max(chk.gradient_identity_error);
        s.balanced_coordinates.record(chk.holds, -err);
        if !chk.holds {
            dump("balanced_coordinates", idx, bal.to_json())?;
        }
    }
    Ok(s)
}
