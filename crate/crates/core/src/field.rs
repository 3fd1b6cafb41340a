//! Scalar and Hermitian-matrix fields sampled on a [`Grid`].

use crate::error::{Error, Result};
use crate::grid::{Coords, Grid};
use crate::mat::Mat;
use crate::par;
use num_complex::Complex64;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Real function on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

/// Complex function on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

/// Field of `n x n` Hermitian matrices, stored point-major with row-major
/// matrix entries innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} samples", grid.len()),
                found: format!("{} samples", values.len()),
            });
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Coords) -> f64 + Sync + Send) -> Self {
        let values = par::collect(grid.len(), |p| f(&grid.coords(p)));
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> ScalarField {
        let v = &self.values;
        ScalarField {
            grid: self.grid.clone(),
            values: par::collect(v.len(), |i| f(v[i])),
        }
    }

    pub fn zip_map(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64 + Sync + Send,
    ) -> Result<ScalarField> {
        self.same_grid(&other.grid)?;
        let (a, b) = (&self.values, &other.values);
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: par::collect(a.len(), |i| f(a[i], b[i])),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|a| s * a)
    }

    pub fn shift(&self, c: f64) -> ScalarField {
        self.map(|a| a + c)
    }

    pub fn sup(&self) -> f64 {
        self.argmax().0
    }

    pub fn inf(&self) -> f64 {
        self.argmin().0
    }

    pub fn argmax(&self) -> (f64, usize) {
        let v = &self.values;
        par::argmax(v.len(), |i| v[i])
    }

    pub fn argmin(&self) -> (f64, usize) {
        let v = &self.values;
        par::argmin(v.len(), |i| v[i])
    }

    pub fn sup_abs(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i].abs())
    }

    /// Plain grid average (Lebesgue measure of the flat torus).
    pub fn mean(&self) -> f64 {
        let v = &self.values;
        par::sum(v.len(), |i| v[i]) / v.len() as f64
    }

    pub fn is_constant(&self) -> bool {
        let c = self.values[0];
        self.values.iter().all(|&v| v == c)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub(crate) fn same_grid(&self, grid: &Grid) -> Result<()> {
        if &self.grid == grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `d f / dz^j = (d/dx^j - i d/dy^j) / 2`.
    pub fn d_holo(&self, j: usize) -> Result<ComplexField> {
        self.to_complex().d_holo(j)
    }

    /// `d f / dzbar^j = (d/dx^j + i d/dy^j) / 2`.
    pub fn d_antiholo(&self, j: usize) -> Result<ComplexField> {
        self.to_complex().d_antiholo(j)
    }

    /// Complex Hessian `(d_i d_jbar f)`, Hermitian by construction.
    pub fn ddbar(&self) -> HermitianField {
        let grid = &self.grid;
        let n = grid.dim();
        if self.is_constant() {
            return HermitianField::zeros(grid);
        }
        let spec = grid.spectrum_of(&self.values);
        let mut entries: Vec<Vec<Complex64>> = vec![Vec::new(); n * n];
        // Diagonal entries are real: transform two at a time as re/im parts.
        let diag: Vec<usize> = (0..n).collect();
        for pair in diag.chunks(2) {
            let k = pair[0];
            let l = pair.get(1).copied();
            let out = grid.apply_symbol(&spec, |b| {
                let mut s = grid.ddbar_symbol(k, k, b);
                if let Some(l) = l {
                    s += Complex64::i() * grid.ddbar_symbol(l, l, b);
                }
                s
            });
            entries[k * n + k] = out.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
            if let Some(l) = l {
                entries[l * n + l] = out.iter().map(|z| Complex64::new(z.im, 0.0)).collect();
            }
        }
        for k in 0..n {
            for l in (k + 1)..n {
                let out = grid.apply_symbol(&spec, |b| grid.ddbar_symbol(k, l, b));
                entries[l * n + k] = out.iter().map(|z| z.conj()).collect();
                entries[k * n + l] = out;
            }
        }
        let nn = n * n;
        let mut data = vec![C0; grid.len() * nn];
        par::for_each_chunk_mut(&mut data, nn, |p, m| {
            for (e, slot) in m.iter_mut().enumerate() {
                *slot = entries[e][p];
            }
        });
        HermitianField {
            grid: grid.clone(),
            data,
        }
    }
}

impl ComplexField {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} samples", grid.len()),
                found: format!("{} samples", values.len()),
            });
        }
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Coords) -> Complex64 + Sync + Send) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: par::collect(grid.len(), |p| f(&grid.coords(p))),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z.im).collect(),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i].norm())
    }

    fn differentiate(&self, j: usize, holo: bool) -> Result<ComplexField> {
        let grid = &self.grid;
        grid.check_axis(j)?;
        let c = self.values[0];
        if self.values.iter().all(|&v| v == c) {
            return Ok(ComplexField {
                grid: grid.clone(),
                values: vec![C0; grid.len()],
            });
        }
        let mut spec = self.values.clone();
        grid.forward(&mut spec);
        let values = grid.apply_symbol(&spec, |b| {
            if holo {
                grid.holo_symbol(j, b)
            } else {
                grid.antiholo_symbol(j, b)
            }
        });
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn d_holo(&self, j: usize) -> Result<ComplexField> {
        self.differentiate(j, true)
    }

    pub fn d_antiholo(&self, j: usize) -> Result<ComplexField> {
        self.differentiate(j, false)
    }
}

impl HermitianField {
    /// Wrap raw point-major data, checking Hermitian symmetry to `1e-13` relative.
    pub fn new(grid: &Grid, data: Vec<Complex64>) -> Result<Self> {
        let nn = grid.dim() * grid.dim();
        if data.len() != grid.len() * nn {
            return Err(Error::ShapeMismatch {
                expected: format!("{} matrix entries", grid.len() * nn),
                found: format!("{} matrix entries", data.len()),
            });
        }
        let field = HermitianField {
            grid: grid.clone(),
            data,
        };
        let (asym, point) = par::argmax(grid.len(), |p| {
            let m = field.at(p);
            m.hermitian_defect() / m.max_abs().max(1.0)
        });
        if asym > 1e-13 {
            return Err(Error::NotHermitian {
                point,
                asymmetry: asym,
            });
        }
        Ok(field)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&Coords) -> Mat + Sync + Send) -> Result<Self> {
        let n = grid.dim();
        let mut data = vec![C0; grid.len() * n * n];
        par::for_each_chunk_mut(&mut data, n * n, |p, m| {
            let a = f(&grid.coords(p));
            assert_eq!(a.order(), n, "matrix order does not match grid dimension");
            m.copy_from_slice(a.as_slice());
        });
        HermitianField::new(grid, data)
    }

    /// Per-point map producing Hermitian output (not re-validated).
    pub(crate) fn map_points(grid: &Grid, f: impl Fn(usize) -> Mat + Sync + Send) -> Self {
        let n = grid.dim();
        let mut data = vec![C0; grid.len() * n * n];
        par::for_each_chunk_mut(&mut data, n * n, |p, m| m.copy_from_slice(f(p).as_slice()));
        HermitianField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.dim();
        HermitianField {
            grid: grid.clone(),
            data: vec![C0; grid.len() * n * n],
        }
    }

    pub fn identity(grid: &Grid) -> Self {
        let n = grid.dim();
        Self::map_points(grid, |_| Mat::identity(n))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, p: usize) -> Mat {
        let nn = self.dim() * self.dim();
        Mat::from_slice(self.dim(), &self.data[p * nn..(p + 1) * nn])
    }

    /// Entry `(i, j)` as a complex field.
    pub fn entry(&self, i: usize, j: usize) -> ComplexField {
        let n = self.dim();
        let nn = n * n;
        ComplexField {
            grid: self.grid.clone(),
            values: (0..self.grid.len()).map(|p| self.data[p * nn + i * n + j]).collect(),
        }
    }

    fn zip(&self, other: &HermitianField, f: impl Fn(Mat, Mat) -> Mat + Sync + Send) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::map_points(&self.grid, |p| f(self.at(p), other.at(p))))
    }

    pub fn add(&self, other: &HermitianField) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &HermitianField) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::map_points(&self.grid, |p| self.at(p).scale(s))
    }

    /// Pointwise product with a real function.
    pub fn scale_by(&self, f: &ScalarField) -> Result<Self> {
        f.same_grid(&self.grid)?;
        let v = f.values();
        Ok(Self::map_points(&self.grid, |p| self.at(p).scale(v[p])))
    }

    /// Largest absolute coefficient over all points and entries.
    pub fn sup_norm(&self) -> f64 {
        let d = &self.data;
        par::max(d.len(), |i| d[i].norm())
    }

    /// Pointwise `tr(A(p) * B(p))` (real part).
    pub fn trace_prod_field(&self, other: &HermitianField) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: par::collect(self.grid.len(), |p| self.at(p).trace_prod(&other.at(p)).re),
        })
    }
}

/// A positive-definite Hermitian field with cached per-point inverse,
/// determinant and cofactor matrices.
#[derive(Clone, Debug)]
pub struct Metric {
    field: HermitianField,
    inv: Vec<Complex64>,
    cof: Vec<Complex64>,
    det: Vec<f64>,
    min_eig: f64,
}

impl Metric {
    pub fn new(field: HermitianField) -> Result<Metric> {
        let grid = field.grid.clone();
        let n = grid.dim();
        let nn = n * n;
        let (min_eig, point) = par::argmin(grid.len(), |p| field.at(p).herm_min_eigenvalue());
        if !(min_eig > 0.0) {
            return Err(Error::NotPositive {
                point,
                eigenvalue: min_eig,
            });
        }
        let mut inv = vec![C0; grid.len() * nn];
        let mut cof = vec![C0; grid.len() * nn];
        par::for_each_chunk_mut(&mut inv, nn, |p, m| {
            // positive definite, so invertible
            m.copy_from_slice(field.at(p).inverse().expect("positive matrix").as_slice())
        });
        par::for_each_chunk_mut(&mut cof, nn, |p, m| {
            m.copy_from_slice(field.at(p).cofactor().as_slice())
        });
        let det = par::collect(grid.len(), |p| field.at(p).det().re);
        Ok(Metric {
            field,
            inv,
            cof,
            det,
            min_eig,
        })
    }

    pub fn flat(grid: &Grid) -> Metric {
        Metric::new(HermitianField::identity(grid)).expect("identity is positive")
    }

    pub fn grid(&self) -> &Grid {
        &self.field.grid
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn field(&self) -> &HermitianField {
        &self.field
    }

    pub fn into_field(self) -> HermitianField {
        self.field
    }

    #[inline]
    pub fn at(&self, p: usize) -> Mat {
        self.field.at(p)
    }

    #[inline]
    pub fn inv_at(&self, p: usize) -> Mat {
        let n = self.dim();
        Mat::from_slice(n, &self.inv[p * n * n..(p + 1) * n * n])
    }

    #[inline]
    pub fn cof_at(&self, p: usize) -> Mat {
        let n = self.dim();
        Mat::from_slice(n, &self.cof[p * n * n..(p + 1) * n * n])
    }

    #[inline]
    pub fn det_at(&self, p: usize) -> f64 {
        self.det[p]
    }

    pub fn det(&self) -> ScalarField {
        ScalarField {
            grid: self.grid().clone(),
            values: self.det.clone(),
        }
    }

    pub fn log_det(&self) -> ScalarField {
        ScalarField {
            grid: self.grid().clone(),
            values: self.det.iter().map(|d| d.ln()).collect(),
        }
    }

    /// Smallest eigenvalue over all grid points.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eig
    }

    /// Pointwise `tr(G^{-1} A)` for a Hermitian field `A`, i.e. the trace of a
    /// real (1,1)-form with respect to this metric.
    pub fn trace_of(&self, a: &HermitianField) -> Result<ScalarField> {
        if self.grid() != a.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: self.grid().clone(),
            values: par::collect(self.grid().len(), |p| self.inv_at(p).trace_prod(&a.at(p)).re),
        })
    }

    /// The probability measure `dmu = omega^n / int omega^n` as grid weights.
    pub fn probability_weights(&self) -> Vec<f64> {
        let total = par::sum(self.det.len(), |i| self.det[i]);
        self.det.iter().map(|d| d / total).collect()
    }
}

/// `int f omega^n`, normalised so the flat identity metric has volume 1:
/// the grid mean of `f * det g`.
pub fn integrate(f: &ScalarField, g: &Metric) -> Result<f64> {
    f.same_grid(g.grid())?;
    let v = f.values();
    Ok(par::sum(v.len(), |p| v[p] * g.det_at(p)) / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn grid2(n: usize) -> Grid {
        Grid::new(GridSpec::fourier(2, n)).unwrap()
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let g = grid2(8);
        let one = ScalarField::constant(&g, 1.0);
        assert!(one.d_holo(0).unwrap().values().iter().all(|z| *z == C0));
        assert!(one.ddbar().data().iter().all(|z| *z == C0));
    }

    #[test]
    fn d_holo_of_cos_x1() {
        let g = grid2(8);
        let f = ScalarField::from_fn(&g, |c| (2.0 * PI * c.x[0]).cos());
        let d = f.d_holo(0).unwrap();
        for p in 0..g.len() {
            let c = g.coords(p);
            let want = Complex64::new(-PI * (2.0 * PI * c.x[0]).sin(), 0.0);
            assert!((d.values()[p] - want).norm() < 1e-12);
        }
        assert!(f.d_holo(1).unwrap().sup_abs() < 1e-12);
    }

    #[test]
    fn d_holo_of_sin_y1() {
        let g = grid2(8);
        let f = ScalarField::from_fn(&g, |c| (2.0 * PI * c.y[0]).sin());
        let d = f.d_holo(0).unwrap();
        let dbar = f.d_antiholo(0).unwrap();
        for p in 0..g.len() {
            let c = g.coords(p);
            let cosy = (2.0 * PI * c.y[0]).cos();
            assert!((d.values()[p] - Complex64::new(0.0, -PI * cosy)).norm() < 1e-12);
            assert!((dbar.values()[p] - Complex64::new(0.0, PI * cosy)).norm() < 1e-12);
        }
    }

    #[test]
    fn axis_out_of_range_is_reported() {
        let g = grid2(8);
        let f = ScalarField::zeros(&g);
        assert!(matches!(f.d_holo(2), Err(Error::AxisOutOfRange { axis: 2, dim: 2 })));
    }

    #[test]
    fn ddbar_of_cos_x1() {
        let g = grid2(8);
        let f = ScalarField::from_fn(&g, |c| (2.0 * PI * c.x[0]).cos());
        let h = f.ddbar();
        for p in 0..g.len() {
            let c = g.coords(p);
            let m = h.at(p);
            let want = -PI * PI * (2.0 * PI * c.x[0]).cos();
            assert!((m.get(0, 0) - Complex64::new(want, 0.0)).norm() < 1e-11);
            assert!(m.get(0, 1).norm() < 1e-12);
            assert!(m.get(1, 0).norm() < 1e-12);
            assert!(m.get(1, 1).norm() < 1e-12);
        }
    }

    #[test]
    fn ddbar_mixed_entry_matches_closed_form() {
        // f = cos(2 pi (x1 + y2)): d_1 d_2bar f = (1/4)(d_x1)(i d_y2) f = -(i/4)(2pi)^2 cos(...)
        let g = grid2(8);
        let f = ScalarField::from_fn(&g, |c| (2.0 * PI * (c.x[0] + c.y[1])).cos());
        let h = f.ddbar();
        for p in 0..g.len() {
            let c = g.coords(p);
            let cs = (2.0 * PI * (c.x[0] + c.y[1])).cos();
            let want = Complex64::new(0.0, -PI * PI * cs);
            assert!((h.at(p).get(0, 1) - want).norm() < 1e-11);
            assert!((h.at(p).get(1, 0) - want.conj()).norm() < 1e-11);
        }
    }

    #[test]
    fn integrate_normalisation() {
        let g = grid2(8);
        let flat = Metric::flat(&g);
        let one = ScalarField::constant(&g, 1.0);
        assert_abs_diff_eq!(integrate(&one, &flat).unwrap(), 1.0, epsilon = 1e-15);
        let cosx = ScalarField::from_fn(&g, |c| (2.0 * PI * c.x[0]).cos());
        assert_abs_diff_eq!(integrate(&cosx, &flat).unwrap(), 0.0, epsilon = 1e-14);
        let two = Metric::new(HermitianField::identity(&g).scale(2.0)).unwrap();
        assert_abs_diff_eq!(integrate(&one, &two).unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn metric_rejects_indefinite_field() {
        let g = grid2(8);
        let bad = HermitianField::from_fn(&g, |c| {
            Mat::from_real_diag(&[1.0, (2.0 * PI * c.x[1]).cos()])
        })
        .unwrap();
        assert!(matches!(Metric::new(bad), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn hermitian_check_rejects_asymmetric_data() {
        let g = grid2(8);
        let mut data = HermitianField::identity(&g).data().to_vec();
        data[1] = Complex64::new(0.5, 0.0);
        assert!(matches!(HermitianField::new(&g, data), Err(Error::NotHermitian { point: 0, .. })));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = ScalarField::zeros(&grid2(8));
        let b = ScalarField::zeros(&grid2(10));
        assert!(matches!(a.add(&b), Err(Error::GridMismatch)));
    }
}
