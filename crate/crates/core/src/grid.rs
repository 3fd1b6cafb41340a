//! Periodic collocation grid on the complex torus `C^n / (Z + iZ)^n`.
//!
//! Real axes are ordered `x^1, y^1, x^2, y^2, ...` with `z^j = x^j + i y^j`;
//! every axis has `N` points at `k / N`. Grid points are stored row-major
//! over that axis order (axis 0 slowest).
//!
//! Differentiation is a Fourier multiplier in both schemes. Fourier
//! collocation uses the exact wavenumbers; central differences use the
//! symbol of the periodic stencil. First-derivative symbols vanish at the
//! Nyquist bin; the pure second derivative keeps it, so the discrete
//! Laplacian has only the constants in its kernel.

use crate::error::{Error, Result};
use crate::par;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Differentiation scheme applied along every real axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    FourierCollocation,
    /// Central differences of even order 2, 4, 6 or 8.
    CentralDifference { order: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub complex_dim: usize,
    pub points_per_axis: usize,
    pub diff_scheme: DiffScheme,
}

impl GridSpec {
    pub fn fourier(complex_dim: usize, points_per_axis: usize) -> Self {
        GridSpec {
            complex_dim,
            points_per_axis,
            diff_scheme: DiffScheme::FourierCollocation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.complex_dim) {
            return Err(Error::InvalidGrid(format!(
                "complex dimension must be 2 or 3, got {}",
                self.complex_dim
            )));
        }
        let n = self.points_per_axis;
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {n}"
            )));
        }
        if let DiffScheme::CentralDifference { order } = self.diff_scheme {
            if !matches!(order, 2 | 4 | 6 | 8) {
                return Err(Error::InvalidGrid(format!(
                    "central difference order must be 2, 4, 6 or 8, got {order}"
                )));
            }
            if order >= n {
                return Err(Error::InvalidGrid(format!(
                    "stencil of order {order} does not fit {n} points"
                )));
            }
        }
        Ok(())
    }
}

/// Physical coordinates of a grid point: `z^j = x[j] + i y[j]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Coords {
    pub x: [f64; 3],
    pub y: [f64; 3],
}

struct GridInner {
    spec: GridSpec,
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// First-derivative symbol per 1-D bin.
    d1: Vec<Complex64>,
    /// Second-derivative symbol per 1-D bin.
    d2: Vec<f64>,
}

/// Shared handle to a grid and its transform plans. Cloning is cheap.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.inner.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.spec == other.inner.spec
    }
}

// Central-difference weights: first derivative `sum_p a_p (f_{+p} - f_{-p}) / h`,
// second derivative `(b_0 f_0 + sum_p b_p (f_{+p} + f_{-p})) / h^2`.
fn stencil(order: usize) -> (&'static [f64], &'static [f64]) {
    match order {
        2 => (&[0.5], &[-2.0, 1.0]),
        4 => (&[2.0 / 3.0, -1.0 / 12.0], &[-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0]),
        6 => (
            &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
            &[-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
        ),
        _ => (
            &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
            &[-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0],
        ),
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid> {
        spec.validate()?;
        let n = spec.points_per_axis;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let h = 1.0 / n as f64;
        let mut d1 = vec![Complex64::new(0.0, 0.0); n];
        let mut d2 = vec![0.0; n];
        for q in 0..n {
            let m = wavenumber(q, n) as f64;
            if q == 0 {
                continue;
            }
            match spec.diff_scheme {
                DiffScheme::FourierCollocation => {
                    if q != n / 2 {
                        d1[q] = Complex64::new(0.0, 2.0 * PI * m);
                    }
                    d2[q] = -(2.0 * PI * m).powi(2);
                }
                DiffScheme::CentralDifference { order } => {
                    let (a, b) = stencil(order);
                    let theta = 2.0 * PI * m / n as f64;
                    if q != n / 2 {
                        let s: f64 = a
                            .iter()
                            .enumerate()
                            .map(|(p, ap)| 2.0 * ap * ((p + 1) as f64 * theta).sin())
                            .sum();
                        d1[q] = Complex64::new(0.0, s / h);
                    }
                    let c: f64 = b[0]
                        + b[1..]
                            .iter()
                            .enumerate()
                            .map(|(p, bp)| 2.0 * bp * ((p + 1) as f64 * theta).cos())
                            .sum::<f64>();
                    d2[q] = c / (h * h);
                }
            }
        }
        Ok(Grid {
            inner: Arc::new(GridInner {
                spec,
                len: n.pow(2 * spec.complex_dim as u32),
                fwd,
                inv,
                d1,
                d2,
            }),
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.inner.spec
    }

    /// Complex dimension `n`.
    pub fn dim(&self) -> usize {
        self.inner.spec.complex_dim
    }

    /// Points per real axis `N`.
    pub fn points_per_axis(&self) -> usize {
        self.inner.spec.points_per_axis
    }

    /// Number of real axes, `2n`.
    pub fn real_dims(&self) -> usize {
        2 * self.dim()
    }

    /// Total number of grid points, `N^(2n)`.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    pub fn check_axis(&self, j: usize) -> Result<()> {
        if j >= self.dim() {
            Err(Error::AxisOutOfRange {
                axis: j,
                dim: self.dim(),
            })
        } else {
            Ok(())
        }
    }

    /// Per-axis bin indices of grid point (or Fourier mode) `p`.
    #[inline]
    pub fn bins(&self, mut p: usize) -> [usize; 6] {
        let n = self.points_per_axis();
        let d = self.real_dims();
        let mut out = [0usize; 6];
        for a in (0..d).rev() {
            out[a] = p % n;
            p /= n;
        }
        out
    }

    pub fn coords(&self, p: usize) -> Coords {
        let b = self.bins(p);
        let h = 1.0 / self.points_per_axis() as f64;
        let mut c = Coords::default();
        for j in 0..self.dim() {
            c.x[j] = b[2 * j] as f64 * h;
            c.y[j] = b[2 * j + 1] as f64 * h;
        }
        c
    }

    /// Signed wavenumbers of Fourier mode `p` along each real axis.
    pub fn wavenumbers(&self, p: usize) -> [i64; 6] {
        let n = self.points_per_axis();
        let b = self.bins(p);
        let mut out = [0i64; 6];
        for a in 0..self.real_dims() {
            out[a] = wavenumber(b[a], n);
        }
        out
    }

    /// Whether mode `bins` sits at the Nyquist bin of some axis.
    #[inline]
    pub fn is_nyquist(&self, bins: &[usize; 6]) -> bool {
        let n = self.points_per_axis();
        n.is_multiple_of(2) && bins[..self.real_dims()].contains(&(n / 2))
    }

    /// Symbol of `d/dz^j` at mode `p`.
    #[inline]
    pub fn holo_symbol(&self, j: usize, bins: &[usize; 6]) -> Complex64 {
        let g = &self.inner;
        0.5 * (g.d1[bins[2 * j]] - Complex64::i() * g.d1[bins[2 * j + 1]])
    }

    /// Symbol of `d/dzbar^j` at mode `p`.
    #[inline]
    pub fn antiholo_symbol(&self, j: usize, bins: &[usize; 6]) -> Complex64 {
        let g = &self.inner;
        0.5 * (g.d1[bins[2 * j]] + Complex64::i() * g.d1[bins[2 * j + 1]])
    }

    /// Symbol of `d^2 / dz^k dzbar^l` at mode `p`.
    #[inline]
    pub fn ddbar_symbol(&self, k: usize, l: usize, bins: &[usize; 6]) -> Complex64 {
        if k == l {
            let g = &self.inner;
            Complex64::new(0.25 * (g.d2[bins[2 * k]] + g.d2[bins[2 * k + 1]]), 0.0)
        } else {
            self.holo_symbol(k, bins) * self.antiholo_symbol(l, bins)
        }
    }

    /// Real symbol of the constant-coefficient operator `sum_kl c[k][l] d_k d_lbar`
    /// for a Hermitian coefficient matrix `c` (row-major, `n * n`).
    pub fn constant_operator_symbol(&self, c: &[Complex64]) -> Vec<f64> {
        let n = self.dim();
        par::collect(self.len(), |p| {
            let b = self.bins(p);
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += (c[k * n + l] * self.ddbar_symbol(k, l, &b)).re;
                }
            }
            s
        })
    }

    /// In-place forward DFT over all real axes.
    pub fn forward(&self, data: &mut Vec<Complex64>) {
        self.transform(data, &self.inner.fwd, 1.0);
    }

    /// In-place inverse DFT over all real axes, normalised so that
    /// `inverse(forward(x)) == x`.
    pub fn inverse(&self, data: &mut Vec<Complex64>) {
        self.transform(data, &self.inner.inv, 1.0 / self.len() as f64);
    }

    // Each pass transforms the contiguous last axis and then cyclically
    // rotates the axis order with a transpose; 2n passes restore the layout.
    fn transform(&self, data: &mut Vec<Complex64>, fft: &Arc<dyn Fft<f64>>, scale: f64) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        let n = self.points_per_axis();
        let rows = self.len() / n;
        let passes = self.real_dims();
        let lines_per_task = 64usize;
        let mut tmp = vec![Complex64::new(0.0, 0.0); self.len()];
        for pass in 0..passes {
            par::for_each_chunk_mut(data, n * lines_per_task, |_, chunk| {
                let mut scratch =
                    vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(chunk, &mut scratch);
            });
            let s = if pass + 1 == passes { scale } else { 1.0 };
            let src: &[Complex64] = data;
            par::for_each_chunk_mut(&mut tmp, rows, |c, out| {
                if s == 1.0 {
                    for (r, o) in out.iter_mut().enumerate() {
                        *o = src[r * n + c];
                    }
                } else {
                    for (r, o) in out.iter_mut().enumerate() {
                        *o = src[r * n + c] * s;
                    }
                }
            });
            std::mem::swap(data, &mut tmp);
        }
    }

    /// Forward transform of real samples.
    pub fn spectrum_of(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Multiply a spectrum pointwise by `symbol(bins)` and transform back.
    pub fn apply_symbol<S>(&self, spectrum: &[Complex64], symbol: S) -> Vec<Complex64>
    where
        S: Fn(&[usize; 6]) -> Complex64 + Sync + Send,
    {
        let mut buf = par::collect(self.len(), |p| spectrum[p] * symbol(&self.bins(p)));
        self.inverse(&mut buf);
        buf
    }
}

/// Signed wavenumber of DFT bin `q` on `n` points; the Nyquist bin maps to `-n/2`.
pub fn wavenumber(q: usize, n: usize) -> i64 {
    if q < n / 2 {
        q as i64
    } else {
        q as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_specs() {
        assert!(Grid::new(GridSpec::fourier(1, 8)).is_err());
        assert!(Grid::new(GridSpec::fourier(4, 8)).is_err());
        assert!(Grid::new(GridSpec::fourier(2, 6)).is_err());
        assert!(Grid::new(GridSpec::fourier(2, 9)).is_err());
        let fd = GridSpec {
            complex_dim: 2,
            points_per_axis: 8,
            diff_scheme: DiffScheme::CentralDifference { order: 3 },
        };
        assert!(Grid::new(fd).is_err());
    }

    #[test]
    fn len_and_coords() {
        let g = Grid::new(GridSpec::fourier(2, 8)).unwrap();
        assert_eq!(g.len(), 4096);
        let c = g.coords(1);
        assert_eq!(c.y[1], 1.0 / 8.0);
        assert_eq!(c.x[0], 0.0);
        let c = g.coords(8 * 8 * 8 * 3);
        assert_eq!(c.x[0], 3.0 / 8.0);
    }

    #[test]
    fn transform_round_trip() {
        let g = Grid::new(GridSpec::fourier(2, 8)).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = orig.clone();
        g.forward(&mut buf);
        g.inverse(&mut buf);
        let err = orig
            .iter()
            .zip(&buf)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn single_mode_lands_in_expected_bin() {
        let g = Grid::new(GridSpec::fourier(2, 8)).unwrap();
        // e^{2 pi i (x^1 - 2 y^2)}
        let mut buf: Vec<Complex64> = (0..g.len())
            .map(|p| {
                let c = g.coords(p);
                Complex64::from_polar(1.0, 2.0 * PI * (c.x[0] - 2.0 * c.y[1]))
            })
            .collect();
        g.forward(&mut buf);
        let (imax, vmax) = buf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(g.wavenumbers(imax)[..4], [1, 0, 0, -2]);
        assert!((vmax.norm() - g.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn central_difference_symbol_is_consistent_at_low_frequency() {
        let spec = GridSpec {
            complex_dim: 2,
            points_per_axis: 64,
            diff_scheme: DiffScheme::CentralDifference { order: 8 },
        };
        let g = Grid::new(spec).unwrap();
        let exact = -(2.0 * PI).powi(2);
        assert!((g.inner.d2[1] - exact).abs() / exact.abs() < 1e-9);
        assert!((g.inner.d1[1].im - 2.0 * PI).abs() < 1e-9);
        assert_eq!(g.inner.d1[32], Complex64::new(0.0, 0.0));
        assert!(g.inner.d2.iter().skip(1).all(|&s| s < 0.0));
    }
}
