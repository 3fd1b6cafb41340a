//! Fixed-capacity complex matrices of order 2 or 3 for per-point kernels.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix of order `n <= 3`, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    n: usize,
    a: [Complex64; 9],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "matrix order must be 1..=3");
        Mat { n, a: [ZERO; 9] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn from_slice(n: usize, s: &[Complex64]) -> Self {
        let mut m = Mat::zeros(n);
        m.a[..n * n].copy_from_slice(&s[..n * n]);
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.set(i, i, Complex64::new(x, 0.0));
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.a[..self.n * self.n]
    }

    pub fn adjoint(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j).conj())
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j) * s)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_prod(&self, other: &Mat) -> Complex64 {
        let n = self.n;
        let mut t = ZERO;
        for i in 0..n {
            for k in 0..n {
                t += self.get(i, k) * other.get(k, i);
            }
        }
        t
    }

    pub fn det(&self) -> Complex64 {
        let g = |i, j| self.get(i, j);
        match self.n {
            1 => g(0, 0),
            2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
            _ => {
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                    - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                    + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
            }
        }
    }

    /// Cofactor matrix: `cof[i][j] = (-1)^(i+j) * minor(i, j)`, so `cof = det * inv^T`.
    pub fn cofactor(&self) -> Mat {
        let g = |i, j| self.get(i, j);
        match self.n {
            1 => Mat::identity(1),
            2 => {
                let mut c = Mat::zeros(2);
                c.set(0, 0, g(1, 1));
                c.set(0, 1, -g(1, 0));
                c.set(1, 0, -g(0, 1));
                c.set(1, 1, g(0, 0));
                c
            }
            _ => Mat::from_fn(3, |i, j| {
                let (r0, r1) = others(i);
                let (c0, c1) = others(j);
                let minor = g(r0, c0) * g(r1, c1) - g(r0, c1) * g(r1, c0);
                if (i + j) % 2 == 0 {
                    minor
                } else {
                    -minor
                }
            }),
        }
    }

    pub fn inverse(&self) -> Option<Mat> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let cof = self.cofactor();
        let inv_d = d.inv();
        Some(Mat::from_fn(self.n, |i, j| cof.get(j, i) * inv_d))
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Eigenvalues of a Hermitian matrix in ascending order (unused slots are NaN).
    pub fn herm_eigenvalues(&self) -> [f64; 3] {
        let re = |i: usize| self.get(i, i).re;
        match self.n {
            1 => [re(0), f64::NAN, f64::NAN],
            2 => {
                let mean = 0.5 * (re(0) + re(1));
                let half = 0.5 * (re(0) - re(1));
                let r = (half * half + self.get(0, 1).norm_sqr()).sqrt();
                [mean - r, mean + r, f64::NAN]
            }
            _ => {
                let p1 = self.get(0, 1).norm_sqr()
                    + self.get(0, 2).norm_sqr()
                    + self.get(1, 2).norm_sqr();
                let q = (re(0) + re(1) + re(2)) / 3.0;
                let p2 = (re(0) - q).powi(2) + (re(1) - q).powi(2) + (re(2) - q).powi(2) + 2.0 * p1;
                if p2 == 0.0 {
                    return [q, q, q];
                }
                let p = (p2 / 6.0).sqrt();
                let b = Mat::from_fn(3, |i, j| {
                    let shift = if i == j { q } else { 0.0 };
                    (self.get(i, j) - shift) / p
                });
                let r = (0.5 * b.det().re).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let hi = q + 2.0 * p * phi.cos();
                let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
                let mid = 3.0 * q - hi - lo;
                [lo, mid, hi]
            }
        }
    }

    pub fn herm_min_eigenvalue(&self) -> f64 {
        self.herm_eigenvalues()[0]
    }
}

fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(self, o: Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j) + o.get(i, j))
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(self, o: Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j) - o.get(i, j))
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, o: Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| (0..self.n).map(|k| self.get(i, k) * o.get(k, j)).sum())
    }
}
