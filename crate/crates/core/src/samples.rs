//! Seeded generators of smooth periodic test data.

use crate::error::Result;
use crate::field::{HermitianField, Metric, ScalarField};
use crate::grid::Grid;
use crate::mat::Mat;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

/// One Fourier mode `a * cos(2 pi k . x + phase)` over the real axes.
#[derive(Clone, Debug)]
struct Mode {
    k: [f64; 6],
    a: f64,
    phase: f64,
}

fn eval(modes: &[Mode], grid: &Grid, p: usize) -> f64 {
    let c = grid.coords(p);
    let pos = [c.x[0], c.y[0], c.x[1], c.y[1], c.x[2], c.y[2]];
    modes
        .iter()
        .map(|m| {
            let arg: f64 = m.k.iter().zip(&pos).map(|(k, x)| k * x).sum();
            m.a * (2.0 * PI * arg + m.phase).cos()
        })
        .sum()
}

/// Random trigonometric polynomial with `modes` terms, wavenumbers in
/// `[-max_freq, max_freq]` and zero mean, rescaled so `sup |f| = amplitude`.
pub fn random_trig_field<R: Rng>(
    grid: &Grid,
    rng: &mut R,
    modes: usize,
    max_freq: i64,
    amplitude: f64,
) -> ScalarField {
    let dims = grid.real_dims();
    let mut list = Vec::with_capacity(modes);
    while list.len() < modes {
        let mut k = [0.0; 6];
        for slot in k.iter_mut().take(dims) {
            *slot = rng.random_range(-max_freq..=max_freq) as f64;
        }
        if k.iter().all(|&x| x == 0.0) {
            continue;
        }
        list.push(Mode {
            k,
            a: rng.random_range(-1.0..1.0),
            phase: rng.random_range(0.0..2.0 * PI),
        });
    }
    let f = ScalarField::new(grid, crate::par::collect(grid.len(), |p| eval(&list, grid, p)))
        .expect("same grid");
    let s = f.sup_abs();
    if s == 0.0 {
        f
    } else {
        f.scale(amplitude / s)
    }
}

/// Random smooth non-Kähler metric: a diagonal conformal part plus a small
/// off-diagonal perturbation. Positive whenever `amplitude <= 0.4`.
pub fn random_metric<R: Rng>(grid: &Grid, rng: &mut R, amplitude: f64) -> Result<Metric> {
    let n = grid.dim();
    let diag: Vec<ScalarField> = (0..n)
        .map(|_| random_trig_field(grid, rng, 3, 1, amplitude))
        .collect();
    let mut off = Vec::new();
    for _ in 0..n * (n - 1) / 2 {
        let re = random_trig_field(grid, rng, 2, 1, 0.5 * amplitude);
        let im = random_trig_field(grid, rng, 2, 1, 0.5 * amplitude);
        off.push((re, im));
    }
    let data: Vec<Complex64> = (0..grid.len())
        .flat_map(|p| {
            let mut m = Mat::zeros(n);
            for (i, d) in diag.iter().enumerate() {
                m.set(i, i, Complex64::new(d.values()[p].exp(), 0.0));
            }
            let mut e = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let z = Complex64::new(off[e].0.values()[p], off[e].1.values()[p]);
                    m.set(i, j, z);
                    m.set(j, i, z.conj());
                    e += 1;
                }
            }
            m.as_slice().to_vec()
        })
        .collect();
    Metric::new(HermitianField::new(grid, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trig_field_has_requested_amplitude_and_zero_mean() {
        let g = Grid::new(GridSpec::fourier(2, 8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_trig_field(&g, &mut rng, 4, 2, 0.7);
        assert!((f.sup_abs() - 0.7).abs() < 1e-14);
        assert!(f.mean().abs() < 1e-14);
    }

    #[test]
    fn random_metrics_are_positive_in_both_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2, 3] {
            let g = Grid::new(GridSpec::fourier(n, 8)).unwrap();
            let m = random_metric(&g, &mut rng, 0.4).unwrap();
            assert!(m.min_eigenvalue() > 0.0);
        }
    }
}
