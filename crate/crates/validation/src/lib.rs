//! Reference results computed without the Monte Carlo sampler.
//!
//! The lattice path integral of one uncoupled neuron on a periodic lattice
//! of `n` slices is `Tr K^n`, with the symmetric transfer kernel
//!
//! ```text
//! K(x, y) = exp(-(x - y)^2 / (2 dtau) - dtau (V(x) + V(y)) / 2)
//! ```
//!
//! Discretizing `x` on a uniform grid turns `K` into a dense symmetric
//! matrix, and the marginal density of any slice is `diag(K^n) / Tr(K^n)`.

use ndarray::Array2;

/// Uniform position grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub half_width: f64,
    pub points: usize,
}

impl Grid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| -self.half_width + i as f64 * h).collect()
    }
}

pub fn double_well(lambda: f64) -> impl Fn(f64) -> f64 {
    move |x| 0.25 * lambda * (x * x - 1.0).powi(2)
}

pub fn transfer_matrix(grid: &Grid, dtau: f64, potential: impl Fn(f64) -> f64) -> Array2<f64> {
    let xs = grid.nodes();
    let v: Vec<f64> = xs.iter().map(|&x| potential(x)).collect();
    let h = grid.spacing();
    Array2::from_shape_fn((xs.len(), xs.len()), |(i, j)| {
        let d = xs[i] - xs[j];
        h * (-d * d / (2.0 * dtau) - 0.5 * dtau * (v[i] + v[j])).exp()
    })
}

/// `m^n` by repeated squaring, rescaled after each product so that large
/// `n` neither overflows nor underflows. The overall scale is lost, which
/// is harmless for normalized expectations.
pub fn matrix_power(m: &Array2<f64>, mut n: usize) -> Array2<f64> {
    assert!(n > 0, "power must be positive");
    let rescale = |a: Array2<f64>| {
        let top = a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if top > 0.0 {
            a / top
        } else {
            a
        }
    };
    let mut base = rescale(m.clone());
    let mut acc: Option<Array2<f64>> = None;
    while n > 0 {
        if n & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => rescale(a.dot(&base)),
            });
        }
        n >>= 1;
        if n > 0 {
            base = rescale(base.dot(&base));
        }
    }
    acc.expect("n > 0")
}

/// Single-slice marginal on the grid nodes, summing to 1.
pub fn marginal(grid: &Grid, n_slices: usize, dtau: f64, potential: impl Fn(f64) -> f64) -> Vec<f64> {
    let p = matrix_power(&transfer_matrix(grid, dtau, potential), n_slices);
    let diag: Vec<f64> = p.diag().to_vec();
    let z: f64 = diag.iter().sum();
    diag.into_iter().map(|d| d / z).collect()
}

/// `<f(phi)>` on one slice of the periodic lattice.
pub fn expectation(
    grid: &Grid,
    n_slices: usize,
    dtau: f64,
    potential: impl Fn(f64) -> f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    grid.nodes()
        .into_iter()
        .zip(marginal(grid, n_slices, dtau, potential))
        .map(|(x, p)| f(x) * p)
        .sum()
}

/// Exact `<x^2>` for the harmonic lattice action
/// `sum (x_{j+1} - x_j)^2 / (2 dtau) + dtau omega^2 x_j^2 / 2` on a ring
/// of `n` slices, from its circulant normal modes.
pub fn harmonic_x2(n: usize, dtau: f64, omega: f64) -> f64 {
    (0..n)
        .map(|k| {
            let c = (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
            1.0 / ((2.0 - 2.0 * c) / dtau + dtau * omega * omega)
        })
        .sum::<f64>()
        / n as f64
}
