//! Uniform grids, grid functions and the discrete Fourier transform.
//!
//! Convention: `F f(k) = (1/n) Σ_j f(x_j) exp(-2πi k j / n)`, modes indexed by
//! `k ∈ {-⌊n/2⌋, …, ⌈n/2⌉-1}`. The inverse is the plain sum over modes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grids do not match: {0}")]
    Mismatch(String),
    #[error("non-real reconstruction: spectrum violates conjugate symmetry by {0:.3e}")]
    NonRealReconstruction(f64),
    #[error("degenerate reference: truth has zero L1 norm")]
    DegenerateReference,
}

/// `n` equispaced nodes `x_j = origin + period * j / n` on a periodic interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub period: f64,
    #[serde(default)]
    pub origin: f64,
}

impl Grid {
    pub fn new(n: usize, period: f64) -> Result<Self, GridError> {
        if n == 0 {
            return Err(GridError::InvalidGrid("n must be at least 1".into()));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(GridError::InvalidGrid(format!("period {period} must be positive")));
        }
        Ok(Self { n, period, origin: 0.0 })
    }

    /// Grid on `[0, 2π)`.
    pub fn periodic(n: usize) -> Result<Self, GridError> {
        Self::new(n, 2.0 * PI)
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.origin + self.period * j as f64 / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Lowest and one-past-highest mode index.
    pub fn mode_range(&self) -> (i64, i64) {
        let n = self.n as i64;
        (-(n / 2), n - n / 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n {
            return Err(GridError::Mismatch(format!(
                "{} values on a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n] }
    }
}

/// Fourier coefficients stored in FFT order (index `k mod n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub coeffs: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    fn slot(&self, k: i64) -> usize {
        let n = self.coeffs.len() as i64;
        k.rem_euclid(n) as usize
    }

    /// Coefficient of mode `k`; any integer is reduced modulo `n`.
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs[self.slot(k)]
    }

    pub fn set(&mut self, k: i64, value: Complex64) {
        let s = self.slot(k);
        self.coeffs[s] = value;
    }

    /// `(k, c_k)` pairs over the symmetric mode range.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.coeffs.len() as i64;
        (-(n / 2)..n - n / 2).map(move |k| (k, self.coeff(k)))
    }

    /// Zero every mode with `|k| > k_max`.
    pub fn truncate(&mut self, k_max: usize) {
        let n = self.coeffs.len() as i64;
        for k in -(n / 2)..n - n / 2 {
            if k.unsigned_abs() as usize > k_max {
                self.set(k, Complex64::new(0.0, 0.0));
            }
        }
    }
}

/// In-place iterative radix-2 FFT without normalisation.
/// `sign = -1.0` gives `Σ x_j e^{-2πijk/n}`, `+1.0` the conjugate transform.
pub fn fft_radix2(data: &mut [Complex64], sign: f64) {
    let n = data.len();
    assert!(n.is_power_of_two(), "radix-2 FFT needs a power-of-two length");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        let twiddles: Vec<Complex64> =
            (0..half).map(|q| Complex64::from_polar(1.0, step * q as f64)).collect();
        for start in (0..n).step_by(len) {
            for q in 0..half {
                let a = data[start + q];
                let b = data[start + q + half] * twiddles[q];
                data[start + q] = a + b;
                data[start + q + half] = a - b;
            }
        }
        len *= 2;
    }
}

/// Direct `O(n²)` transform with the same sign convention as [`fft_radix2`].
pub fn dft_direct(data: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = data.len();
    let table: Vec<Complex64> = (0..n)
        .map(|m| Complex64::from_polar(1.0, sign * 2.0 * PI * m as f64 / n as f64))
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, x) in data.iter().enumerate() {
                acc += x * table[(j * k) % n];
            }
            acc
        })
        .collect()
}

fn transform(data: &mut Vec<Complex64>, sign: f64) {
    if data.len().is_power_of_two() {
        fft_radix2(data, sign);
    } else {
        *data = dft_direct(data, sign);
    }
}

/// Forward transform of raw samples.
pub fn dft_values(values: &[f64]) -> ComplexSpectrum {
    let n = values.len() as f64;
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut data, -1.0);
    for c in &mut data {
        *c /= n;
    }
    ComplexSpectrum { coeffs: data }
}

pub fn dft(f: &GridFunction) -> ComplexSpectrum {
    dft_values(&f.values)
}

/// Largest violation of `c_{-k} = conj(c_k)`, relative to the largest coefficient.
pub fn symmetry_defect(spec: &ComplexSpectrum) -> f64 {
    let n = spec.n() as i64;
    let scale = spec.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    (0..n)
        .map(|k| (spec.coeff(k) - spec.coeff(-k).conj()).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Tolerance on the conjugate-symmetry defect accepted by [`idft`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Inverse transform; fails on spectra that do not describe a real function.
pub fn idft(spec: &ComplexSpectrum, grid: Grid) -> Result<GridFunction, GridError> {
    if spec.n() != grid.n {
        return Err(GridError::Mismatch(format!(
            "spectrum of length {} on a grid of {} nodes",
            spec.n(),
            grid.n
        )));
    }
    let defect = symmetry_defect(spec);
    if defect > SYMMETRY_TOL {
        return Err(GridError::NonRealReconstruction(defect));
    }
    let mut data = spec.coeffs.clone();
    transform(&mut data, 1.0);
    Ok(GridFunction { grid, values: data.iter().map(|c| c.re).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

/// Left-rectangle-rule norm on the grid.
pub fn norm(f: &GridFunction, kind: NormKind) -> f64 {
    norm_values(&f.values, f.grid.dx(), kind)
}

pub fn norm_values(values: &[f64], dx: f64, kind: NormKind) -> f64 {
    match kind {
        NormKind::L1 => dx * values.iter().map(|v| v.abs()).sum::<f64>(),
        NormKind::L2 => (dx * values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
        NormKind::Linf => values.iter().map(|v| v.abs()).fold(0.0, f64::max),
    }
}

/// `‖pred − truth‖₁ / ‖truth‖₁` on a shared grid.
pub fn relative_l1(pred: &GridFunction, truth: &GridFunction) -> Result<f64, GridError> {
    if pred.grid.n != truth.grid.n || pred.values.len() != truth.values.len() {
        return Err(GridError::Mismatch("relative_l1 needs equal grids".into()));
    }
    relative_l1_values(&pred.values, &truth.values)
}

pub fn relative_l1_values(pred: &[f64], truth: &[f64]) -> Result<f64, GridError> {
    if pred.len() != truth.len() {
        return Err(GridError::Mismatch("relative_l1 needs equal lengths".into()));
    }
    let denom: f64 = truth.iter().map(|t| t.abs()).sum();
    if denom == 0.0 {
        return Err(GridError::DegenerateReference);
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_has_two_modes() {
        let g = Grid::periodic(8).unwrap();
        let s = dft(&GridFunction::from_fn(g, f64::sin));
        assert!((s.coeff(1) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((s.coeff(-1) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        for (k, c) in s.modes() {
            if k.abs() != 1 {
                assert!(c.norm() < 1e-14, "mode {k} = {c}");
            }
        }
    }

    #[test]
    fn radix2_matches_direct() {
        let data: Vec<Complex64> =
            (0..64).map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64).cos())).collect();
        let mut fast = data.clone();
        fft_radix2(&mut fast, -1.0);
        let slow = dft_direct(&data, -1.0);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let g = Grid::periodic(8).unwrap();
        let mut s = dft(&GridFunction::from_fn(g, f64::cos));
        s.set(1, Complex64::new(0.5, 0.3));
        assert!(matches!(idft(&s, g), Err(GridError::NonRealReconstruction(_))));
    }

    #[test]
    fn degenerate_reference() {
        let g = Grid::periodic(4).unwrap();
        let z = GridFunction::zeros(g);
        assert_eq!(relative_l1(&z, &z), Err(GridError::DegenerateReference));
    }
}
