//! Covariance spectra of input/output measures: semi-analytic eigenvalues for
//! box-wave pushforwards, empirical eigenvalues from samples, and linear
//! Fourier projection errors.

use crate::grid::{dft_values, idft, Grid, GridError, GridFunction};
use crate::measures::MeasureSpec;
use crate::stats::{fit_power_law, median};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Eigenvalues in descending order with tail sums `tail[p] = Σ_{j>p} λ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub tail_sums: Vec<f64>,
    pub method: String,
    pub n_samples: usize,
    /// Fitted `tail(p) ≈ C p^α` over the fit window, when requested.
    #[serde(default)]
    pub tail_fit: Option<TailFit>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub p_min: usize,
    pub p_max: usize,
    pub exponent: f64,
    pub constant: f64,
}

impl SpectrumReport {
    /// Build from the full descending spectrum, keeping `keep` eigenvalues.
    pub fn from_full(mut all: Vec<f64>, keep: usize, method: &str, n_samples: usize) -> Self {
        all.sort_by(|a, b| b.total_cmp(a));
        let mut tails = vec![0.0; all.len() + 1];
        for j in (0..all.len()).rev() {
            tails[j] = tails[j + 1] + all[j];
        }
        let keep = keep.min(all.len());
        Self {
            eigenvalues: all[..keep].to_vec(),
            tail_sums: tails[..=keep].to_vec(),
            method: method.to_string(),
            n_samples,
            tail_fit: None,
            config_hash: None,
        }
    }

    pub fn tail(&self, p: usize) -> f64 {
        self.tail_sums[p]
    }

    /// Fit `tail(p) ≈ C p^α` over `p` in `[p_min, p_max]`, powers of two.
    pub fn fit_tail(&mut self, p_min: usize, p_max: usize) -> Option<TailFit> {
        let mut ps = Vec::new();
        let mut ts = Vec::new();
        let mut p = p_min.max(1);
        while p <= p_max && p < self.tail_sums.len() {
            ps.push(p as f64);
            ts.push(self.tail_sums[p]);
            p *= 2;
        }
        let (exponent, constant) = fit_power_law(&ps, &ts)?;
        let fit = TailFit { p_min, p_max, exponent, constant };
        self.tail_fit = Some(fit);
        Some(fit)
    }

    /// CSV with columns `k,lambda,tail`; row `k` holds `λ_k` and `tail(k)`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<(), SpectraError> {
        writeln!(w, "k,lambda,tail")?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{:e},{:e}", k + 1, l, self.tail_sums[k + 1])?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, SpectraError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mean_square_uniform(r: &[f64; 2]) -> f64 {
    (r[0] * r[0] + r[0] * r[1] + r[1] * r[1]) / 3.0
}

const QUADRATURE_INTERVALS: usize = 4096;

/// Composite Simpson average of `f` over the interval `r` (exact for a point).
fn uniform_average(r: &[f64; 2], f: impl Fn(f64) -> f64) -> f64 {
    if r[1] == r[0] {
        return f(r[0]);
    }
    let m = QUADRATURE_INTERVALS;
    let h = (r[1] - r[0]) / m as f64;
    let mut acc = f(r[0]) + f(r[1]);
    for i in 1..m {
        let wgt = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += wgt * f(r[0] + h * i as f64);
    }
    acc * h / 3.0 / (r[1] - r[0])
}

/// `E|ĉ_k|²` for a box wave with normalised coefficients
/// `ĉ_k = (1/P)∫ u e^{-2πikx/P} dx`; for `P = 2π` and `k ≠ 0` this is
/// `E[h²] · E_w[sin²(kw/2) / (π²k²)]`.
pub fn box_fourier_variance(h: &[f64; 2], w: &[f64; 2], period: f64, k: i64) -> f64 {
    let eh2 = mean_square_uniform(h);
    let kf = k.unsigned_abs() as f64;
    let coeff2 = |wv: f64| {
        if k == 0 {
            (wv / period).powi(2)
        } else {
            let s = (PI * kf * wv / period).sin() / (PI * kf);
            s * s
        }
    };
    eh2 * uniform_average(w, coeff2)
}

/// Eigenvalues of the uncentred covariance operator on `L²(0, P)` for box
/// waves with shift uniform over the whole period. Each `k ≥ 1` contributes a
/// doubled real pair `P · E|ĉ_k|²`.
pub fn box_measure_fourier_eigs(spec: &MeasureSpec, k_max: usize) -> Result<SpectrumReport, SpectraError> {
    let MeasureSpec::BoxWave { h, w, period, .. } = spec else {
        return Err(SpectraError::Invalid("box_measure_fourier_eigs needs a box-wave measure".into()));
    };
    let mut all = Vec::with_capacity(2 * k_max + 1);
    all.push(period * box_fourier_variance(h, w, *period, 0));
    for k in 1..=k_max as i64 {
        let l = period * box_fourier_variance(h, w, *period, k);
        all.push(l);
        all.push(l);
    }
    let keep = all.len();
    Ok(SpectrumReport::from_full(all, keep, "fourier-box", 0))
}

/// Which matrix the empirical eigenvalues are taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceRoute {
    /// Gram matrix when there are fewer samples than nodes, else direct.
    Auto,
    /// `(Δx/m) UᵀU`, size `n × n`.
    Direct,
    /// `(Δx/m) UUᵀ`, size `m × m`.
    Gram,
}

/// Largest matrix handled by the Jacobi solver; bigger ones use a
/// tridiagonal QR solver.
pub const JACOBI_MAX_DIM: usize = 512;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix (row-major `dim × dim`) by cyclic Jacobi.
pub fn jacobi_eigenvalues(a: &[f64], dim: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let idx = |i: usize, j: usize| i * dim + j;
    let frob: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return vec![0.0; dim];
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                off += m[idx(i, j)] * m[idx(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= JACOBI_TOL * frob {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = m[idx(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = m[idx(k, p)];
                    let akq = m[idx(k, q)];
                    m[idx(k, p)] = c * akp - s * akq;
                    m[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = m[idx(p, k)];
                    let aqk = m[idx(q, k)];
                    m[idx(p, k)] = c * apk - s * aqk;
                    m[idx(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..dim).map(|i| m[idx(i, i)]).collect()
}

fn symmetric_eigenvalues(a: Vec<f64>, dim: usize) -> Vec<f64> {
    if dim <= JACOBI_MAX_DIM {
        jacobi_eigenvalues(&a, dim)
    } else {
        let mat = nalgebra::DMatrix::from_row_slice(dim, dim, &a);
        nalgebra::SymmetricEigen::new(mat).eigenvalues.iter().copied().collect()
    }
}

/// Eigenvalues of the uncentred sample second-moment operator
/// `v ↦ (1/m) Σ_i u_i ⟨u_i, v⟩`, inner product weighted by `dx`.
pub fn empirical_covariance_eigs(
    samples: &[Vec<f64>],
    dx: f64,
    p_max: usize,
) -> Result<SpectrumReport, SpectraError> {
    empirical_covariance_eigs_via(samples, dx, p_max, CovarianceRoute::Auto)
}

pub fn empirical_covariance_eigs_via(
    samples: &[Vec<f64>],
    dx: f64,
    p_max: usize,
    route: CovarianceRoute,
) -> Result<SpectrumReport, SpectraError> {
    let m = samples.len();
    if m == 0 {
        return Err(SpectraError::Invalid("no samples".into()));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) || n == 0 {
        return Err(SpectraError::Invalid("samples must share a non-empty length".into()));
    }
    let use_gram = match route {
        CovarianceRoute::Auto => m < n,
        CovarianceRoute::Direct => false,
        CovarianceRoute::Gram => true,
    };
    let scale = dx / m as f64;
    let (mat, dim, method) = if use_gram {
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v: f64 = samples[i].iter().zip(&samples[j]).map(|(a, b)| a * b).sum::<f64>() * scale;
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        (g, m, "empirical-gram")
    } else {
        let mut c = vec![0.0; n * n];
        for s in samples {
            for i in 0..n {
                let si = s[i];
                if si == 0.0 {
                    continue;
                }
                let row = &mut c[i * n..(i + 1) * n];
                for (r, sj) in row.iter_mut().zip(s) {
                    *r += si * sj;
                }
            }
        }
        for v in &mut c {
            *v *= scale;
        }
        (c, n, "empirical-direct")
    };
    let eig = symmetric_eigenvalues(mat, dim);
    Ok(SpectrumReport::from_full(eig, p_max, method, m))
}

/// Median over samples of the relative L1 error after keeping only modes
/// with `|k| <= k_max`.
pub fn fourier_projection_error(samples: &[GridFunction], k_max: usize) -> Result<f64, SpectraError> {
    if samples.is_empty() {
        return Err(SpectraError::Invalid("no samples".into()));
    }
    let mut errs = Vec::with_capacity(samples.len());
    for s in samples {
        errs.push(projection_error_one(&s.values, s.grid, k_max)?);
    }
    Ok(median(&errs))
}

fn projection_error_one(values: &[f64], grid: Grid, k_max: usize) -> Result<f64, SpectraError> {
    let mut spec = dft_values(values);
    spec.truncate(k_max);
    let proj = idft(&spec, grid)?;
    Ok(crate::grid::relative_l1_values(&proj.values, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_known_matrix() {
        // eigenvalues 1, 3 of [[2,1],[1,2]]
        let mut e = jacobi_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        e.sort_by(|a, b| a.total_cmp(b));
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn tails_are_suffix_sums() {
        let r = SpectrumReport::from_full(vec![1.0, 4.0, 2.0], 3, "t", 0);
        assert_eq!(r.eigenvalues, vec![4.0, 2.0, 1.0]);
        assert_eq!(r.tail_sums, vec![7.0, 3.0, 1.0, 0.0]);
    }
}
