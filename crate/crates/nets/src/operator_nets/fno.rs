use crate::relu_lib::{Matrix, Mlp};
use crate::NetError;
use hyperop_core::grid::Grid;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Tanh form `x/2 (1 + tanh(√(2/π)(x + 0.044715 x³)))`.
    Gelu,
    Identity,
}

const GELU_C: f64 = 0.7978845608028654; // √(2/π)
const GELU_A: f64 = 0.044715;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()),
            Activation::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let u = GELU_C * (x + GELU_A * x * x * x);
                let t = u.tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Hidden layer `v ↦ σ(W v + b + K v)`. Only modes `0..=k_max` are stored;
/// negative modes are the complex conjugates, and mode 0 uses real parts only,
/// so real inputs give real outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnoLayer {
    pub w: Matrix,
    /// `P(k)` row-major `d_v × d_v`, for `k = 0..=k_max`.
    pub p: Vec<Complex64>,
    /// Fourier coefficients of the bias `b̂(k)`, `d_v` per mode.
    pub bias_hat: Vec<Complex64>,
}

impl FnoLayer {
    pub fn zeros(d_v: usize, k_max: usize) -> Self {
        Self {
            w: Matrix::dense(d_v, d_v, vec![0.0; d_v * d_v]),
            p: vec![Complex64::new(0.0, 0.0); (k_max + 1) * d_v * d_v],
            bias_hat: vec![Complex64::new(0.0, 0.0); (k_max + 1) * d_v],
        }
    }

    pub fn p_at(&self, d_v: usize, k: usize, i: usize, j: usize) -> Complex64 {
        self.p[(k * d_v + i) * d_v + j]
    }

    pub fn set_p(&mut self, d_v: usize, k: usize, i: usize, j: usize, v: Complex64) {
        self.p[(k * d_v + i) * d_v + j] = v;
    }
}

/// Fourier neural operator on a periodic 1-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnoModel {
    /// Pointwise `(u(x), x) ↦ v(x) ∈ R^{d_v}`.
    pub lifting: Mlp,
    pub layers: Vec<FnoLayer>,
    /// Pointwise `R^{d_v} → R^{d_out}`.
    pub projection: Mlp,
    pub k_max: usize,
    pub d_v: usize,
    pub activation: Activation,
}

/// Cosine and sine tables `cos(2π k j / n)` for `k = 0..=k_max`, row per mode.
#[derive(Debug, Clone)]
pub struct ModeTables {
    pub n: usize,
    pub k_max: usize,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl ModeTables {
    pub fn new(n: usize, k_max: usize) -> Self {
        let mut cos = vec![0.0; (k_max + 1) * n];
        let mut sin = vec![0.0; (k_max + 1) * n];
        for k in 0..=k_max {
            for j in 0..n {
                // reduce k j mod n before the angle for accuracy on large grids
                let theta = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                cos[k * n + j] = theta.cos();
                sin[k * n + j] = theta.sin();
            }
        }
        Self { n, k_max, cos, sin }
    }
}

impl FnoModel {
    pub fn new(
        lifting: Mlp,
        layers: Vec<FnoLayer>,
        projection: Mlp,
        k_max: usize,
        activation: Activation,
    ) -> Result<Self, NetError> {
        let d_v = lifting.out_dim();
        if projection.in_dim() != d_v {
            return Err(NetError::Dimension(format!("projection takes {}, lifting gives {d_v}", projection.in_dim())));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.w.rows() != d_v
                || l.w.cols() != d_v
                || l.p.len() != (k_max + 1) * d_v * d_v
                || l.bias_hat.len() != (k_max + 1) * d_v
            {
                return Err(NetError::Dimension(format!("layer {i} does not match d_v = {d_v}, k_max = {k_max}")));
            }
        }
        Ok(Self { lifting, layers, projection, k_max, d_v, activation })
    }

    /// Input channels expected by the lifting (the coordinate is appended).
    pub fn in_channels(&self) -> usize {
        self.lifting.in_dim() - 1
    }

    pub fn out_channels(&self) -> usize {
        self.projection.out_dim()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<(), NetError> {
        if grid.n < 2 * self.k_max + 1 {
            return Err(NetError::Invalid(format!("grid of {} nodes cannot resolve k_max = {}", grid.n, self.k_max)));
        }
        Ok(())
    }

    /// Lifting input: channels then the coordinate, unit-major over nodes.
    pub fn lifting_input(&self, grid: &Grid, u: &[f64]) -> Result<Vec<f64>, NetError> {
        let c = self.in_channels();
        if u.len() != c * grid.n {
            return Err(NetError::Dimension(format!("input of length {} for {c} channels on {} nodes", u.len(), grid.n)));
        }
        let mut x = u.to_vec();
        x.extend(grid.points());
        Ok(x)
    }

    /// Output channels on the grid, channel-major.
    pub fn forward(&self, grid: &Grid, u: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_grid(grid)?;
        let tables = ModeTables::new(grid.n, self.k_max);
        let mut v = self.lifting.eval_batch(&self.lifting_input(grid, u)?, grid.n)?;
        for layer in &self.layers {
            let pre = self.layer_preactivation(layer, &v, &tables);
            v = pre.into_iter().map(|z| self.activation.apply(z)).collect();
        }
        self.projection.eval_batch(&v, grid.n)
    }

    /// `v̂(k) = (1/n) Σ_j v(x_j) e^{-2πi k j/n}` for each channel; `[k][channel]`.
    pub fn modes(&self, v: &[f64], t: &ModeTables) -> Vec<Complex64> {
        let (n, d) = (t.n, self.d_v);
        let mut out = vec![Complex64::new(0.0, 0.0); (t.k_max + 1) * d];
        for k in 0..=t.k_max {
            let (c, s) = (&t.cos[k * n..(k + 1) * n], &t.sin[k * n..(k + 1) * n]);
            for i in 0..d {
                let row = &v[i * n..(i + 1) * n];
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..n {
                    re += row[j] * c[j];
                    im -= row[j] * s[j];
                }
                out[k * d + i] = Complex64::new(re / n as f64, im / n as f64);
            }
        }
        out
    }

    /// `Y(k) = P(k) v̂(k) + b̂(k)`, with the imaginary part of mode 0 dropped.
    pub fn spectral_coefficients(&self, layer: &FnoLayer, v_hat: &[Complex64]) -> Vec<Complex64> {
        let d = self.d_v;
        let mut y = layer.bias_hat.clone();
        for k in 0..=self.k_max {
            for i in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    let pk = layer.p_at(d, k, i, j);
                    acc += if k == 0 { Complex64::new(pk.re * v_hat[j].re, 0.0) } else { pk * v_hat[k * d + j] };
                }
                y[k * d + i] += acc;
                if k == 0 {
                    y[i].im = 0.0;
                }
            }
        }
        y
    }

    /// `W v + b + K v` before the activation, unit-major `d_v × n`.
    pub fn layer_preactivation(&self, layer: &FnoLayer, v: &[f64], t: &ModeTables) -> Vec<f64> {
        let (n, d) = (t.n, self.d_v);
        let mut out = vec![0.0; d * n];
        layer.w.apply_batch(v, n, &mut out);
        let y = self.spectral_coefficients(layer, &self.modes(v, t));
        for i in 0..d {
            let row = &mut out[i * n..(i + 1) * n];
            let y0 = y[i].re;
            row.iter_mut().for_each(|r| *r += y0);
            for k in 1..=self.k_max {
                let yk = y[k * d + i];
                if yk.re == 0.0 && yk.im == 0.0 {
                    continue;
                }
                let (c, s) = (&t.cos[k * n..(k + 1) * n], &t.sin[k * n..(k + 1) * n]);
                for j in 0..n {
                    row[j] += 2.0 * (yk.re * c[j] - yk.im * s[j]);
                }
            }
        }
        out
    }
}
