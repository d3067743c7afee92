//! Box waves transported at constant speed on `[0, 2π)`: a shift-DeepONet
//! with six step terms and a one-layer FNO, both built from `relu_lib` blocks.

use crate::mc::{l1_linear_vs_constant, periodic_overlap, sorted_breaks};
use crate::{ConstructionError, Result};
use hyperop_core::exact_pde::{box_value, BoxWaveParams};
use hyperop_core::grid::Grid;
use hyperop_core::measures::{box_on_grid, MeasureSpec};
use hyperop_nets::operator_nets::{
    Activation, FnoLayer, FnoModel, ModeTables, OperatorModel, Sensors, ShiftDeepOnetModel, Trunk,
};
use hyperop_nets::relu_lib::{
    build_angle_recovery, build_divide_ranges, build_maxpool, build_multiply, build_step, compile_analytic,
    CompileStrategy, Matrix, Mlp,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Parameter ranges of the box measure and the transport distance `a·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvectionSetup {
    pub h: [f64; 2],
    pub w: [f64; 2],
    pub shift: f64,
}

impl Default for AdvectionSetup {
    fn default() -> Self {
        Self { h: [0.2, 0.8], w: [0.1 * PI, 0.6 * PI], shift: PI / 4.0 }
    }
}

impl AdvectionSetup {
    /// Box measure on `[0, 2π)` with uniform centre.
    pub fn measure(&self) -> MeasureSpec {
        MeasureSpec::BoxWave { h: self.h, w: self.w, xi: [0.0, TAU], period: TAU }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.h[0] > 0.0 && self.h[1] >= self.h[0] && self.w[0] > 0.0 && self.w[1] >= self.w[0];
        if !ok || self.w[1] >= PI || !self.shift.is_finite() {
            return Err(ConstructionError::Precondition(format!(
                "advection setup needs 0 < h, 0 < w < π: h {:?}, w {:?}, shift {}",
                self.h, self.w, self.shift
            )));
        }
        Ok(())
    }

    /// Transported box.
    pub fn solution(&self, p: &BoxWaveParams) -> BoxWaveParams {
        BoxWaveParams { xi: p.xi + self.shift, ..*p }
    }
}

/// Shift-DeepONet for the advection solution operator on `m` sensors.
#[derive(Debug, Clone)]
pub struct AdvSdon {
    pub model: ShiftDeepOnetModel,
    pub grid: Grid,
    pub setup: AdvectionSetup,
    pub eps: f64,
    /// Sub-net returning the recovered height.
    pub height_net: Mlp,
}

const TERMS: [(f64, f64); 6] = [(1.0, -1.0), (1.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (-1.0, 0.0), (-1.0, 1.0)];

pub fn build_adv_sdon(eps: f64, m: usize) -> Result<AdvSdon> {
    build_adv_sdon_with(&AdvectionSetup::default(), eps, m)
}

/// Every grid node is a sensor. The height is a max over sensors spaced at
/// most `w̲` apart. The width is the mass over the height. The centre is the
/// angle of the first Fourier mode of the sensor values, normalised by its
/// magnitude for a block of equal nodes. The output is
/// `h̃ Σ_j [τ(y - ξ̃ - at + w̃/2 + 2πj) - τ(y - ξ̃ - at - w̃/2 + 2πj)]` for a
/// step `τ` of width `eps` and `j ∈ {-1, 0, 1}`.
pub fn build_adv_sdon_with(setup: &AdvectionSetup, eps: f64, m: usize) -> Result<AdvSdon> {
    setup.validate()?;
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(ConstructionError::Precondition(format!("eps = {eps} outside (0, 1/2]")));
    }
    let [h_lo, h_hi] = setup.h;
    let [w_lo, w_hi] = setup.w;
    if (m as f64) * w_lo < 2.0 * TAU {
        return Err(ConstructionError::Precondition(format!(
            "insufficient sensors: m = {m} needs m·w_min ≥ 4π (w_min = {w_lo})"
        )));
    }
    let grid = Grid::new(m, TAU)?;
    let dx = grid.dx();
    let e = eps / 4.0;

    // height: max over every `stride`-th node, exact for boxes wider than the stride
    let stride = ((w_lo / dx).floor() as usize).max(1);
    let picks: Vec<usize> = (0..m).step_by(stride).collect();
    let height = Mlp::select(m, &picks).then(&build_maxpool(picks.len())?)?;

    let xs = grid.points();
    let row = |f: &dyn Fn(f64) -> f64| (xs.iter().enumerate().map(|(j, &x)| (j, dx * f(x))).collect::<Vec<_>>(), 0.0);
    let sums = Mlp::linear(m, &[row(&|_| 1.0), row(&f64::cos), row(&f64::sin)]);
    // (h, mass, Σcos, Σsin)
    let stage_a = Mlp::parallel(&[&height, &sums])?;

    // (h, w̃, Σcos, Σsin)
    let div_w = build_divide_ranges([0.0, h_hi * (w_hi + 2.0 * dx)], [h_lo, h_hi], e)?;
    let stage_b = Mlp::parallel(&[&Mlp::select(4, &[0]), &Mlp::select(4, &[1, 0]).then(&div_w)?, &Mlp::select(4, &[2, 3])])?;

    // magnitude of Δx Σ e^{i x_j} over k consecutive nodes is this function of kΔx
    let gain = dx / (0.5 * dx).sin();
    let mag = move |x: f64| gain * (0.5 * x).sin();
    let w_range = [(w_lo - dx - 0.01).max(0.5 * w_lo), (w_hi + dx + 0.01).min(PI)];
    let (mag_net, _) = compile_analytic(&mag, w_range, e, CompileStrategy::Chebyshev)?;
    let mag_max = mag(w_range[1]);
    let mul = build_multiply(h_hi.max(mag_max) * 1.05, e)?;
    let d_net = Mlp::select(4, &[0, 1]).then(&Mlp::stack(&[&Mlp::identity(1), &mag_net])?.then(&mul)?)?;
    // (w̃, D, Σcos, Σsin)
    let stage_c = Mlp::parallel(&[&Mlp::select(4, &[1]), &d_net, &Mlp::select(4, &[2, 3])])?;

    let d_lo = h_lo * mag(w_range[0]);
    let d_hi = h_hi * mag_max;
    let div_cs = build_divide_ranges([-1.05 * d_hi, 1.05 * d_hi], [0.9 * d_lo, 1.1 * d_hi], e)?;
    // (w̃, cos ξ̃, sin ξ̃)
    let stage_d = Mlp::parallel(&[
        &Mlp::select(4, &[0]),
        &Mlp::select(4, &[2, 1]).then(&div_cs)?,
        &Mlp::select(4, &[3, 1]).then(&div_cs)?,
    ])?;
    let angle = build_angle_recovery(e.min(0.05))?;
    // (w̃, ξ̃)
    let stage_e = Mlp::parallel(&[&Mlp::select(3, &[0]), &Mlp::select(3, &[1, 2]).then(&angle)?])?;
    let gammas: Vec<(Vec<(usize, f64)>, f64)> =
        TERMS.iter().map(|&(s, j)| (vec![(0, 0.5 * s), (1, -1.0)], -setup.shift + TAU * j)).collect();
    let shift_net = stage_a.then(&stage_b)?.then(&stage_c)?.then(&stage_d)?.then(&stage_e)?.then(&Mlp::linear(2, &gammas))?;

    let signs: Vec<(Vec<(usize, f64)>, f64)> = TERMS.iter().map(|&(s, _)| (vec![(0, s)], 0.0)).collect();
    let branch = height.then(&Mlp::linear(1, &signs))?;
    let scale_net = Mlp::constant(m, vec![1.0; TERMS.len()]);
    let step = build_step(-0.5 * eps, 1.0, eps)?;
    let trunk = Trunk::PerTerm(vec![step; TERMS.len()]);
    let model = ShiftDeepOnetModel::new(branch, trunk, scale_net, shift_net, Sensors::all_nodes(&grid), 1)?;
    Ok(AdvSdon { model, grid, setup: *setup, eps, height_net: height })
}

impl AdvSdon {
    pub fn input(&self, p: &BoxWaveParams) -> Vec<f64> {
        box_on_grid(p, &self.grid).values
    }

    pub fn height(&self, u: &[f64]) -> Result<f64> {
        Ok(self.height_net.eval(u)?[0])
    }

    /// Recovered `(w̃, ξ̃)` read off the shift coefficients.
    pub fn width_and_centre(&self, u: &[f64]) -> Result<(f64, f64)> {
        let [_, _, g] = self.model.coefficients(&self.grid, u)?;
        Ok((g[1] - g[4], -0.5 * (g[1] + g[4]) - self.setup.shift))
    }

    pub fn operator_model(&self) -> OperatorModel {
        OperatorModel::ShiftDeepOnet(self.model.clone())
    }

    /// Exact `∫_0^{2π} |N(u)(y) - u(y, t)| dy`; the network output is linear
    /// between the kinks of its step terms.
    pub fn l1_error(&self, p: &BoxWaveParams) -> Result<f64> {
        let u = self.input(p);
        let [_, a, g] = self.model.coefficients(&self.grid, &u)?;
        let half = 0.5 * self.eps;
        let sol = self.setup.solution(p);
        let mut pts = Vec::new();
        for k in 0..a.len() {
            pts.push((-half - g[k]) / a[k]);
            pts.push((half - g[k]) / a[k]);
        }
        for s in [-1.0, 1.0] {
            let edge = (sol.xi + 0.5 * s * sol.w).rem_euclid(TAU);
            pts.push(edge);
        }
        let breaks = sorted_breaks(pts, 0.0, TAU);
        let pred = self.model.forward(&self.grid, &u, &breaks)?;
        Ok(l1_linear_vs_constant(&breaks, &pred, |y| box_value(&sol, y, TAU)))
    }
}

/// One-layer ReLU FNO with `k_max = 1` for the advection operator on `N` nodes.
#[derive(Debug, Clone)]
pub struct AdvFno {
    pub model: FnoModel,
    pub grid: Grid,
    pub setup: AdvectionSetup,
    /// Separation of the phase channel from the threshold at grid nodes.
    pub margin: f64,
}

pub fn build_adv_fno(n: usize) -> Result<AdvFno> {
    build_adv_fno_with(&AdvectionSetup::default(), n)
}

/// Smallest gap at a node between `sin a · cos d` and `sin a · cos a` over
/// blocks of `k` nodes (`a = kΔx/2`) that fit the width range, where `d` is
/// the node's distance from the block centre.
fn threshold_margin(setup: &AdvectionSetup, dx: f64) -> f64 {
    let k_lo = ((setup.w[0] / dx).floor() as usize).max(1);
    let k_hi = (setup.w[1] / dx).floor() as usize + 1;
    (k_lo..=k_hi)
        .map(|k| {
            let a = 0.5 * k as f64 * dx;
            let inside = (a - 0.5 * dx).cos() - a.cos();
            let outside = a.cos() - (a + 0.5 * dx).cos();
            a.sin() * inside.min(outside)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Lifting `(u, x) ↦ (u, χ, 0, 0)` with `χ = min(u/h̲, 1)` the support
/// indicator. The Fourier layer keeps the means of `u` and `χ` and turns the
/// first mode of `χ` into `±sin(w̃/2) cos(x - ξ̃ - at)`. The projection
/// divides the means for the height, compares the phase channel with
/// `sin(w̃)/2` through a narrow step and multiplies.
pub fn build_adv_fno_with(setup: &AdvectionSetup, n: usize) -> Result<AdvFno> {
    setup.validate()?;
    if n < 4 {
        return Err(ConstructionError::Precondition(format!("N = {n} < 4")));
    }
    let grid = Grid::new(n, TAU)?;
    let dx = grid.dx();
    let [h_lo, h_hi] = setup.h;
    let [w_lo, w_hi] = setup.w;
    if dx > w_lo {
        return Err(ConstructionError::Precondition(format!("2π/N = {dx} exceeds the minimal width {w_lo}")));
    }
    let chi = Mlp::one_hidden(
        Matrix::dense(1, 2, vec![-1.0 / h_lo, 0.0]),
        vec![1.0],
        Matrix::dense(1, 1, vec![-1.0]),
        vec![1.0],
    )?;
    let lifting = Mlp::parallel(&[&Mlp::select(2, &[0]), &chi, &Mlp::constant(2, vec![0.0, 0.0])])?;

    let d = 4;
    let mut layer = FnoLayer::zeros(d, 1);
    layer.set_p(d, 0, 0, 0, Complex64::new(1.0, 0.0));
    layer.set_p(d, 0, 1, 1, Complex64::new(1.0, 0.0));
    // 2 Re(c χ̂₁ e^{ix}) = sin(kΔx/2) cos(x - centre - at) for a block of k nodes
    let c = Complex64::from_polar(0.5 * PI * (0.5 * dx).sin() / (0.5 * dx), -setup.shift);
    layer.set_p(d, 1, 2, 1, c);
    layer.set_p(d, 1, 3, 1, -c);

    let inner = 0.01 / n as f64;
    let b_lo = (1.0 / n as f64).max(w_lo / TAU - 1.0 / n as f64);
    let b_hi = w_hi / TAU + 1.0 / n as f64;
    let div = build_divide_ranges([0.0, h_hi * b_hi], [b_lo, b_hi], inner)?;
    let height = Mlp::select(d, &[0, 1]).then(&div)?;
    let margin = threshold_margin(setup, dx);
    let w_range = [(w_lo - dx - 0.01).max(0.0), (w_hi + dx + 0.01).min(PI)];
    let (half_sin, _) = compile_analytic(&|x| 0.5 * x.sin(), w_range, margin / 8.0, CompileStrategy::Chebyshev)?;
    let threshold = Mlp::linear(d, &[(vec![(1, TAU)], 0.0)]).then(&half_sin)?;
    // C⁺ - C⁻ - S
    let gap = Mlp::parallel(&[&Mlp::select(d, &[2, 3]), &threshold])?.then(&Mlp::linear(3, &[(vec![(0, 1.0), (1, -1.0), (2, -1.0)], 0.0)]))?;
    let inside = gap.then(&build_step(-0.5 * margin, 1.0, margin)?)?;
    let mul = build_multiply(1.1 * h_hi.max(1.0), inner)?;
    let projection = Mlp::parallel(&[&height, &inside])?.then(&mul)?;
    let model = FnoModel::new(lifting, vec![layer], projection, 1, Activation::Relu)?;
    Ok(AdvFno { model, grid, setup: *setup, margin })
}

impl AdvFno {
    pub fn input(&self, p: &BoxWaveParams) -> Vec<f64> {
        box_on_grid(p, &self.grid).values
    }

    pub fn predict(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model.forward(&self.grid, u)?)
    }

    /// Phase channel `C⁺ - C⁻` of the Fourier layer at the grid nodes.
    pub fn phase_channel(&self, u: &[f64]) -> Result<Vec<f64>> {
        let tables = ModeTables::new(self.grid.n, 1);
        let v = self.model.lifting.eval_batch(&self.model.lifting_input(&self.grid, u)?, self.grid.n)?;
        let pre = self.model.layer_preactivation(&self.model.layers[0], &v, &tables);
        let n = self.grid.n;
        Ok((0..n).map(|j| pre[2 * n + j].max(0.0) - pre[3 * n + j].max(0.0)).collect())
    }

    pub fn operator_model(&self) -> OperatorModel {
        OperatorModel::Fno(self.model.clone())
    }

    /// L1 distance over `[0, 2π)` between the piecewise-constant
    /// reconstruction of the grid output (node values on cells of width Δx)
    /// and the transported box.
    pub fn l1_error(&self, p: &BoxWaveParams) -> Result<f64> {
        let out = self.predict(&self.input(p))?;
        let sol = self.setup.solution(p);
        let dx = self.grid.dx();
        let (a, b) = (sol.xi - 0.5 * sol.w, sol.xi + 0.5 * sol.w);
        Ok(self
            .grid
            .points()
            .iter()
            .zip(&out)
            .map(|(&x, &o)| {
                let inside = periodic_overlap(a, b, x - 0.5 * dx, x + 0.5 * dx);
                (o - sol.h).abs() * inside + o.abs() * (dx - inside)
            })
            .sum())
    }
}
