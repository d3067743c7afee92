//! Burgers with data `-sin(x - ξ)`: the solution is a fixed profile shifted
//! by `ξ`, so both networks recover the phase exactly from three point
//! values and feed `x - Ξ` to a ReLU approximation of the profile.

use crate::{ConstructionError, Result};
use hyperop_core::exact_pde::{burgers_xt, psi_inverse};
use hyperop_core::grid::Grid;
use hyperop_nets::operator_nets::{
    Activation, FnoLayer, FnoModel, ModeTables, OperatorModel, Sensors, ShiftDeepOnetModel, Trunk,
};
use hyperop_nets::relu_lib::{
    build_angle_recovery, build_indicator, build_multiply, compile_analytic, CompileStrategy, Matrix, Mlp,
};
use num_complex::Complex64;
use std::f64::consts::TAU;

const TABLE_NODES: usize = 4096;
/// Distance kept from the shock when fitting the profile.
const SHOCK_GAP: f64 = 1e-6;

pub const PRE_SHOCK_WARNING: &str = "pre-shock regime: use smooth path";

/// Solution profile `U(z) = -sin(Ψ_t⁻¹(z))` for data `-sin x`, extended
/// 2π-periodically to `[-2π, 2π]` with the shock at `z = 0`.
#[derive(Debug, Clone)]
pub struct BurgersProfile {
    pub t: f64,
    lo: f64,
    hi: f64,
    table: Vec<f64>,
}

impl BurgersProfile {
    /// Tabulates `Ψ_t⁻¹` on 4096 nodes by bisection; lookups refine the
    /// interpolated value with Newton steps.
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ConstructionError::Precondition(format!("time t = {t} must be positive")));
        }
        let lo = burgers_xt(t);
        let table = (0..TABLE_NODES).map(|i| psi_inverse(TAU * i as f64 / (TABLE_NODES - 1) as f64, t)).collect();
        Ok(Self { t, lo, hi: TAU - lo, table })
    }

    /// `Ψ_t⁻¹(z)` for `z ∈ [0, 2π]`.
    pub fn characteristic_foot(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, TAU);
        let s = z / TAU * (TABLE_NODES - 1) as f64;
        let i = (s.floor() as usize).min(TABLE_NODES - 2);
        let f = s - i as f64;
        let mut x = self.table[i] + f * (self.table[i + 1] - self.table[i]);
        for _ in 0..4 {
            let d = 1.0 - self.t * x.cos();
            if d < 1e-3 {
                return psi_inverse(z, self.t);
            }
            x = (x - (x - self.t * x.sin() - z) / d).clamp(self.lo, self.hi);
        }
        x
    }

    /// Profile for `z ∈ [-2π, 2π]`; the right limit at the shock.
    pub fn value(&self, z: f64) -> f64 {
        -self.characteristic_foot(z.rem_euclid(TAU)).sin()
    }
}

/// ReLU net `z ↦ Φ(z) ≈ U(z)` on `[-2π, 2π]`: the analytic branch on
/// `(0, 2π]` and its copy shifted by `-2π` are compiled once and glued by
/// indicators with ramps of width `eps/8` at the shocks.
pub fn build_profile_net(profile: &BurgersProfile, eps: f64) -> Result<Mlp> {
    let (right, _) = compile_analytic(
        &|z| -profile.characteristic_foot(z).sin(),
        [SHOCK_GAP, TAU - SHOCK_GAP],
        eps / 16.0,
        CompileStrategy::Chebyshev,
    )?;
    let left = Mlp::affine(Matrix::dense(1, 1, vec![1.0]), vec![TAU]).then(&right)?;
    let d = eps / 8.0;
    let chi_right = build_indicator(-0.5 * d, TAU + d, d)?;
    let chi_left = build_indicator(-TAU - 2.0 * d, -0.5 * d, d)?;
    let mul = build_multiply(1.25, eps / 16.0)?;
    let pieces = Mlp::parallel(&[&chi_right, &right, &chi_left, &left])?;
    let products = Mlp::stack(&[&mul, &mul])?;
    Ok(pieces.then(&products)?.then(&Mlp::linear(2, &[(vec![(0, 1.0), (1, 1.0)], 0.0)]))?)
}

/// Rows mapping `(u(x_0), u(x_1), u(x_2))` of `u = -sin(x - ξ)` to
/// `(cos ξ, sin ξ)`: the coefficients of `sin x` and `cos x` in the basis
/// `{1, sin x, cos x}` are `-cos ξ` and `sin ξ`.
pub fn phase_matrix(points: [f64; 3]) -> Result<[[f64; 3]; 2]> {
    let v: Vec<[f64; 3]> = points.iter().map(|x| [1.0, x.sin(), x.cos()]).collect();
    let cof = |r: usize, c: usize| {
        let rs: Vec<usize> = (0..3).filter(|&i| i != r).collect();
        let cs: Vec<usize> = (0..3).filter(|&i| i != c).collect();
        let m = v[rs[0]][cs[0]] * v[rs[1]][cs[1]] - v[rs[0]][cs[1]] * v[rs[1]][cs[0]];
        if (r + c).is_multiple_of(2) {
            m
        } else {
            -m
        }
    };
    let det: f64 = (0..3).map(|c| v[0][c] * cof(0, c)).sum();
    if det.abs() < 1e-12 {
        return Err(ConstructionError::Precondition(format!("sensor points {points:?} do not determine the phase")));
    }
    // row i of V⁻¹ is column i of the cofactor matrix over det
    let inv_row = |i: usize| [cof(0, i) / det, cof(1, i) / det, cof(2, i) / det];
    let (r1, r2) = (inv_row(1), inv_row(2));
    Ok([[-r1[0], -r1[1], -r1[2]], r2])
}

fn phase_net(points: [f64; 3], offset: f64, n_in: usize, cols: [usize; 3]) -> Result<Mlp> {
    let a = phase_matrix(points)?;
    let rows: Vec<(Vec<(usize, f64)>, f64)> = a
        .iter()
        .map(|r| ((0..3).map(|k| (cols[k], r[k])).collect(), -offset * r.iter().sum::<f64>()))
        .collect();
    Ok(Mlp::linear(n_in, &rows))
}

/// Accuracy of `Ξ`. Within this distance of `ξ = 0` the angle net passes
/// from 2π to 0 and the output is wrong, so it is taken well below `eps` to
/// keep that band's probability negligible.
fn phase_tolerance(eps: f64) -> f64 {
    (eps * eps / 8.0).min(0.05)
}

fn check_time(t: f64) -> Result<Vec<String>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(ConstructionError::Precondition(format!("time t = {t} must be positive")));
    }
    Ok(if t <= 1.0 { vec![format!("{PRE_SHOCK_WARNING} (t = {t})")] } else { Vec::new() })
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 0.5 {
        Ok(())
    } else {
        Err(ConstructionError::Precondition(format!("eps = {eps} outside (0, 1/2]")))
    }
}

/// Data `-sin(x - ξ)` on `grid`.
pub fn sine_input(xi: f64, grid: &Grid) -> Vec<f64> {
    grid.points().iter().map(|x| -(x - xi).sin()).collect()
}

/// Shift-DeepONet `y ↦ Φ(y - Ξ(A ū))` with three sensors and one term.
#[derive(Debug, Clone)]
pub struct BurgSdon {
    pub model: ShiftDeepOnetModel,
    pub grid: Grid,
    pub eps: f64,
    pub profile: BurgersProfile,
    /// Sensor values to `(cos ξ, sin ξ)`.
    pub phase_net: Mlp,
    pub warnings: Vec<String>,
}

/// Times `t ≤ 1` (no shock yet) are built anyway and carry a warning.
pub fn build_burg_sdon(eps: f64, t: f64) -> Result<BurgSdon> {
    check_eps(eps)?;
    let warnings = check_time(t)?;
    let grid = Grid::new(3, TAU)?;
    let points = [0.0, TAU / 3.0, 2.0 * TAU / 3.0];
    let profile = BurgersProfile::new(t)?;
    let phi = build_profile_net(&profile, eps)?;
    let phase = phase_net(points, 0.0, 3, [0, 1, 2])?;
    let angle = build_angle_recovery(phase_tolerance(eps))?;
    let shift_net = phase.then(&angle)?.then(&Mlp::linear(1, &[(vec![(0, -1.0)], 0.0)]))?;
    let model = ShiftDeepOnetModel::new(
        Mlp::constant(3, vec![1.0]),
        Trunk::PerTerm(vec![phi]),
        Mlp::constant(3, vec![1.0]),
        shift_net,
        Sensors::new(points.to_vec()),
        1,
    )?;
    Ok(BurgSdon { model, grid, eps, profile, phase_net: phase, warnings })
}

impl BurgSdon {
    pub fn input(&self, xi: f64) -> Vec<f64> {
        sine_input(xi, &self.grid)
    }

    /// Recovered `Ξ ≈ ξ`.
    pub fn phase(&self, u: &[f64]) -> Result<f64> {
        let [_, _, g] = self.model.coefficients(&self.grid, u)?;
        Ok(-g[0])
    }

    pub fn profile_net(&self) -> &Mlp {
        match &self.model.trunk {
            Trunk::PerTerm(t) => &t[0],
            Trunk::Shared(t) => t,
        }
    }

    pub fn lattice(&self, k: usize) -> Result<ProfileLattice> {
        ProfileLattice::new(self.profile_net(), k)
    }

    pub fn operator_model(&self) -> OperatorModel {
        OperatorModel::ShiftDeepOnet(self.model.clone())
    }

    /// `∫_0^{2π} |N(u)(y) - u(y, t)| dy` using the single-term structure
    /// `N(u)(y) = Φ(y - Ξ)` and profile values cached on `lattice`.
    pub fn l1_error(&self, xi: f64, lattice: &ProfileLattice) -> Result<f64> {
        Ok(lattice.l1_error(self.phase(&self.input(xi))?, xi, &self.profile))
    }
}

/// Profile net sampled at the midpoints `(i + ½)h`, `i ∈ [-K, K)`, `h = 2π/K`.
#[derive(Debug, Clone)]
pub struct ProfileLattice {
    pub k: usize,
    pub values: Vec<f64>,
}

impl ProfileLattice {
    pub fn new(phi: &Mlp, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(ConstructionError::Precondition("empty profile lattice".into()));
        }
        let h = TAU / k as f64;
        let z: Vec<f64> = (0..2 * k).map(|i| (i as f64 - k as f64 + 0.5) * h).collect();
        Ok(Self { k, values: phi.eval_batch(&z, 2 * k)? })
    }

    /// Midpoint rule for `∫_0^{2π} |Φ(y - Ξ) - U(y - ξ)| dy`: the nodes are
    /// the lattice points `z ∈ [-Ξ, 2π - Ξ)`.
    pub fn l1_error(&self, big_xi: f64, xi: f64, profile: &BurgersProfile) -> f64 {
        let k = self.k as f64;
        let h = TAU / k;
        let first = ((-big_xi / h - 0.5).ceil() + k).clamp(0.0, k) as usize;
        (first..first + self.k)
            .map(|i| {
                let z = (i as f64 - k + 0.5) * h;
                (self.values[i] - profile.value(z + big_xi - xi)).abs()
            })
            .sum::<f64>()
            * h
    }
}

/// Three-layer ReLU FNO with `k_max = 1` for the Burgers operator on `N` nodes.
#[derive(Debug, Clone)]
pub struct BurgFno {
    pub model: FnoModel,
    pub grid: Grid,
    pub eps: f64,
    pub profile: BurgersProfile,
    /// Constant channels `(G_0, G_1, G_2)` to `Ξ`.
    pub xi_net: Mlp,
    /// Last stage of the projection, `z ↦ Φ(z)`.
    pub profile_net: Mlp,
    pub warnings: Vec<String>,
}

/// Nodes whose values are isolated by the masks.
fn mask_nodes(n: usize) -> [usize; 3] {
    [0, n / 3, 2 * n / 3]
}

/// Fourier layers shared by the full model and the phase-only model.
///
/// Layer 1 copies `u + 1` and `x` and builds masks `m_j = σ(1 - L + L cos(x - x_j))`,
/// one at the node `x_j` and zero at every other node. Layer 2 keeps
/// `σ(u + 1 - 2 + 2m_j)`, which is `u(x_j) + 1` at `x_j` and zero elsewhere.
/// Layer 3 turns their means times `N` into constant channels `G_j = u(x_j) + 1`
/// and carries `x`.
fn phase_layers(n: usize) -> (Mlp, Vec<FnoLayer>, [f64; 3]) {
    let d = 5;
    let lifting = Mlp::linear(2, &[(vec![(0, 1.0)], 1.0), (vec![(1, 1.0)], 0.0), (vec![], 0.0), (vec![], 0.0), (vec![], 0.0)]);
    let nodes = mask_nodes(n);
    let xs = nodes.map(|l| TAU * l as f64 / n as f64);
    let big_l = 1.000001 / (1.0 - (TAU / n as f64).cos());

    let mut l1 = FnoLayer::zeros(d, 1);
    l1.w = Matrix::from_triplets(d, d, [(0, 0, 1.0), (1, 1, 1.0)]);
    for (j, x) in xs.iter().enumerate() {
        l1.bias_hat[2 + j] = Complex64::new(1.0 - big_l, 0.0);
        l1.bias_hat[d + 2 + j] = Complex64::from_polar(0.5 * big_l, -x);
    }
    let mut l2 = FnoLayer::zeros(d, 1);
    l2.w = Matrix::from_triplets(d, d, [(0, 0, 1.0), (0, 2, 2.0), (1, 0, 1.0), (1, 3, 2.0), (2, 0, 1.0), (2, 4, 2.0), (3, 1, 1.0)]);
    for j in 0..3 {
        l2.bias_hat[j] = Complex64::new(-2.0, 0.0);
    }
    let mut l3 = FnoLayer::zeros(d, 1);
    l3.w = Matrix::from_triplets(d, d, [(3, 3, 1.0)]);
    for j in 0..3 {
        l3.set_p(d, 0, j, j, Complex64::new(n as f64, 0.0));
    }
    (lifting, vec![l1, l2, l3], xs)
}

fn check_fno_grid(n: usize) -> Result<()> {
    if n < 3 {
        return Err(ConstructionError::Precondition(format!("N < 3 (got N = {n})")));
    }
    Ok(())
}

/// The Burgers FNO with the projection cut after the phase: outputs
/// `(cos ξ, sin ξ)` at every node.
pub fn build_burg_fno_phase(n: usize) -> Result<FnoModel> {
    check_fno_grid(n)?;
    let (lifting, layers, xs) = phase_layers(n);
    let phase = phase_net(xs, 1.0, 5, [0, 1, 2])?;
    Ok(FnoModel::new(lifting, layers, phase, 1, Activation::Relu)?)
}

pub fn build_burg_fno(eps: f64, t: f64, n: usize) -> Result<BurgFno> {
    check_fno_grid(n)?;
    check_eps(eps)?;
    let warnings = check_time(t)?;
    let (lifting, layers, xs) = phase_layers(n);
    let angle = build_angle_recovery(phase_tolerance(eps))?;
    let xi_net = phase_net(xs, 1.0, 3, [0, 1, 2])?.then(&angle)?;
    let xi_of_state = Mlp::select(5, &[0, 1, 2]).then(&xi_net)?;
    let z = Mlp::parallel(&[&Mlp::select(5, &[3]), &xi_of_state])?
        .then(&Mlp::linear(2, &[(vec![(0, 1.0), (1, -1.0)], 0.0)]))?;
    let profile = BurgersProfile::new(t)?;
    let profile_net = build_profile_net(&profile, eps)?;
    let projection = z.then(&profile_net)?;
    let model = FnoModel::new(lifting, layers, projection, 1, Activation::Relu)?;
    Ok(BurgFno { model, grid: Grid::new(n, TAU)?, eps, profile, xi_net, profile_net, warnings })
}

impl BurgFno {
    pub fn input(&self, xi: f64) -> Vec<f64> {
        sine_input(xi, &self.grid)
    }

    /// Hidden state after the Fourier layers, channel-major.
    pub fn hidden(&self, u: &[f64]) -> Result<Vec<f64>> {
        let tables = ModeTables::new(self.grid.n, 1);
        let mut v = self.model.lifting.eval_batch(&self.model.lifting_input(&self.grid, u)?, self.grid.n)?;
        for layer in &self.model.layers {
            v = self.model.layer_preactivation(layer, &v, &tables).into_iter().map(|z| z.max(0.0)).collect();
        }
        Ok(v)
    }

    /// Recovered `Ξ ≈ ξ` from the constant channels.
    pub fn phase(&self, u: &[f64]) -> Result<f64> {
        let v = self.hidden(u)?;
        let n = self.grid.n;
        Ok(self.xi_net.eval(&[v[0], v[n], v[2 * n]])?[0])
    }

    pub fn predict(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model.forward(&self.grid, u)?)
    }

    pub fn lattice(&self, k: usize) -> Result<ProfileLattice> {
        ProfileLattice::new(&self.profile_net, k)
    }

    /// `∫_0^{2π} |N(u)(x) - u(x, t)| dx` for the output read as a function of
    /// `x`: the hidden channels are constant apart from the carried
    /// coordinate, so `N(u)(x) = Φ(x - Ξ)`.
    pub fn l1_error(&self, xi: f64, lattice: &ProfileLattice) -> Result<f64> {
        Ok(lattice.l1_error(self.phase(&self.input(xi))?, xi, &self.profile))
    }

    pub fn operator_model(&self) -> OperatorModel {
        OperatorModel::Fno(self.model.clone())
    }
}
