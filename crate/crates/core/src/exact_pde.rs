//! Exact solutions for advection and periodic Burgers, plus first-order
//! finite-volume reference solvers for Burgers and the 1D Euler equations.

use crate::grid::{Grid, GridFunction};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("positivity lost in cell {cell} at t = {time:.6}")]
    PositivityLost { cell: usize, time: f64 },
    #[error("non-finite state at t = {0:.6}")]
    NonFinite(f64),
}

/// Box wave `h · 1_[-w/2, w/2](x - ξ)` on a periodic domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxWaveParams {
    pub h: f64,
    pub w: f64,
    pub xi: f64,
}

/// Signed periodic distance reduced to `[-period/2, period/2)`.
pub fn wrap_centered(d: f64, period: f64) -> f64 {
    (d + 0.5 * period).rem_euclid(period) - 0.5 * period
}

/// Pointwise box wave; the interval is closed.
pub fn box_value(params: &BoxWaveParams, x: f64, period: f64) -> f64 {
    if wrap_centered(x - params.xi, period).abs() <= 0.5 * params.w {
        params.h
    } else {
        0.0
    }
}

/// Exact advection solution `u(x, t) = u0(x - a t)` sampled on `grid`.
pub fn advect_exact(params: &BoxWaveParams, a: f64, t: f64, grid: &Grid) -> GridFunction {
    let shifted = BoxWaveParams { xi: params.xi + a * t, ..*params };
    GridFunction::from_fn(*grid, |x| box_value(&shifted, x, grid.period))
}

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_TOL: f64 = 1e-12;

/// Bisection for a function that is negative left of its root and
/// non-negative right of it on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo < BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Positive root of `x = t sin x` in `(0, π)` for `t > 1`, else 0.
pub fn burgers_xt(t: f64) -> f64 {
    if t <= 1.0 {
        return 0.0;
    }
    // x - t sin x is negative just right of 0 and equals π at π.
    bisect(f64::EPSILON, PI, |x| x - t * x.sin())
}

/// Inverse of `Ψ_t(x₀) = x₀ - t sin x₀` on `[x_t, 2π - x_t]`, for `x ∈ [0, 2π]`.
pub fn psi_inverse(x: f64, t: f64) -> f64 {
    let a = burgers_xt(t);
    let b = 2.0 * PI - a;
    if x <= 0.0 {
        return a;
    }
    if x >= 2.0 * PI {
        return b;
    }
    bisect(a, b, |z| z - t * z.sin() - x)
}

/// Entropy solution of Burgers with data `-sin(x - ξ)` on `[0, 2π)`.
///
/// After the shock forms (`t > 1`) it sits at `x = ξ`; that node takes the
/// mean of the two one-sided limits.
pub fn burgers_exact_at(x: f64, xi: f64, t: f64) -> f64 {
    let d = x - xi;
    if d == 0.0 && t > 1.0 {
        let right = -psi_inverse(0.0, t).sin();
        let left = -psi_inverse(2.0 * PI, t).sin();
        return 0.5 * (left + right);
    }
    if d < 0.0 {
        -psi_inverse(d + 2.0 * PI, t).sin()
    } else {
        -psi_inverse(d, t).sin()
    }
}

pub fn burgers_exact(xi: f64, t: f64, grid: &Grid) -> GridFunction {
    GridFunction::from_fn(*grid, |x| burgers_exact_at(x, xi, t))
}

fn godunov_flux(ul: f64, ur: f64) -> f64 {
    let left = 0.5 * ul.max(0.0).powi(2);
    let right = 0.5 * ur.min(0.0).powi(2);
    left.max(right)
}

/// First-order Godunov scheme for `u_t + (u²/2)_x = 0` with periodic cells
/// centred on the grid nodes.
pub fn burgers_fvm(u0: &GridFunction, t_final: f64, cfl: f64) -> Result<GridFunction, PdeError> {
    if !(t_final >= 0.0) || !(cfl > 0.0 && cfl <= 1.0) {
        return Err(PdeError::InvalidArgument(format!("t_final {t_final}, cfl {cfl}")));
    }
    let n = u0.grid.n;
    let dx = u0.grid.dx();
    let mut u = u0.values.clone();
    let mut flux = vec![0.0; n];
    let mut t = 0.0;
    while t < t_final {
        let umax = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !umax.is_finite() {
            return Err(PdeError::NonFinite(t));
        }
        if umax == 0.0 {
            break;
        }
        let dt = (cfl * dx / umax).min(t_final - t);
        // flux[j] sits at the interface between cells j and j+1
        for j in 0..n {
            flux[j] = godunov_flux(u[j], u[(j + 1) % n]);
        }
        let r = dt / dx;
        for j in 0..n {
            let left = flux[(j + n - 1) % n];
            u[j] -= r * (flux[j] - left);
        }
        t += dt;
    }
    Ok(GridFunction { grid: u0.grid, values: u })
}

/// Ratio of specific heats for the Euler solver.
pub const GAMMA: f64 = 1.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerState1D {
    pub rho: f64,
    pub m: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

impl EulerState1D {
    pub fn from_primitive(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, m: rho * u, e: 0.5 * rho * u * u + p / (GAMMA - 1.0) }
    }

    pub fn velocity(&self) -> f64 {
        self.m / self.rho
    }

    pub fn pressure(&self) -> f64 {
        (GAMMA - 1.0) * (self.e - 0.5 * self.m * self.m / self.rho)
    }

    pub fn sound_speed(&self) -> f64 {
        (GAMMA * self.pressure() / self.rho).sqrt()
    }

    fn flux(&self) -> [f64; 3] {
        let u = self.velocity();
        let p = self.pressure();
        [self.m, self.m * u + p, (self.e + p) * u]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero-gradient ghost cells.
    Transmissive,
    Periodic,
}

/// Conserved variables on a grid of cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerField {
    pub grid: Grid,
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    #[serde(rename = "E")]
    pub e: Vec<f64>,
}

impl EulerField {
    pub fn from_states(grid: Grid, states: &[EulerState1D]) -> Self {
        Self {
            grid,
            rho: states.iter().map(|s| s.rho).collect(),
            m: states.iter().map(|s| s.m).collect(),
            e: states.iter().map(|s| s.e).collect(),
        }
    }

    pub fn state(&self, j: usize) -> EulerState1D {
        EulerState1D { rho: self.rho[j], m: self.m[j], e: self.e[j] }
    }

    /// Two-state Riemann data: `left` for `x <= x0`, `right` otherwise.
    pub fn riemann(grid: Grid, left: EulerState1D, right: EulerState1D, x0: f64) -> Self {
        let states: Vec<EulerState1D> =
            grid.points().into_iter().map(|x| if x <= x0 { left } else { right }).collect();
        Self::from_states(grid, &states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerRun {
    pub field: EulerField,
    pub steps: usize,
    /// Set when a transmissive boundary cell moved away from its initial state.
    pub boundary_disturbed: bool,
}

fn rusanov(l: &EulerState1D, r: &EulerState1D) -> [f64; 3] {
    let fl = l.flux();
    let fr = r.flux();
    let s = (l.velocity().abs() + l.sound_speed()).max(r.velocity().abs() + r.sound_speed());
    let ul = [l.rho, l.m, l.e];
    let ur = [r.rho, r.m, r.e];
    let mut out = [0.0; 3];
    for q in 0..3 {
        out[q] = 0.5 * (fl[q] + fr[q]) - 0.5 * s * (ur[q] - ul[q]);
    }
    out
}

fn check_positive(field: &EulerField, time: f64) -> Result<(), PdeError> {
    for j in 0..field.grid.n {
        let s = field.state(j);
        if !(s.rho.is_finite() && s.m.is_finite() && s.e.is_finite()) {
            return Err(PdeError::NonFinite(time));
        }
        if s.rho <= 0.0 || s.pressure() <= 0.0 {
            return Err(PdeError::PositivityLost { cell: j, time });
        }
    }
    Ok(())
}

const BOUNDARY_TOL: f64 = 1e-12;

/// First-order Rusanov scheme for the 1D Euler equations.
pub fn euler_fvm(
    init: &EulerField,
    t_final: f64,
    cfl: f64,
    boundary: Boundary,
) -> Result<EulerRun, PdeError> {
    if !(t_final >= 0.0) || !(cfl > 0.0 && cfl <= 1.0) {
        return Err(PdeError::InvalidArgument(format!("t_final {t_final}, cfl {cfl}")));
    }
    let n = init.grid.n;
    if n < 2 {
        return Err(PdeError::InvalidArgument("need at least two cells".into()));
    }
    let dx = init.grid.dx();
    let mut field = init.clone();
    check_positive(&field, 0.0)?;
    let first = init.state(0);
    let last = init.state(n - 1);
    let mut boundary_disturbed = false;
    let mut fluxes = vec![[0.0; 3]; n + 1];
    let mut t = 0.0;
    let mut steps = 0;
    while t < t_final {
        let smax = (0..n)
            .map(|j| {
                let s = field.state(j);
                s.velocity().abs() + s.sound_speed()
            })
            .fold(0.0, f64::max);
        if !smax.is_finite() || smax <= 0.0 {
            return Err(PdeError::NonFinite(t));
        }
        let dt = (cfl * dx / smax).min(t_final - t);
        // fluxes[i] is the interface left of cell i
        for (i, f) in fluxes.iter_mut().enumerate() {
            let (l, r) = match boundary {
                Boundary::Periodic => (field.state((i + n - 1) % n), field.state(i % n)),
                Boundary::Transmissive => {
                    (field.state(i.saturating_sub(1)), field.state(i.min(n - 1)))
                }
            };
            *f = rusanov(&l, &r);
        }
        let r = dt / dx;
        for j in 0..n {
            field.rho[j] -= r * (fluxes[j + 1][0] - fluxes[j][0]);
            field.m[j] -= r * (fluxes[j + 1][1] - fluxes[j][1]);
            field.e[j] -= r * (fluxes[j + 1][2] - fluxes[j][2]);
        }
        t += dt;
        steps += 1;
        check_positive(&field, t)?;
        if boundary == Boundary::Transmissive && !boundary_disturbed {
            boundary_disturbed = state_moved(&first, &field.state(0))
                || state_moved(&last, &field.state(n - 1));
        }
    }
    Ok(EulerRun { field, steps, boundary_disturbed })
}

fn state_moved(a: &EulerState1D, b: &EulerState1D) -> bool {
    let d = (a.rho - b.rho).abs() + (a.m - b.m).abs() + (a.e - b.e).abs();
    d > BOUNDARY_TOL * (1.0 + a.rho.abs() + a.m.abs() + a.e.abs())
}
