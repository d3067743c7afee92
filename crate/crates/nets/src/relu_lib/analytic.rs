use super::blocks::{build_clamp, build_multiply, build_partition};
use super::matrix::Matrix;
use super::mlp::Mlp;
use crate::NetError;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileStrategy {
    /// Local Chebyshev interpolants glued by a partition of unity.
    Chebyshev,
    /// Continuous piecewise-linear interpolant on uniform knots.
    PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub strategy: CompileStrategy,
    pub subintervals: usize,
    /// Polynomial degree per subinterval (all 1 for piecewise-linear).
    pub degrees: Vec<usize>,
    /// Accuracy requested from each product block; 0 if none was used.
    pub eps_mul: f64,
    /// Sup error over the verification grid.
    pub sup_error: f64,
    pub depth: usize,
    pub width: usize,
}

const MAX_DEGREE: usize = 48;
const MAX_PIECES: usize = 1 << 14;
const VERIFY_POINTS: usize = 1000;
const MAX_REFINEMENTS: usize = 30;

/// ReLU net approximating `f` on `[alpha, beta]` to sup error `eps`
/// (checked on a uniform verification grid). Inputs outside the interval
/// are clamped to it, except when `f` is affine.
pub fn compile_analytic(
    f: &dyn Fn(f64) -> f64,
    range: [f64; 2],
    eps: f64,
    strategy: CompileStrategy,
) -> Result<(Mlp, CompileReport), NetError> {
    let [alpha, beta] = range;
    if !(beta > alpha) || !alpha.is_finite() || !beta.is_finite() {
        return Err(NetError::Invalid(format!("interval [{alpha}, {beta}]")));
    }
    if !(eps > 0.0) {
        return Err(NetError::Invalid(format!("eps = {eps}")));
    }
    let grid = verify_grid(alpha, beta, VERIFY_POINTS);
    let target = sample(f, &grid)?;

    let (fa, fb) = (target[0], target[VERIFY_POINTS - 1]);
    let slope = (fb - fa) / (beta - alpha);
    let affine_err = grid.iter().zip(&target).map(|(x, y)| (fa + slope * (x - alpha) - y).abs()).fold(0.0, f64::max);
    if affine_err <= eps * 1e-3 {
        let net = Mlp::affine(Matrix::dense(1, 1, vec![slope]), vec![fa - slope * alpha]);
        let report = CompileReport {
            strategy,
            subintervals: 1,
            degrees: vec![1],
            eps_mul: 0.0,
            sup_error: affine_err,
            depth: 0,
            width: 0,
        };
        return Ok((net, report));
    }

    match strategy {
        CompileStrategy::PiecewiseLinear => compile_pl(f, alpha, beta, eps),
        CompileStrategy::Chebyshev => compile_chebyshev(f, alpha, beta, eps, &grid, &target),
    }
}

fn verify_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn sample(f: &dyn Fn(f64) -> f64, xs: &[f64]) -> Result<Vec<f64>, NetError> {
    xs.iter()
        .map(|&x| {
            let y = f(x);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(NetError::NonFinite(x))
            }
        })
        .collect()
}

fn sup_error(net: &Mlp, xs: &[f64], target: &[f64]) -> Result<f64, NetError> {
    let y = net.eval_batch(xs, xs.len())?;
    Ok(y.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn compile_pl(f: &dyn Fn(f64) -> f64, alpha: f64, beta: f64, eps: f64) -> Result<(Mlp, CompileReport), NetError> {
    let mut k = 4;
    let mut best = f64::INFINITY;
    while k <= MAX_PIECES {
        let knots = verify_grid(alpha, beta, k + 1);
        let vals = sample(f, &knots)?;
        let slopes: Vec<f64> = (0..k).map(|i| (vals[i + 1] - vals[i]) / (knots[i + 1] - knots[i])).collect();
        // y = f(α) + Σ_i (s_i - s_{i-1}) σ(x - x_i) on the clamped input, with s_{-1} = 0;
        // the last unit σ(x - β) cancels the slope beyond β.
        let mut units = Vec::with_capacity(k + 1);
        let mut prev = 0.0;
        for i in 0..k {
            units.push((knots[i], slopes[i] - prev));
            prev = slopes[i];
        }
        units.push((beta, -prev));
        let n = units.len();
        let w = Matrix::dense(n, 1, vec![1.0; n]);
        let c = Matrix::dense(1, n, units.iter().map(|u| u.1).collect());
        let net = Mlp::one_hidden(w, units.iter().map(|u| -u.0).collect(), c, vec![vals[0]])?;
        let check = verify_grid(alpha, beta, (8 * k).max(VERIFY_POINTS));
        let err = sup_error(&net, &check, &sample(f, &check)?)?;
        best = best.min(err);
        if err <= eps {
            let report = CompileReport {
                strategy: CompileStrategy::PiecewiseLinear,
                subintervals: k,
                degrees: vec![1; k],
                eps_mul: 0.0,
                sup_error: err,
                depth: net.depth(),
                width: net.width(),
            };
            return Ok((net, report));
        }
        k *= 2;
    }
    Err(NetError::Tolerance { target: eps, best })
}

/// Chebyshev coefficients of the degree-`n` interpolant at first-kind nodes.
fn cheb_coeffs(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, NetError> {
    let m = n + 1;
    let theta: Vec<f64> = (0..m).map(|j| PI * (j as f64 + 0.5) / m as f64).collect();
    let xs: Vec<f64> = theta.iter().map(|t| 0.5 * (lo + hi) + 0.5 * (hi - lo) * t.cos()).collect();
    let vals = sample(f, &xs)?;
    Ok((0..m)
        .map(|k| {
            let s: f64 = vals.iter().zip(&theta).map(|(v, t)| v * (k as f64 * t).cos()).sum();
            let c = 2.0 * s / m as f64;
            if k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect())
}

fn cheb_eval(c: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + t * b1 - b2
}

/// Largest |b_k| met by the Clenshaw recurrence over `t ∈ [-1, 1]`.
fn clenshaw_bound(c: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..=400 {
        let t = -1.0 + 2.0 * i as f64 / 400.0;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c.iter().skip(1).rev() {
            let b0 = ck + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
            m = m.max(b0.abs());
        }
    }
    m
}

struct Piece {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

fn choose_pieces(
    f: &dyn Fn(f64) -> f64,
    alpha: f64,
    beta: f64,
    eps: f64,
) -> Result<(Vec<Piece>, f64), NetError> {
    let mut j = 4;
    let mut best = f64::INFINITY;
    while j <= MAX_PIECES {
        let dx = (beta - alpha) / j as f64;
        let overlap = dx / 4.0;
        let mut pieces = Vec::with_capacity(j);
        let mut ok = true;
        for p in 0..j {
            let lo = (alpha + p as f64 * dx - overlap).max(alpha);
            let hi = (alpha + (p + 1) as f64 * dx + overlap).min(beta);
            let check = verify_grid(lo, hi, 200);
            let want = sample(f, &check)?;
            let mut found = None;
            for n in 1..=MAX_DEGREE {
                let c = cheb_coeffs(f, lo, hi, n)?;
                let err = check
                    .iter()
                    .zip(&want)
                    .map(|(x, y)| (cheb_eval(&c, (2.0 * x - lo - hi) / (hi - lo)) - y).abs())
                    .fold(0.0, f64::max);
                if err <= eps / 4.0 {
                    found = Some(c);
                    break;
                }
                if n == MAX_DEGREE {
                    best = best.min(err);
                }
            }
            match found {
                Some(coeffs) => pieces.push(Piece { lo, hi, coeffs }),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok((pieces, overlap));
        }
        j *= 2;
    }
    Err(NetError::Tolerance { target: eps, best })
}

/// Net `c ↦ p(t)` with `t = clamp((2c - lo - hi)/(hi - lo), -1, 1)`.
fn piece_net(piece: &Piece, eps_mul: f64) -> Result<Mlp, NetError> {
    let (lo, hi) = (piece.lo, piece.hi);
    let to_t = Mlp::affine(Matrix::dense(1, 1, vec![2.0 / (hi - lo)]), vec![-(lo + hi) / (hi - lo)]);
    let t_net = to_t.then(&build_clamp(-1.0, 1.0)?)?;
    let c = &piece.coeffs;
    let n = c.len() - 1;
    if n == 1 {
        return t_net.then(&Mlp::affine(Matrix::dense(1, 1, vec![c[1]]), vec![c[0]]));
    }
    let m = (clenshaw_bound(c) * 1.1).max(1.0);
    let mul = build_multiply(m, eps_mul)?;
    // state (t, b_{k+1}, b_{k+2}), starting from b_n = c_n and b_{n-1} = c_{n-1} + 2 c_n t
    let start = Mlp::linear(1, &[(vec![(0, 1.0)], 0.0), (vec![(0, 2.0 * c[n])], c[n - 1]), (vec![], c[n])]);
    let mut net = t_net.then(&start)?;
    let carry_t = Mlp::select(3, &[0]);
    let carry_b1 = Mlp::select(3, &[1]);
    let carry_b2 = Mlp::select(3, &[2]);
    let product = Mlp::select(3, &[0, 1]).then(&mul)?;
    let step = Mlp::parallel(&[&carry_t, &product, &carry_b1, &carry_b2])?;
    for k in (1..n - 1).rev() {
        // inputs (t, t·b_{k+1}, b_{k+1}, b_{k+2}) → (t, b_k, b_{k+1})
        let update =
            Mlp::linear(4, &[(vec![(0, 1.0)], 0.0), (vec![(1, 2.0), (3, -1.0)], c[k]), (vec![(2, 1.0)], 0.0)]);
        net = net.then(&step)?.then(&update)?;
    }
    // p = c_0 + t b_1 - b_2
    let finish = Mlp::linear(4, &[(vec![(1, 1.0), (3, -1.0)], c[0])]);
    net.then(&step)?.then(&finish)
}

fn compile_chebyshev(
    f: &dyn Fn(f64) -> f64,
    alpha: f64,
    beta: f64,
    eps: f64,
    grid: &[f64],
    target: &[f64],
) -> Result<(Mlp, CompileReport), NetError> {
    let (pieces, overlap) = choose_pieces(f, alpha, beta, eps)?;
    let j = pieces.len();
    let max_deg = pieces.iter().map(|p| p.coeffs.len() - 1).max().unwrap();
    let f_bound = target.iter().fold(0.0f64, |m, v| m.max(v.abs())) + eps;
    let clamp = build_clamp(alpha, beta)?;
    let partition = build_partition(alpha, beta, j, overlap)?;
    let glue_m = f_bound.max(1.0) * 1.1;
    let mut eps_mul = eps / (8.0 * (max_deg as f64 + 2.0) * f_bound.max(1.0));
    let mut best = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        let mut branches: Vec<Mlp> = vec![partition.clone()];
        for p in &pieces {
            branches.push(piece_net(p, eps_mul)?);
        }
        let refs: Vec<&Mlp> = branches.iter().collect();
        let body = Mlp::parallel(&refs)?;
        // reorder to (Λ_1, p_1, Λ_2, p_2, ...) and multiply pairwise
        let order: Vec<usize> = (0..j).flat_map(|i| [i, j + i]).collect();
        let glue = build_multiply(glue_m, eps / 4.0)?;
        let muls: Vec<&Mlp> = (0..j).map(|_| &glue).collect();
        let total = Mlp::linear(j, &[((0..j).map(|i| (i, 1.0)).collect(), 0.0)]);
        let net = clamp
            .then(&body)?
            .then(&Mlp::select(2 * j, &order))?
            .then(&Mlp::stack(&muls)?)?
            .then(&total)?;
        let err = sup_error(&net, grid, target)?;
        best = best.min(err);
        if err <= eps {
            let report = CompileReport {
                strategy: CompileStrategy::Chebyshev,
                subintervals: j,
                degrees: pieces.iter().map(|p| p.coeffs.len() - 1).collect(),
                eps_mul,
                sup_error: err,
                depth: net.depth(),
                width: net.width(),
            };
            return Ok((net, report));
        }
        eps_mul /= 2.0;
    }
    Err(NetError::Tolerance { target: eps, best })
}

/// Approximate quotient `x / y` for `x, y ∈ [a, b]` with `0 < a ≤ b`.
pub fn build_divide(a: f64, b: f64, eps: f64) -> Result<Mlp, NetError> {
    build_divide_ranges([a, b], [a, b], eps)
}

/// Approximate quotient on `num ∈ [n0, n1]`, `den ∈ [d0, d1]` with `d0 > 0`.
/// Inputs are `(numerator, denominator)`.
pub fn build_divide_ranges(num: [f64; 2], den: [f64; 2], eps: f64) -> Result<Mlp, NetError> {
    if !(den[0] > 0.0 && den[1] >= den[0]) {
        return Err(NetError::Invalid(format!("denominator range {den:?} must be positive")));
    }
    let r = num[0].abs().max(num[1].abs());
    let recip = if den[1] > den[0] {
        compile_analytic(&|x| 1.0 / x, den, eps / (4.0 * r.max(1.0)), CompileStrategy::Chebyshev)?.0
    } else {
        Mlp::constant(1, vec![1.0 / den[0]])
    };
    let m = 2.0f64.max(r).max(1.0 / den[0]) * 1.01;
    let mul = build_multiply(m, eps / 2.0)?;
    Mlp::stack(&[&Mlp::identity(1), &recip])?.then(&mul)
}
