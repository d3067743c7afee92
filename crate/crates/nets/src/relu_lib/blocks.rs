use super::matrix::Matrix;
use super::mlp::{Layer, Mlp};
use crate::NetError;

fn check_positive(name: &str, v: f64) -> Result<(), NetError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(NetError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Scalar net `x ↦ Σ_i c_i σ(w_i x + b_i) + d`.
fn scalar_units(units: &[(f64, f64, f64)], d: f64) -> Mlp {
    let n = units.len();
    let w = Matrix::from_triplets(n, 1, units.iter().enumerate().map(|(i, u)| (i, 0, u.0)));
    let c = Matrix::from_triplets(1, n, units.iter().enumerate().map(|(i, u)| (0, i, u.2)));
    Mlp::one_hidden(w, units.iter().map(|u| u.1).collect(), c, vec![d]).expect("consistent shapes")
}

/// Rises linearly from 0 at `xi` to `h` at `xi + delta`, constant elsewhere.
pub fn build_step(xi: f64, h: f64, delta: f64) -> Result<Mlp, NetError> {
    check_positive("delta", delta)?;
    Ok(scalar_units(&[(1.0 / delta, -xi / delta, h), (1.0 / delta, -xi / delta - 1.0, -h)], 0.0))
}

/// One on `[a + delta, b]`, zero outside `[a, b + delta]`, linear in between.
pub fn build_indicator(a: f64, b: f64, delta: f64) -> Result<Mlp, NetError> {
    check_positive("delta", delta)?;
    if b <= a || delta > (b - a) / 2.0 {
        return Err(NetError::Invalid(format!("indicator of [{a}, {b}] with ramp {delta}")));
    }
    let (s, t) = (1.0 / delta, 1.0);
    Ok(scalar_units(
        &[(s, -a * s, t), (s, -a * s - 1.0, -t), (s, -b * s, -t), (s, -b * s - 1.0, t)],
        0.0,
    ))
}

/// 0 below `lo`, 1 above `hi`, linear in between.
pub fn build_ramp(lo: f64, hi: f64) -> Result<Mlp, NetError> {
    check_positive("ramp width", hi - lo)?;
    let s = 1.0 / (hi - lo);
    Ok(scalar_units(&[(1.0, -lo, s), (1.0, -hi, -s)], 0.0))
}

/// Projection onto `[lo, hi]`.
pub fn build_clamp(lo: f64, hi: f64) -> Result<Mlp, NetError> {
    if !(hi >= lo) {
        return Err(NetError::Invalid(format!("clamp range [{lo}, {hi}]")));
    }
    Ok(scalar_units(&[(1.0, -lo, 1.0), (1.0, -hi, -1.0)], lo))
}

/// Partition of unity on `[a, b]` with `pieces` members.
///
/// Member `j` is `r_{j-1} - r_j` for ramps `r_j`: the outer ramps sit on
/// `[a - eps, a]` and `[b, b + eps]`, the interior ones on `[x_j - eps, x_j + eps]`
/// around the uniform knots. The sum is exactly one on `[a, b]` and member
/// `j` vanishes outside `[x_{j-1} - eps, x_j + eps]`.
pub fn build_partition(a: f64, b: f64, pieces: usize, eps: f64) -> Result<Mlp, NetError> {
    check_positive("eps", eps)?;
    if pieces == 0 || b <= a {
        return Err(NetError::Invalid(format!("partition of [{a}, {b}] into {pieces}")));
    }
    let dx = (b - a) / pieces as f64;
    if pieces > 1 && 2.0 * eps > dx {
        return Err(NetError::Invalid(format!("overlap {eps} too wide for spacing {dx}")));
    }
    let ramp = |j: usize| -> (f64, f64) {
        if j == 0 {
            (a - eps, a)
        } else if j == pieces {
            (b, b + eps)
        } else {
            let x = a + j as f64 * dx;
            (x - eps, x + eps)
        }
    };
    let mut w = Vec::new();
    let mut bias = Vec::new();
    let mut out = Vec::new();
    for j in 1..=pieces {
        for (k, sign) in [(j - 1, 1.0), (j, -1.0)] {
            let (lo, hi) = ramp(k);
            let s = sign / (hi - lo);
            let u = bias.len();
            w.push((u, 0, 1.0));
            bias.push(-lo);
            w.push((u + 1, 0, 1.0));
            bias.push(-hi);
            out.push((j - 1, u, s));
            out.push((j - 1, u + 1, -s));
        }
    }
    let n = bias.len();
    Mlp::one_hidden(Matrix::from_triplets(n, 1, w), bias, Matrix::from_triplets(pieces, n, out), vec![0.0; pieces])
}

/// Number of refinement levels needed by [`build_multiply`].
pub fn multiply_levels(m: f64, eps: f64) -> usize {
    // smallest s with (2M)² 4^{-s-1} ≤ eps
    let mut s = 0;
    while 4.0 * m * m * 0.25f64.powi(s as i32 + 1) > eps && s < 60 {
        s += 1;
    }
    s
}

/// Approximate product on `[-m, m]²` with sup error at most `eps`.
pub fn build_multiply(m: f64, eps: f64) -> Result<Mlp, NetError> {
    check_positive("m", m)?;
    check_positive("eps", eps)?;
    build_multiply_levels(m, multiply_levels(m, eps))
}

/// Product `xy = ((x+y)² - (x-y)²)/4` with each square replaced by the
/// `levels`-fold sawtooth approximation of `z²` on `[0, 1]` after scaling
/// by `2m`. With a zero factor the two squares cancel, so the result is
/// zero up to rounding.
pub fn build_multiply_levels(m: f64, levels: usize) -> Result<Mlp, NetError> {
    check_positive("m", m)?;
    let scale = 1.0 / (2.0 * m);
    // first layer: σ(±(x+y)/2m), σ(±(x-y)/2m)
    let first = Matrix::dense(4, 2, vec![scale, scale, -scale, -scale, scale, -scale, -scale, scale]);
    let mut layers = vec![Layer::new(first, vec![0.0; 4], true)];
    // (a, f) for each channel as rows over the previous activated units
    let mut a_rows: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0), (1, 1.0)], vec![(2, 1.0), (3, 1.0)]];
    let mut f_rows = a_rows.clone();
    for level in 1..=levels {
        let mut w = Vec::new();
        let mut bias = Vec::new();
        let mut next_a = Vec::new();
        let mut next_f = Vec::new();
        let q = 0.25f64.powi(level as i32);
        for ch in 0..2 {
            let base = 3 * ch;
            for &(c, v) in &a_rows[ch] {
                w.push((base, c, v));
                w.push((base + 1, c, v));
            }
            for &(c, v) in &f_rows[ch] {
                w.push((base + 2, c, v));
            }
            bias.extend([0.0, -0.5, 0.0]);
            next_a.push(vec![(base, 2.0), (base + 1, -4.0)]);
            next_f.push(vec![(base + 2, 1.0), (base, -2.0 * q), (base + 1, 4.0 * q)]);
        }
        let prev = layers.last().unwrap().out_dim();
        layers.push(Layer::new(Matrix::from_triplets(6, prev, w), bias, true));
        a_rows = next_a;
        f_rows = next_f;
    }
    let c = m * m; // (2m)²/4
    let prev = layers.last().unwrap().out_dim();
    let out = f_rows[0].iter().map(|&(k, v)| (0, k, c * v)).chain(f_rows[1].iter().map(|&(k, v)| (0, k, -c * v)));
    layers.push(Layer::new(Matrix::from_triplets(1, prev, out), vec![0.0], false));
    Mlp::new(layers)
}

/// Exact maximum of `k` inputs by a pairwise tournament.
pub fn build_maxpool(k: usize) -> Result<Mlp, NetError> {
    if k == 0 {
        return Err(NetError::Invalid("max over zero inputs".into()));
    }
    let mut layers = Vec::new();
    let mut n = k;
    while n > 1 {
        let pairs = n / 2;
        let mut w = Vec::new();
        let mut out = Vec::new();
        let mut u = 0;
        for p in 0..pairs {
            let (a, b) = (2 * p, 2 * p + 1);
            // max(a, b) = σ(a - b) + σ(b) - σ(-b)
            w.extend([(u, a, 1.0), (u, b, -1.0), (u + 1, b, 1.0), (u + 2, b, -1.0)]);
            out.extend([(p, u, 1.0), (p, u + 1, 1.0), (p, u + 2, -1.0)]);
            u += 3;
        }
        if n % 2 == 1 {
            w.extend([(u, n - 1, 1.0), (u + 1, n - 1, -1.0)]);
            out.extend([(pairs, u, 1.0), (pairs, u + 1, -1.0)]);
            u += 2;
        }
        let next = pairs + n % 2;
        layers.push(Layer::new(Matrix::from_triplets(u, n, w), vec![0.0; u], true));
        layers.push(Layer::new(Matrix::from_triplets(next, u, out), vec![0.0; next], false));
        n = next;
    }
    if layers.is_empty() {
        return Ok(Mlp::identity(1));
    }
    Mlp::new(layers)
}

/// Saturation used by [`build_blend`]; differences must stay below it.
pub const GATE_BOUND: f64 = 16.0;

/// Inputs `(β, v0, v1)`, output `v0 + G(β, v1 - v0)` where
/// `G(β, d) = σ(d - B(1-β)) - σ(-d - B(1-β))`. Equals `v0` at `β = 0` and `v1`
/// at `β = 1` whenever `|v1 - v0| ≤ B`; in between it lies between the two.
pub fn build_blend() -> Mlp {
    let b = GATE_BOUND;
    // units: σ(v1 - v0 + Bβ - B), σ(v0 - v1 + Bβ - B), σ(v0), σ(-v0)
    let w = Matrix::dense(4, 3, vec![b, -1.0, 1.0, b, 1.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0]);
    let c = Matrix::dense(1, 4, vec![1.0, -1.0, 1.0, -1.0]);
    Mlp::one_hidden(w, vec![-b, -b, 0.0, 0.0], c, vec![0.0]).expect("consistent shapes")
}
