//! Flat parameter views and L1 loss gradients for the operator models.

use super::mlp_grad::{backward, forward_tape, gemm, Tape};
use crate::operator_nets::{encode_sensors, FnoLayer, FnoModel, ModeTables, OperatorModel, Trunk};
use crate::relu_lib::{Matrix, Mlp};
use crate::NetError;
use hyperop_core::grid::Grid;
use num_complex::Complex64;

fn nets(model: &OperatorModel) -> Vec<&Mlp> {
    match model {
        OperatorModel::DeepOnet(m) => vec![&m.branch, &m.trunk],
        OperatorModel::ShiftDeepOnet(m) => {
            let mut v = vec![&m.branch];
            match &m.trunk {
                Trunk::Shared(t) => v.push(t),
                Trunk::PerTerm(ts) => v.extend(ts.iter()),
            }
            v.push(&m.scale_net);
            v.push(&m.shift_net);
            v
        }
        OperatorModel::Fno(_) => unreachable!(),
    }
}

fn nets_mut(model: &mut OperatorModel) -> Vec<&mut Mlp> {
    match model {
        OperatorModel::DeepOnet(m) => vec![&mut m.branch, &mut m.trunk],
        OperatorModel::ShiftDeepOnet(m) => {
            let mut v = vec![&mut m.branch];
            match &mut m.trunk {
                Trunk::Shared(t) => v.push(t),
                Trunk::PerTerm(ts) => v.extend(ts.iter_mut()),
            }
            v.push(&mut m.scale_net);
            v.push(&mut m.shift_net);
            v
        }
        OperatorModel::Fno(_) => unreachable!(),
    }
}

fn fno_layer_count(l: &FnoLayer) -> usize {
    l.w.values().len() + 2 * l.p.len() + 2 * l.bias_hat.len()
}

/// All trainable parameters. Order: DeepONet branch, trunk; shift-DeepONet
/// branch, trunk(s), scale, shift; FNO lifting, then per layer `W`, `P`
/// (re, im interleaved), `b̂` (re, im), then projection.
pub fn model_params(model: &OperatorModel) -> Vec<f64> {
    match model {
        OperatorModel::Fno(m) => {
            let mut out = m.lifting.params();
            for l in &m.layers {
                out.extend_from_slice(l.w.values());
                out.extend(l.p.iter().flat_map(|c| [c.re, c.im]));
                out.extend(l.bias_hat.iter().flat_map(|c| [c.re, c.im]));
            }
            out.extend(m.projection.params());
            out
        }
        _ => nets(model).iter().flat_map(|n| n.params()).collect(),
    }
}

pub fn param_count(model: &OperatorModel) -> usize {
    match model {
        OperatorModel::Fno(m) => {
            m.lifting.param_count()
                + m.layers.iter().map(fno_layer_count).sum::<usize>()
                + m.projection.param_count()
        }
        _ => nets(model).iter().map(|n| n.param_count()).sum(),
    }
}

pub fn set_model_params(model: &mut OperatorModel, src: &[f64]) {
    assert_eq!(src.len(), param_count(model), "parameter vector length");
    match model {
        OperatorModel::Fno(m) => {
            let mut k = m.lifting.set_params(src);
            for l in &mut m.layers {
                let w = l.w.values_mut();
                w.copy_from_slice(&src[k..k + w.len()]);
                k += w.len();
                for c in l.p.iter_mut().chain(l.bias_hat.iter_mut()) {
                    *c = Complex64::new(src[k], src[k + 1]);
                    k += 2;
                }
            }
            m.projection.set_params(&src[k..]);
        }
        _ => {
            let mut k = 0;
            for n in nets_mut(model) {
                k += n.set_params(&src[k..]);
            }
        }
    }
}

/// Mean absolute error and `∂L/∂pred` (subgradient 0 at a tie).
fn l1(preds: &[f64], targets: &[f64], total: usize) -> (f64, Vec<f64>) {
    let scale = 1.0 / total as f64;
    let mut loss = 0.0;
    let d = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let r = p - t;
            loss += r.abs();
            if r > 0.0 {
                scale
            } else if r < 0.0 {
                -scale
            } else {
                0.0
            }
        })
        .collect();
    (loss * scale, d)
}

/// L1 loss over a batch, averaged over samples and output nodes, and its
/// gradient in [`model_params`] order.
pub fn loss_and_grad(
    model: &OperatorModel,
    grid: &Grid,
    inputs: &[&[f64]],
    targets: &[&[f64]],
) -> Result<(f64, Vec<f64>), NetError> {
    if inputs.len() != targets.len() || inputs.is_empty() {
        return Err(NetError::Dimension("batch inputs and targets differ in count".into()));
    }
    match model {
        OperatorModel::DeepOnet(_) | OperatorModel::ShiftDeepOnet(_) => don_loss_and_grad(model, grid, inputs, targets),
        OperatorModel::Fno(m) => fno_loss_and_grad(m, grid, inputs, targets),
    }
}

/// Branch-side input: sensor values, unit-major over the batch.
fn encode_batch(grid: &Grid, inputs: &[&[f64]], channels: usize, sensors: &crate::operator_nets::Sensors) -> Result<Vec<f64>, NetError> {
    let b = inputs.len();
    let m = sensors.len() * channels;
    let mut e = vec![0.0; m * b];
    for (s, u) in inputs.iter().enumerate() {
        for (i, v) in encode_sensors(grid, u, channels, sensors)?.into_iter().enumerate() {
            e[i * b + s] = v;
        }
    }
    Ok(e)
}

fn don_loss_and_grad(
    model: &OperatorModel,
    grid: &Grid,
    inputs: &[&[f64]],
    targets: &[&[f64]],
) -> Result<(f64, Vec<f64>), NetError> {
    let n = grid.n;
    let bsz = inputs.len();
    if targets.iter().any(|t| t.len() != n) {
        return Err(NetError::Dimension("DeepONet targets must have one channel on the grid".into()));
    }
    let ys = grid.points();
    let flat_targets: Vec<f64> = targets.iter().flat_map(|t| t.iter().copied()).collect();
    let list = nets(model);
    let counts: Vec<usize> = list.iter().map(|n| n.param_count()).collect();
    let mut grad = vec![0.0; counts.iter().sum()];
    let mut offsets = vec![0];
    for c in &counts {
        offsets.push(offsets.last().unwrap() + c);
    }
    let slot = |i: usize| -> (usize, usize) { (offsets[i], offsets[i + 1]) };

    match model {
        OperatorModel::DeepOnet(m) => {
            let p = m.p();
            let e = encode_batch(grid, inputs, m.channels, &m.sensors)?;
            let tb = forward_tape(&m.branch, &e, bsz);
            let tt = forward_tape(&m.trunk, &ys, n);
            let (beta, tau) = (tb.output(), tt.output());
            let mut pred = vec![0.0; bsz * n];
            gemm(bsz, p, n, beta, (1, bsz), tau, (n, 1), 0.0, &mut pred, (n, 1));
            let (loss, dp) = l1(&pred, &flat_targets, bsz * n);
            let mut dbeta = vec![0.0; p * bsz];
            gemm(p, n, bsz, tau, (n, 1), &dp, (1, n), 0.0, &mut dbeta, (bsz, 1));
            let mut dtau = vec![0.0; p * n];
            gemm(p, bsz, n, beta, (bsz, 1), &dp, (n, 1), 0.0, &mut dtau, (n, 1));
            let (a, b) = slot(0);
            backward(&m.branch, &tb, dbeta, &mut grad[a..b], false);
            let (a, b) = slot(1);
            backward(&m.trunk, &tt, dtau, &mut grad[a..b], false);
            Ok((loss, grad))
        }
        OperatorModel::ShiftDeepOnet(m) => {
            let p = m.p();
            let e = encode_batch(grid, inputs, m.channels, &m.sensors)?;
            let tb = forward_tape(&m.branch, &e, bsz);
            let ta = forward_tape(&m.scale_net, &e, bsz);
            let tg = forward_tape(&m.shift_net, &e, bsz);
            let (beta, scale, shift) = (tb.output(), ta.output(), tg.output());
            let bn = bsz * n;
            let mut pred = vec![0.0; bn];
            let mut term_tapes: Vec<Tape> = Vec::with_capacity(p);
            for k in 0..p {
                let mut z = vec![0.0; bn];
                for b in 0..bsz {
                    let (a, g) = (scale[k * bsz + b], shift[k * bsz + b]);
                    for j in 0..n {
                        z[b * n + j] = a * ys[j] + g;
                    }
                }
                let (net, row) = match &m.trunk {
                    Trunk::Shared(t) => (t, k),
                    Trunk::PerTerm(ts) => (&ts[k], 0),
                };
                let tape = forward_tape(net, &z, bn);
                let out = &tape.output()[row * bn..(row + 1) * bn];
                for b in 0..bsz {
                    let bk = beta[k * bsz + b];
                    for j in 0..n {
                        pred[b * n + j] += bk * out[b * n + j];
                    }
                }
                term_tapes.push(tape);
            }
            let (loss, dp) = l1(&pred, &flat_targets, bn);
            let mut dbeta = vec![0.0; p * bsz];
            let mut dscale = vec![0.0; p * bsz];
            let mut dshift = vec![0.0; p * bsz];
            for (k, tape) in term_tapes.iter().enumerate() {
                let (net, row, idx) = match &m.trunk {
                    Trunk::Shared(t) => (t, k, 1),
                    Trunk::PerTerm(ts) => (&ts[k], 0, 1 + k),
                };
                let out = &tape.output()[row * bn..(row + 1) * bn];
                let mut dt = vec![0.0; net.out_dim() * bn];
                for b in 0..bsz {
                    let bk = beta[k * bsz + b];
                    let mut acc = 0.0;
                    for j in 0..n {
                        let g = dp[b * n + j];
                        acc += g * out[b * n + j];
                        dt[row * bn + b * n + j] = bk * g;
                    }
                    dbeta[k * bsz + b] = acc;
                }
                let (a, b) = slot(idx);
                let dz = backward(net, tape, dt, &mut grad[a..b], true).unwrap();
                for b in 0..bsz {
                    let (mut da, mut dg) = (0.0, 0.0);
                    for j in 0..n {
                        da += dz[b * n + j] * ys[j];
                        dg += dz[b * n + j];
                    }
                    dscale[k * bsz + b] = da;
                    dshift[k * bsz + b] = dg;
                }
            }
            let last = list.len();
            let (a, b) = slot(0);
            backward(&m.branch, &tb, dbeta, &mut grad[a..b], false);
            let (a, b) = slot(last - 2);
            backward(&m.scale_net, &ta, dscale, &mut grad[a..b], false);
            let (a, b) = slot(last - 1);
            backward(&m.shift_net, &tg, dshift, &mut grad[a..b], false);
            Ok((loss, grad))
        }
        OperatorModel::Fno(_) => unreachable!(),
    }
}

/// Column `k` of the `n × 2(K+1)` table holds `cos(2πkj/n)`, column
/// `K+1+k` holds `sin(2πkj/n)`.
fn mode_matrix(t: &ModeTables) -> Vec<f64> {
    let (n, q) = (t.n, t.k_max + 1);
    let mut m = vec![0.0; n * 2 * q];
    for k in 0..q {
        for j in 0..n {
            m[j * 2 * q + k] = t.cos[k * n + j];
            m[j * 2 * q + q + k] = t.sin[k * n + j];
        }
    }
    m
}

struct LayerCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    v_re: Vec<f64>,
    v_im: Vec<f64>,
}

fn fno_loss_and_grad(
    model: &FnoModel,
    grid: &Grid,
    inputs: &[&[f64]],
    targets: &[&[f64]],
) -> Result<(f64, Vec<f64>), NetError> {
    model.check_grid(grid)?;
    let (n, d, kk) = (grid.n, model.d_v, model.k_max);
    let q = kk + 1;
    let bsz = inputs.len();
    let rows = bsz * d;
    let tables = ModeTables::new(n, kk);
    let tm = mode_matrix(&tables);
    let inv_n = 1.0 / n as f64;

    // lifting, per sample
    let mut lift_tapes = Vec::with_capacity(bsz);
    let mut x = Vec::with_capacity(rows * n);
    for u in inputs {
        let tape = forward_tape(&model.lifting, &model.lifting_input(grid, u)?, n);
        x.extend_from_slice(tape.output());
        lift_tapes.push(tape);
    }

    let mut caches = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let mut mm = vec![0.0; rows * 2 * q];
        gemm(rows, n, 2 * q, &x, (n, 1), &tm, (2 * q, 1), 0.0, &mut mm, (2 * q, 1));
        let mut v_re = vec![0.0; rows * q];
        let mut v_im = vec![0.0; rows * q];
        for r in 0..rows {
            for k in 0..q {
                v_re[r * q + k] = mm[r * 2 * q + k] * inv_n;
                v_im[r * q + k] = -mm[r * 2 * q + q + k] * inv_n;
            }
        }
        // Y' rows hold (Re Y_0, 2 Re Y_k, 0, -2 Im Y_k)
        let mut yp = vec![0.0; rows * 2 * q];
        for b in 0..bsz {
            for i in 0..d {
                let r = b * d + i;
                for k in 0..q {
                    let mut acc = layer.bias_hat[k * d + i];
                    for j in 0..d {
                        let pk = layer.p_at(d, k, i, j);
                        let (vr, vi) = (v_re[(b * d + j) * q + k], v_im[(b * d + j) * q + k]);
                        if k == 0 {
                            acc.re += pk.re * vr;
                        } else {
                            acc += pk * Complex64::new(vr, vi);
                        }
                    }
                    if k == 0 {
                        yp[r * 2 * q] = acc.re;
                    } else {
                        yp[r * 2 * q + k] = 2.0 * acc.re;
                        yp[r * 2 * q + q + k] = -2.0 * acc.im;
                    }
                }
            }
        }
        let mut z = vec![0.0; rows * n];
        gemm(rows, 2 * q, n, &yp, (2 * q, 1), &tm, (1, 2 * q), 0.0, &mut z, (n, 1));
        let w = layer.w.to_dense_vec();
        for b in 0..bsz {
            let xb = &x[b * d * n..(b + 1) * d * n];
            gemm(d, d, n, &w, (d, 1), xb, (n, 1), 1.0, &mut z[b * d * n..(b + 1) * d * n], (n, 1));
        }
        let next: Vec<f64> = z.iter().map(|v| model.activation.apply(*v)).collect();
        caches.push(LayerCache { input: std::mem::replace(&mut x, next), pre: z, v_re, v_im });
    }

    // projection and loss
    let mut proj_tapes = Vec::with_capacity(bsz);
    let mut preds = Vec::new();
    for b in 0..bsz {
        let tape = forward_tape(&model.projection, &x[b * d * n..(b + 1) * d * n], n);
        if tape.output().len() != targets[b].len() {
            return Err(NetError::Dimension("FNO output and target lengths differ".into()));
        }
        preds.extend_from_slice(tape.output());
        proj_tapes.push(tape);
    }
    let flat_targets: Vec<f64> = targets.iter().flat_map(|t| t.iter().copied()).collect();
    let (loss, dp) = l1(&preds, &flat_targets, preds.len());

    let n_lift = model.lifting.param_count();
    let n_layers: usize = model.layers.iter().map(fno_layer_count).sum();
    let mut grad = vec![0.0; n_lift + n_layers + model.projection.param_count()];
    let out_len = preds.len() / bsz;
    let mut dx = vec![0.0; rows * n];
    {
        let g = &mut grad[n_lift + n_layers..];
        for b in 0..bsz {
            let d_out = dp[b * out_len..(b + 1) * out_len].to_vec();
            let dxb = backward(&model.projection, &proj_tapes[b], d_out, g, true).unwrap();
            dx[b * d * n..(b + 1) * d * n].copy_from_slice(&dxb);
        }
    }

    let mut layer_off = Vec::with_capacity(model.layers.len());
    let mut off = n_lift;
    for l in &model.layers {
        layer_off.push(off);
        off += fno_layer_count(l);
    }
    for (li, layer) in model.layers.iter().enumerate().rev() {
        let c = &caches[li];
        let g: Vec<f64> = dx.iter().zip(&c.pre).map(|(dv, z)| dv * model.activation.derivative(*z)).collect();
        let nw = layer.w.values().len();
        let np = layer.p.len();
        let base = layer_off[li];

        // W
        let w = layer.w.to_dense_vec();
        let mut dw = vec![0.0; d * d];
        let mut dprev = vec![0.0; rows * n];
        for b in 0..bsz {
            let gb = &g[b * d * n..(b + 1) * d * n];
            let xb = &c.input[b * d * n..(b + 1) * d * n];
            gemm(d, n, d, gb, (n, 1), xb, (1, n), 1.0, &mut dw, (d, 1));
            gemm(d, d, n, &w, (1, d), gb, (n, 1), 0.0, &mut dprev[b * d * n..(b + 1) * d * n], (n, 1));
        }
        match &layer.w {
            Matrix::Dense { .. } => {
                for (a, v) in grad[base..base + nw].iter_mut().zip(&dw) {
                    *a += v;
                }
            }
            Matrix::Sparse { indptr, indices, .. } => {
                for r in 0..d {
                    for k in indptr[r]..indptr[r + 1] {
                        grad[base + k] += dw[r * d + indices[k]];
                    }
                }
            }
        }

        // spectral part
        let mut h = vec![0.0; rows * 2 * q];
        gemm(rows, n, 2 * q, &g, (n, 1), &tm, (2 * q, 1), 0.0, &mut h, (2 * q, 1));
        let mut dv = vec![0.0; rows * 2 * q];
        let (gp, gbias) = grad[base + nw..base + nw + 2 * np + 2 * q * d].split_at_mut(2 * np);
        for b in 0..bsz {
            for i in 0..d {
                let r = b * d + i;
                for k in 0..q {
                    let (dyr, dyi) = if k == 0 {
                        (h[r * 2 * q], 0.0)
                    } else {
                        (2.0 * h[r * 2 * q + k], -2.0 * h[r * 2 * q + q + k])
                    };
                    gbias[2 * (k * d + i)] += dyr;
                    gbias[2 * (k * d + i) + 1] += dyi;
                    for j in 0..d {
                        let pk = layer.p_at(d, k, i, j);
                        let rj = b * d + j;
                        let (vr, vi) = (c.v_re[rj * q + k], c.v_im[rj * q + k]);
                        let pi = 2 * ((k * d + i) * d + j);
                        if k == 0 {
                            gp[pi] += dyr * vr;
                            dv[rj * 2 * q] += pk.re * dyr;
                        } else {
                            gp[pi] += dyr * vr + dyi * vi;
                            gp[pi + 1] += -dyr * vi + dyi * vr;
                            dv[rj * 2 * q + k] += dyr * pk.re + dyi * pk.im;
                            dv[rj * 2 * q + q + k] += -dyr * pk.im + dyi * pk.re;
                        }
                    }
                }
            }
        }
        // back through v̂: d x_j += (dv_re c_kj - dv_im s_kj)/n
        for r in 0..rows {
            for k in 0..q {
                dv[r * 2 * q + k] *= inv_n;
                dv[r * 2 * q + q + k] *= -inv_n;
            }
        }
        gemm(rows, 2 * q, n, &dv, (2 * q, 1), &tm, (1, 2 * q), 1.0, &mut dprev, (n, 1));
        dx = dprev;
    }

    let g = &mut grad[..n_lift];
    for b in 0..bsz {
        backward(&model.lifting, &lift_tapes[b], dx[b * d * n..(b + 1) * d * n].to_vec(), g, false);
    }
    Ok((loss, grad))
}
