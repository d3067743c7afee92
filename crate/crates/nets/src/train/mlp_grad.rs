//! Reverse mode through a [`Mlp`] evaluated on a batch (unit-major layout).

use crate::relu_lib::{Matrix, Mlp};

/// `C = A·B + beta·C` with explicit strides (row stride, column stride).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                c[i * rsc + j * csc] *= beta;
            }
        }
        return;
    }
    debug_assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the asserted extents keep every access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Layer inputs recorded during a forward pass; the last entry is the output.
#[derive(Debug, Clone)]
pub struct Tape {
    pub values: Vec<Vec<f64>>,
    pub batch: usize,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

pub fn forward_tape(net: &Mlp, x: &[f64], batch: usize) -> Tape {
    debug_assert_eq!(x.len(), net.in_dim() * batch);
    let mut values = Vec::with_capacity(net.layers().len() + 1);
    values.push(x.to_vec());
    for l in net.layers() {
        let cur = values.last().unwrap();
        let mut next = vec![0.0; l.out_dim() * batch];
        l.weights.apply_batch(cur, batch, &mut next);
        for (r, b) in l.bias.iter().enumerate() {
            let row = &mut next[r * batch..(r + 1) * batch];
            if l.activated {
                row.iter_mut().for_each(|v| *v = (*v + b).max(0.0));
            } else {
                row.iter_mut().for_each(|v| *v += b);
            }
        }
        values.push(next);
    }
    Tape { values, batch }
}

/// Accumulates `∂L/∂θ` into `grad` (ordered as [`Mlp::params`]) given
/// `d_out = ∂L/∂output`; returns `∂L/∂input` when asked.
pub fn backward(net: &Mlp, tape: &Tape, d_out: Vec<f64>, grad: &mut [f64], want_dx: bool) -> Option<Vec<f64>> {
    let batch = tape.batch;
    let layers = net.layers();
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for l in layers {
        offsets.push(off);
        off += l.weights.values().len() + l.bias.len();
    }
    debug_assert_eq!(grad.len(), off);
    let mut d = d_out;
    for (li, l) in layers.iter().enumerate().rev() {
        let (rows, cols) = (l.out_dim(), l.in_dim());
        if l.activated {
            let out = &tape.values[li + 1];
            for (dv, o) in d.iter_mut().zip(out) {
                if *o <= 0.0 {
                    *dv = 0.0;
                }
            }
        }
        let input = &tape.values[li];
        let nw = l.weights.values().len();
        let (gw, gb) = grad[offsets[li]..offsets[li] + nw + rows].split_at_mut(nw);
        match &l.weights {
            Matrix::Dense { data, .. } => {
                gemm(rows, batch, cols, &d, (batch, 1), input, (1, batch), 1.0, gw, (cols, 1));
                if li > 0 || want_dx {
                    let mut dx = vec![0.0; cols * batch];
                    gemm(cols, rows, batch, data, (1, cols), &d, (batch, 1), 0.0, &mut dx, (batch, 1));
                    for (r, g) in gb.iter_mut().enumerate() {
                        *g += d[r * batch..(r + 1) * batch].iter().sum::<f64>();
                    }
                    d = dx;
                    continue;
                }
            }
            Matrix::Sparse { indptr, indices, values, .. } => {
                let need = li > 0 || want_dx;
                let mut dx = if need { vec![0.0; cols * batch] } else { Vec::new() };
                for r in 0..rows {
                    let dr = &d[r * batch..(r + 1) * batch];
                    for k in indptr[r]..indptr[r + 1] {
                        let c = indices[k];
                        let xc = &input[c * batch..(c + 1) * batch];
                        gw[k] += dr.iter().zip(xc).map(|(a, b)| a * b).sum::<f64>();
                        if need {
                            let w = values[k];
                            for (o, g) in dx[c * batch..(c + 1) * batch].iter_mut().zip(dr) {
                                *o += w * g;
                            }
                        }
                    }
                }
                for (r, g) in gb.iter_mut().enumerate() {
                    *g += d[r * batch..(r + 1) * batch].iter().sum::<f64>();
                }
                if need {
                    d = dx;
                    continue;
                }
                return None;
            }
        }
        for (r, g) in gb.iter_mut().enumerate() {
            *g += d[r * batch..(r + 1) * batch].iter().sum::<f64>();
        }
        return None;
    }
    Some(d)
}
