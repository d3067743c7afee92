use super::matrix::Matrix;
use crate::NetError;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// One affine map, optionally followed by ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activated: bool,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activated: bool) -> Self {
        assert_eq!(weights.rows(), bias.len(), "bias length");
        Self { weights, bias, activated }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// `first` followed by `second`, valid only when `first` is not activated.
fn merge_affine(first: &Layer, second: &Layer) -> Layer {
    debug_assert!(!first.activated);
    let weights = second.weights.matmul(&first.weights);
    let mut bias = second.weights.mul_vec(&first.bias);
    for (b, s) in bias.iter_mut().zip(&second.bias) {
        *b += s;
    }
    Layer { weights, bias, activated: second.activated }
}

/// Fully connected ReLU network in canonical form: any number of activated
/// layers followed by exactly one affine output layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            layers: Vec<Layer>,
        }
        let raw = Raw::deserialize(d)?;
        Mlp::new(raw.layers).map_err(serde::de::Error::custom)
    }
}

/// Depth, width and fully connected size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSize {
    pub depth: usize,
    pub width: usize,
    pub size: usize,
}

impl Mlp {
    /// Validates dimensions and merges adjacent affine layers.
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Dimension("network without layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(NetError::Dimension(format!("layer {i}: bias {} vs {} rows", l.bias.len(), l.out_dim())));
            }
            if i > 0 && layers[i - 1].out_dim() != l.in_dim() {
                return Err(NetError::Dimension(format!(
                    "layer {i} takes {} inputs, previous layer gives {}",
                    l.in_dim(),
                    layers[i - 1].out_dim()
                )));
            }
        }
        let mut out = Vec::with_capacity(layers.len() + 1);
        let mut pending: Option<Layer> = None;
        for l in layers {
            let l = match pending.take() {
                Some(a) => merge_affine(&a, &l),
                None => l,
            };
            if l.activated {
                out.push(l);
            } else {
                pending = Some(l);
            }
        }
        match pending {
            Some(a) => out.push(a),
            None => {
                let n = out.last().map(|l: &Layer| l.out_dim()).unwrap_or(0);
                out.push(Layer::new(Matrix::identity(n), vec![0.0; n], false));
            }
        }
        Ok(Self { layers: out })
    }

    pub fn affine(weights: Matrix, bias: Vec<f64>) -> Self {
        Self { layers: vec![Layer::new(weights, bias, false)] }
    }

    pub fn identity(n: usize) -> Self {
        Self::affine(Matrix::identity(n), vec![0.0; n])
    }

    /// Constant map `R^n_in → R^k`.
    pub fn constant(n_in: usize, values: Vec<f64>) -> Self {
        Self::affine(Matrix::zeros(values.len(), n_in), values)
    }

    /// Picks coordinates `idx` of the input.
    pub fn select(n_in: usize, idx: &[usize]) -> Self {
        let w = Matrix::from_triplets(idx.len(), n_in, idx.iter().enumerate().map(|(r, &c)| (r, c, 1.0)));
        Self::affine(w, vec![0.0; idx.len()])
    }

    /// Affine map given row by row as `(Σ coeff·x[col], constant)`.
    pub fn linear(n_in: usize, rows: &[(Vec<(usize, f64)>, f64)]) -> Self {
        let w = Matrix::from_triplets(
            rows.len(),
            n_in,
            rows.iter().enumerate().flat_map(|(r, (terms, _))| terms.iter().map(move |&(c, v)| (r, c, v))),
        );
        Self::affine(w, rows.iter().map(|r| r.1).collect())
    }

    /// Single hidden ReLU layer `σ(W x + b)` followed by `C h + d`.
    pub fn one_hidden(w: Matrix, b: Vec<f64>, c: Matrix, d: Vec<f64>) -> Result<Self, NetError> {
        Self::new(vec![Layer::new(w, b, true), Layer::new(c, d, false)])
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access that keeps the layer shapes fixed.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim()
    }

    /// Number of activated layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Largest activated layer.
    pub fn width(&self) -> usize {
        self.layers[..self.depth()].iter().map(|l| l.out_dim()).max().unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.layers.iter().map(|l| l.weights.nnz() + l.bias.len()).sum()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        self.eval_batch(x, 1)
    }

    /// Forward pass on `batch` inputs stored unit-major: `x[i * batch + b]` is
    /// coordinate `i` of sample `b`. The output uses the same layout.
    pub fn eval_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>, NetError> {
        if x.len() != self.in_dim() * batch {
            return Err(NetError::Dimension(format!(
                "input of length {} for {} inputs x {} samples",
                x.len(),
                self.in_dim(),
                batch
            )));
        }
        let mut cur = x.to_vec();
        for l in &self.layers {
            let mut next = vec![0.0; l.out_dim() * batch];
            l.weights.apply_batch(&cur, batch, &mut next);
            for (r, b) in l.bias.iter().enumerate() {
                let row = &mut next[r * batch..(r + 1) * batch];
                if l.activated {
                    row.iter_mut().for_each(|v| *v = (*v + b).max(0.0));
                } else {
                    row.iter_mut().for_each(|v| *v += b);
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    /// `next ∘ self`, merging the affine boundary.
    pub fn then(&self, next: &Mlp) -> Result<Mlp, NetError> {
        if self.out_dim() != next.in_dim() {
            return Err(NetError::Dimension(format!(
                "composition: {} outputs into {} inputs",
                self.out_dim(),
                next.in_dim()
            )));
        }
        let mut layers = self.layers[..self.depth()].to_vec();
        layers.push(merge_affine(self.layers.last().unwrap(), &next.layers[0]));
        layers.extend_from_slice(&next.layers[1..]);
        Ok(Mlp { layers })
    }

    /// Same function with `depth` activated layers, carrying the output
    /// through `σ(y), σ(-y)` pairs.
    pub fn pad_to_depth(&self, depth: usize) -> Mlp {
        let d = self.depth();
        assert!(depth >= d, "cannot shrink depth {d} to {depth}");
        if depth == d {
            return self.clone();
        }
        let last = self.layers.last().unwrap();
        let o = last.out_dim();
        let mut layers = self.layers[..d].to_vec();
        let split = last.weights.vstack(&last.weights.scale(-1.0));
        let mut bias = last.bias.clone();
        bias.extend(last.bias.iter().map(|b| -b));
        layers.push(Layer::new(split, bias, true));
        for _ in d + 1..depth {
            layers.push(Layer::new(Matrix::identity(2 * o), vec![0.0; 2 * o], true));
        }
        let recombine = Matrix::from_triplets(o, 2 * o, (0..o).flat_map(|i| [(i, i, 1.0), (i, o + i, -1.0)]));
        layers.push(Layer::new(recombine, vec![0.0; o], false));
        Mlp { layers }
    }

    /// All nets read the same input; outputs are concatenated.
    pub fn parallel(nets: &[&Mlp]) -> Result<Mlp, NetError> {
        let n_in = nets.first().ok_or_else(|| NetError::Dimension("empty parallel".into()))?.in_dim();
        if nets.iter().any(|n| n.in_dim() != n_in) {
            return Err(NetError::Dimension("parallel nets must share the input dimension".into()));
        }
        Ok(Self::combine(nets, true))
    }

    /// Input is split between the nets in order; outputs are concatenated.
    pub fn stack(nets: &[&Mlp]) -> Result<Mlp, NetError> {
        if nets.is_empty() {
            return Err(NetError::Dimension("empty stack".into()));
        }
        Ok(Self::combine(nets, false))
    }

    fn combine(nets: &[&Mlp], shared_input: bool) -> Mlp {
        let depth = nets.iter().map(|n| n.depth()).max().unwrap();
        let padded: Vec<Mlp> = nets.iter().map(|n| n.pad_to_depth(depth)).collect();
        let mut layers = Vec::with_capacity(depth + 1);
        for li in 0..=depth {
            let parts: Vec<&Layer> = padded.iter().map(|n| &n.layers[li]).collect();
            let weights = if li == 0 && shared_input {
                parts[1..].iter().fold(parts[0].weights.clone(), |acc, p| acc.vstack(&p.weights))
            } else {
                Matrix::block_diag(&parts.iter().map(|p| &p.weights).collect::<Vec<_>>())
            };
            let bias = parts.iter().flat_map(|p| p.bias.iter().copied()).collect();
            layers.push(Layer::new(weights, bias, li < depth));
        }
        Mlp { layers }
    }

    /// Sum of the outputs of nets with equal output dimension.
    pub fn sum(nets: &[&Mlp]) -> Result<Mlp, NetError> {
        let o = nets.first().ok_or_else(|| NetError::Dimension("empty sum".into()))?.out_dim();
        if nets.iter().any(|n| n.out_dim() != o) {
            return Err(NetError::Dimension("summands must share the output dimension".into()));
        }
        let add = Matrix::from_triplets(o, o * nets.len(), (0..nets.len()).flat_map(|k| (0..o).map(move |i| (i, k * o + i, 1.0))));
        Self::parallel(nets)?.then(&Mlp::affine(add, vec![0.0; o]))
    }

    /// Flat copy of all stored weight values and biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.values());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.values().len() + l.bias.len()).sum()
    }

    /// Inverse of [`Mlp::params`]; returns the number of values consumed.
    pub fn set_params(&mut self, src: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            let w = l.weights.values_mut();
            w.copy_from_slice(&src[k..k + w.len()]);
            k += w.len();
            let n = l.bias.len();
            l.bias.copy_from_slice(&src[k..k + n]);
            k += n;
        }
        k
    }

    pub fn to_json(&self) -> Result<String, NetError> {
        #[derive(Serialize)]
        struct View<'a> {
            in_dim: usize,
            out_dim: usize,
            depth: usize,
            width: usize,
            size: usize,
            layers: &'a [Layer],
        }
        let s = account_size(self);
        Ok(serde_json::to_string(&View {
            in_dim: self.in_dim(),
            out_dim: self.out_dim(),
            depth: s.depth,
            width: s.width,
            size: s.size,
            layers: &self.layers,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Mlp, NetError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_blob(&self, mut w: impl Write) -> Result<(), NetError> {
        w.write_all(BLOB_MAGIC)?;
        put_u64(&mut w, self.layers.len() as u64)?;
        for l in &self.layers {
            w.write_all(&[l.activated as u8])?;
            match &l.weights {
                Matrix::Dense { rows, cols, data } => {
                    w.write_all(&[0])?;
                    put_u64(&mut w, *rows as u64)?;
                    put_u64(&mut w, *cols as u64)?;
                    put_f64s(&mut w, data)?;
                }
                Matrix::Sparse { rows, cols, indptr, indices, values } => {
                    w.write_all(&[1])?;
                    put_u64(&mut w, *rows as u64)?;
                    put_u64(&mut w, *cols as u64)?;
                    put_u64(&mut w, values.len() as u64)?;
                    for &i in indptr.iter().chain(indices) {
                        put_u64(&mut w, i as u64)?;
                    }
                    put_f64s(&mut w, values)?;
                }
            }
            put_f64s(&mut w, &l.bias)?;
        }
        Ok(())
    }

    pub fn read_blob(mut r: impl Read) -> Result<Mlp, NetError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BLOB_MAGIC {
            return Err(NetError::Format("bad network magic".into()));
        }
        let n = get_u64(&mut r)? as usize;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let mut tag = [0u8; 2];
            r.read_exact(&mut tag)?;
            let rows = get_u64(&mut r)? as usize;
            let cols = get_u64(&mut r)? as usize;
            let weights = match tag[1] {
                0 => Matrix::dense(rows, cols, get_f64s(&mut r, rows * cols)?),
                1 => {
                    let nnz = get_u64(&mut r)? as usize;
                    let mut idx = Vec::with_capacity(rows + 1 + nnz);
                    for _ in 0..rows + 1 + nnz {
                        idx.push(get_u64(&mut r)? as usize);
                    }
                    let indices = idx.split_off(rows + 1);
                    if idx[rows] != nnz || indices.iter().any(|&c| c >= cols) {
                        return Err(NetError::Format("inconsistent sparse layer".into()));
                    }
                    Matrix::Sparse { rows, cols, indptr: idx, indices, values: get_f64s(&mut r, nnz)? }
                }
                t => return Err(NetError::Format(format!("unknown storage tag {t}"))),
            };
            let bias = get_f64s(&mut r, rows)?;
            layers.push(Layer { weights, bias, activated: tag[0] != 0 });
        }
        if layers.is_empty() || layers[..n - 1].iter().any(|l| !l.activated) || layers[n - 1].activated {
            return Err(NetError::Format("network blob is not in canonical form".into()));
        }
        Mlp::new(layers)
    }
}

const BLOB_MAGIC: &[u8; 4] = b"RNN1";

pub(crate) fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_f64s(w: &mut impl Write, vals: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(vals.len() * 8);
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn get_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64s(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Fully connected size `(d_in + d_out)·width + width²·depth`; for an affine
/// map the parameter count `d_in·d_out + d_out`.
pub fn account_size(net: &Mlp) -> NetSize {
    let (depth, width) = (net.depth(), net.width());
    let size = if depth == 0 {
        net.in_dim() * net.out_dim() + net.out_dim()
    } else {
        (net.in_dim() + net.out_dim()) * width + width * width * depth
    };
    NetSize { depth, width, size }
}
