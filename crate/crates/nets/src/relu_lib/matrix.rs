use serde::{Deserialize, Serialize};

/// Real matrix stored either dense (row-major) or as CSR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "storage", rename_all = "snake_case")]
pub enum Matrix {
    Dense { rows: usize, cols: usize, data: Vec<f64> },
    Sparse { rows: usize, cols: usize, indptr: Vec<usize>, indices: Vec<usize>, values: Vec<f64> },
}

/// Below this fill ratio products are kept sparse.
const SPARSE_FILL: f64 = 0.35;

impl Matrix {
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense matrix data length");
        Matrix::Dense { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::Sparse { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    /// CSR from `(row, col, value)` entries; duplicates are summed and exact
    /// zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            per_row[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in per_row {
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Matrix::Sparse { rows, cols, indptr, indices, values }
    }

    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense { rows, .. } | Matrix::Sparse { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense { cols, .. } | Matrix::Sparse { cols, .. } => *cols,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Matrix::Dense { .. })
    }

    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense { data, .. } => data.iter().filter(|v| **v != 0.0).count(),
            Matrix::Sparse { values, .. } => values.len(),
        }
    }

    /// Nonzero entries of row `r` as `(col, value)`.
    pub fn row_entries(&self, r: usize) -> Vec<(usize, f64)> {
        match self {
            Matrix::Dense { cols, data, .. } => data[r * cols..(r + 1) * cols]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(c, v)| (c, *v))
                .collect(),
            Matrix::Sparse { indptr, indices, values, .. } => {
                (indptr[r]..indptr[r + 1]).map(|k| (indices[k], values[k])).collect()
            }
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self {
            Matrix::Dense { cols, data, .. } => data[r * cols + c],
            Matrix::Sparse { indptr, indices, values, .. } => {
                let span = indptr[r]..indptr[r + 1];
                match indices[span.clone()].binary_search(&c) {
                    Ok(k) => values[span.start + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    pub fn to_dense_vec(&self) -> Vec<f64> {
        match self {
            Matrix::Dense { data, .. } => data.clone(),
            Matrix::Sparse { rows, cols, .. } => {
                let mut out = vec![0.0; rows * cols];
                for r in 0..*rows {
                    for (c, v) in self.row_entries(r) {
                        out[r * cols + c] = v;
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::dense(self.rows(), self.cols(), self.to_dense_vec())
    }

    pub fn to_sparse(&self) -> Matrix {
        match self {
            Matrix::Sparse { .. } => self.clone(),
            Matrix::Dense { rows, cols, .. } => {
                let entries: Vec<_> =
                    (0..*rows).flat_map(|r| self.row_entries(r).into_iter().map(move |(c, v)| (r, c, v))).collect();
                Self::from_triplets(*rows, *cols, entries)
            }
        }
    }

    /// `y = A x` for a single vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.apply_batch(x, 1, &mut y);
        y
    }

    /// `Y = A X` where `X` is `cols × batch` and `Y` is `rows × batch`, both
    /// row-major. `Y` is overwritten.
    pub fn apply_batch(&self, x: &[f64], batch: usize, y: &mut [f64]) {
        let (rows, cols) = (self.rows(), self.cols());
        debug_assert_eq!(x.len(), cols * batch);
        debug_assert_eq!(y.len(), rows * batch);
        match self {
            Matrix::Dense { data, .. } => {
                if rows == 0 || batch == 0 {
                    return;
                }
                if cols == 0 {
                    y.iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                unsafe {
                    matrixmultiply::dgemm(
                        rows,
                        cols,
                        batch,
                        1.0,
                        data.as_ptr(),
                        cols as isize,
                        1,
                        x.as_ptr(),
                        batch as isize,
                        1,
                        0.0,
                        y.as_mut_ptr(),
                        batch as isize,
                        1,
                    );
                }
            }
            Matrix::Sparse { indptr, indices, values, .. } => {
                for r in 0..rows {
                    let out = &mut y[r * batch..(r + 1) * batch];
                    out.iter_mut().for_each(|v| *v = 0.0);
                    for k in indptr[r]..indptr[r + 1] {
                        let w = values[k];
                        let src = &x[indices[k] * batch..(indices[k] + 1) * batch];
                        for (o, s) in out.iter_mut().zip(src) {
                            *o += w * s;
                        }
                    }
                }
            }
        }
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols(), other.rows(), "inner dimensions");
        let (n, m) = (self.rows(), other.cols());
        if self.is_dense() && other.is_dense() {
            let b = other.to_dense_vec();
            let mut out = vec![0.0; n * m];
            self.apply_batch(&b, m, &mut out);
            return Matrix::dense(n, m, out);
        }
        let mut acc = vec![0.0; m];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; m];
        let mut entries = Vec::new();
        for r in 0..n {
            for (k, a) in self.row_entries(r) {
                for (c, b) in other.row_entries(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                entries.push((r, c, acc[c]));
                acc[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
        }
        let sparse = Self::from_triplets(n, m, entries);
        if self.is_dense() && (sparse.nnz() as f64) > SPARSE_FILL * (n * m) as f64 {
            sparse.to_dense()
        } else {
            sparse
        }
    }

    pub fn transpose(&self) -> Matrix {
        let (r, c) = (self.rows(), self.cols());
        match self {
            Matrix::Dense { data, .. } => {
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        out[j * r + i] = data[i * c + j];
                    }
                }
                Matrix::dense(c, r, out)
            }
            Matrix::Sparse { .. } => {
                let entries: Vec<_> =
                    (0..r).flat_map(|i| self.row_entries(i).into_iter().map(move |(j, v)| (j, i, v))).collect();
                Self::from_triplets(c, r, entries)
            }
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols(), other.cols());
        if self.is_dense() && other.is_dense() {
            let mut data = self.to_dense_vec();
            data.extend(other.to_dense_vec());
            return Matrix::dense(self.rows() + other.rows(), self.cols(), data);
        }
        let off = self.rows();
        let entries: Vec<_> = (0..self.rows())
            .flat_map(|i| self.row_entries(i).into_iter().map(move |(j, v)| (i, j, v)))
            .chain((0..other.rows()).flat_map(|i| other.row_entries(i).into_iter().map(move |(j, v)| (off + i, j, v))))
            .collect();
        Self::from_triplets(self.rows() + other.rows(), self.cols(), entries)
    }

    /// Block-diagonal matrix of the given blocks.
    pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
        let rows: usize = blocks.iter().map(|b| b.rows()).sum();
        let cols: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut entries = Vec::new();
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows() {
                for (j, v) in b.row_entries(i) {
                    entries.push((r0 + i, c0 + j, v));
                }
            }
            r0 += b.rows();
            c0 += b.cols();
        }
        Self::from_triplets(rows, cols, entries)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        match self {
            Matrix::Dense { rows, cols, data } => Matrix::dense(*rows, *cols, data.iter().map(|v| v * s).collect()),
            Matrix::Sparse { rows, cols, indptr, indices, values } => Matrix::Sparse {
                rows: *rows,
                cols: *cols,
                indptr: indptr.clone(),
                indices: indices.clone(),
                values: values.iter().map(|v| v * s).collect(),
            },
        }
    }

    /// Mutable view of the stored values (dense entries or CSR values).
    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            Matrix::Dense { data, .. } => data,
            Matrix::Sparse { values, .. } => values,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Matrix::Dense { data, .. } => data,
            Matrix::Sparse { values, .. } => values,
        }
    }
}
