use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-list builder. Duplicates are summed on `build`.
#[derive(Debug, Clone)]
pub struct CooBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    /// Panics if the index is out of bounds.
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            row < self.n_rows && col < self.n_cols,
            "entry ({row}, {col}) outside {}x{}",
            self.n_rows,
            self.n_cols
        );
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_indices.push(c);
            values.push(v);
            row_offsets[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..self.n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl SparseMatrix {
    /// Builds from raw CSR arrays, validating the canonical-form invariants.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::dim("row_offsets", n_rows + 1, row_offsets.len()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::dim("col_indices", values.len(), col_indices.len()));
        }
        if row_offsets[0] != 0 || row_offsets[n_rows] != values.len() {
            return Err(Error::InvalidParameter("row_offsets endpoints".into()));
        }
        for r in 0..n_rows {
            let (a, b) = (row_offsets[r], row_offsets[r + 1]);
            if a > b {
                return Err(Error::InvalidParameter("row_offsets decreasing".into()));
            }
            let cols = &col_indices[a..b];
            if cols.iter().any(|&c| c >= n_cols) || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!("row {r} not canonical")));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CooBuilder::new(n_rows, n_cols).build()
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut b = CooBuilder::new(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    b.push(r, c, m[(r, c)]);
                }
            }
        }
        b.build()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
        self.col_indices[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
        match self.col_indices[a..b].binary_search(&c) {
            Ok(i) => self.values[a + i],
            Err(_) => 0.0,
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::dim("spmv", self.n_cols, x.len()));
        }
        let mut out = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut out);
        Ok(out)
    }

    /// `out = self * x`; panics on dimension mismatch.
    pub fn spmv_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        for (r, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let mut acc = 0.0;
            for k in a..b {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *o = acc;
        }
    }

    /// `self * x − q`, accumulated in compensated arithmetic so the result is
    /// accurate relative to itself even when the terms nearly cancel.
    pub fn residual(&self, x: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::dim("residual", self.n_cols, x.len()));
        }
        if q.len() != self.n_rows {
            return Err(Error::dim("residual rhs", self.n_rows, q.len()));
        }
        let out = (0..self.n_rows)
            .map(|r| {
                let (mut s, mut c) = (-q[r], 0.0);
                for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                    let a = self.values[k];
                    let b = x[self.col_indices[k]];
                    let p = a * b;
                    // TwoProduct and TwoSum error terms
                    let ep = a.mul_add(b, -p);
                    let t = s + p;
                    let z = t - s;
                    let es = (s - (t - z)) + (p - z);
                    s = t;
                    c += ep + es;
                }
                s + c
            })
            .collect();
        Ok(out)
    }

    pub fn spmv_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_rows {
            return Err(Error::dim("spmv_transpose", self.n_rows, y.len()));
        }
        let mut out = vec![0.0; self.n_cols];
        self.spmv_transpose_into(y, &mut out);
        Ok(out)
    }

    /// `out = selfᵀ * y`; panics on dimension mismatch.
    pub fn spmv_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.n_rows);
        assert_eq!(out.len(), self.n_cols);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                out[self.col_indices[k]] += self.values[k] * yr;
            }
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = CooBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                b.push(c, r, v);
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|r| {
                let b = self.row_offsets[r + 1];
                b == self.row_offsets[r] || self.col_indices[b - 1] <= r
            })
    }

    /// Row sums, `self * 1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// Forward substitution for a lower triangular matrix with nonzero diagonal.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        if !self.is_lower_triangular() {
            return Err(Error::InvalidParameter("matrix is not lower triangular".into()));
        }
        if b.len() != self.n_rows {
            return Err(Error::dim("solve_lower", self.n_rows, b.len()));
        }
        let mut x = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut acc = b[r];
            let mut diag = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    diag = v;
                } else {
                    acc -= v * x[c];
                }
            }
            if diag == 0.0 {
                return Err(Error::Singular);
            }
            x[r] = acc / diag;
        }
        Ok(x)
    }

    /// Solves `selfᵀ x = b` for lower triangular `self` (backward substitution).
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        if !self.is_lower_triangular() {
            return Err(Error::InvalidParameter("matrix is not lower triangular".into()));
        }
        if b.len() != self.n_rows {
            return Err(Error::dim("solve_lower_transpose", self.n_rows, b.len()));
        }
        let mut x = b.to_vec();
        for r in (0..self.n_rows).rev() {
            let diag = self.get(r, r);
            if diag == 0.0 {
                return Err(Error::Singular);
            }
            x[r] /= diag;
            let xr = x[r];
            for (c, v) in self.row(r) {
                if c != r {
                    x[c] -= v * xr;
                }
            }
        }
        Ok(x)
    }
}
