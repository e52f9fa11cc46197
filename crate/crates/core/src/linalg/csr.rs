use crate::error::{Error, Result};

use super::dense::DenseMatrix;

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Validates the raw arrays before taking ownership.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 {
            return Err(Error::dim("CsrMatrix::new row_ptr", n_rows + 1, row_ptr.len()));
        }
        if col_idx.len() != vals.len() {
            return Err(Error::dim("CsrMatrix::new vals", col_idx.len(), vals.len()));
        }
        if row_ptr[0] != 0 || row_ptr[n_rows] != col_idx.len() {
            return Err(Error::Format("row_ptr must start at 0 and end at nnz".into()));
        }
        for i in 0..n_rows {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            if s > e {
                return Err(Error::Format(format!("row_ptr decreases at row {i}")));
            }
            for k in s..e {
                if col_idx[k] >= n_cols {
                    return Err(Error::Format(format!("column {} out of range", col_idx[k])));
                }
                if k > s && col_idx[k] <= col_idx[k - 1] {
                    return Err(Error::Format(format!(
                        "row {i}: column indices not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, vals })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &DenseMatrix, drop_tol: f64) -> Self {
        let mut b = TripletBuilder::new(m.rows(), m.cols());
        for i in 0..m.rows() {
            for (j, v) in m.row(i).iter().enumerate() {
                if v.abs() > drop_tol {
                    b.push(i, j, *v);
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
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.vals[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// y = A x, summing each row in stored column order.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols {
            return Err(Error::dim("spmv input", self.n_cols, x.len()));
        }
        if y.len() != self.n_rows {
            return Err(Error::dim("spmv output", self.n_rows, y.len()));
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// Aᵀ x
    pub fn t_spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::dim("t_spmv input", self.n_rows, x.len()));
        }
        let mut y = vec![0.0; self.n_cols];
        for (i, xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * xi;
            }
        }
        Ok(y)
    }

    /// f - A x
    pub fn residual(&self, f: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.spmv(x)?;
        if f.len() != r.len() {
            return Err(Error::dim("residual rhs", r.len(), f.len()));
        }
        for (ri, fi) in r.iter_mut().zip(f) {
            *ri = fi - *ri;
        }
        Ok(r)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] = *v;
            }
        }
        m
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                b.push(*c, i, *v);
            }
        }
        b.build()
    }

    /// Scales every stored value.
    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= alpha;
        }
        out
    }

    /// Largest |A_ij - A_ji| over stored entries, including structural mismatch.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let t = if *c < self.n_rows { self.get(*c, i) } else { 0.0 };
                worst = worst.max((v - t).abs());
            }
        }
        worst
    }

    /// Principal submatrix on sorted index set `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.n_cols];
        for (l, g) in idx.iter().enumerate() {
            local[*g] = l;
        }
        let mut b = TripletBuilder::new(idx.len(), idx.len());
        for (li, gi) in idx.iter().enumerate() {
            let (cols, vals) = self.row(*gi);
            for (c, v) in cols.iter().zip(vals) {
                let lj = local[*c];
                if lj != usize::MAX {
                    b.push(li, lj, *v);
                }
            }
        }
        b.build()
    }

    /// A · B for a dense right-hand factor.
    pub fn matmul_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != self.n_cols {
            return Err(Error::dim("CsrMatrix::matmul_dense", self.n_cols, b.rows()));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, b.cols());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (c, v) in cols.iter().zip(vals) {
                for (o, bb) in out_row.iter_mut().zip(b.row(*c)) {
                    *o += v * bb;
                }
            }
        }
        Ok(out)
    }

    /// Sparse product A · B.
    pub fn matmul(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        if b.n_rows != self.n_cols {
            return Err(Error::dim("CsrMatrix::matmul", self.n_cols, b.n_rows));
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut acc = vec![0.0; b.n_cols];
        let mut marker = vec![usize::MAX; b.n_cols];
        let mut touched = Vec::new();
        for i in 0..self.n_rows {
            touched.clear();
            let (ac, av) = self.row(i);
            for (k, a) in ac.iter().zip(av) {
                let (bc, bv) = b.row(*k);
                for (j, bb) in bc.iter().zip(bv) {
                    if marker[*j] != i {
                        marker[*j] = i;
                        acc[*j] = 0.0;
                        touched.push(*j);
                    }
                    acc[*j] += a * bb;
                }
            }
            touched.sort_unstable();
            for j in &touched {
                col_idx.push(*j);
                vals.push(acc[*j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { n_rows: self.n_rows, n_cols: b.n_cols, row_ptr, col_idx, vals })
    }

    /// Half-bandwidths (below, above) of the stored pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut lower, mut upper) = (0, 0);
        for i in 0..self.n_rows {
            let (cols, _) = self.row(i);
            if let (Some(first), Some(last)) = (cols.first(), cols.last()) {
                lower = lower.max(i.saturating_sub(*first));
                upper = upper.max(last.saturating_sub(i));
            }
        }
        (lower, upper)
    }
}

/// Accumulates (row, col, value) triplets; duplicates are summed on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self { n_rows, n_cols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *vals.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, vals }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap1d(n: usize, h: f64) -> CsrMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0 / h);
            if i > 0 {
                b.push(i, i - 1, -1.0 / h);
            }
            if i + 1 < n {
                b.push(i, i + 1, -1.0 / h);
            }
        }
        b.build()
    }

    #[test]
    fn identity_spmv() {
        let y = CsrMatrix::identity(3).spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn laplacian_stencil_against_dense() {
        let a = lap1d(3, 0.25);
        let x = [1.0; 3];
        let y = a.spmv(&x).unwrap();
        let dense = a.to_dense().matvec(&x).unwrap();
        assert_eq!(y, dense);
        // (1/h)[1, 0, 1]
        assert_eq!(y, vec![4.0, 0.0, 4.0]);
    }

    #[test]
    fn empty_row_gives_zero() {
        let a = CsrMatrix::new(2, 2, vec![0, 0, 1], vec![1], vec![5.0]).unwrap();
        assert_eq!(a.spmv(&[1.0, 2.0]).unwrap(), vec![0.0, 10.0]);
    }

    #[test]
    fn rejects_bad_structure() {
        assert!(CsrMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(1, 3, vec![1, 2], vec![1, 2], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::identity(3).spmv(&[1.0]).is_err());
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(1, 0, 1.0);
        b.push(0, 1, 2.0);
        b.push(1, 0, 3.0);
        let a = b.build();
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn sparse_product_matches_dense() {
        let a = lap1d(6, 1.0);
        let p = a.matmul(&a).unwrap().to_dense();
        let q = a.to_dense().matmul(&a.to_dense()).unwrap();
        assert!(p.sub(&q).unwrap().max_abs() < 1e-14);
        assert_eq!(a.bandwidth(), (1, 1));
    }
}
