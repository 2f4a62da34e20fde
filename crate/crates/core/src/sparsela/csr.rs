//! Compressed sparse row storage and the handful of kernels the solvers need.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use crate::error::{Error, Result};

/// Real sparse matrix in compressed row format.
///
/// Column indices are strictly increasing within each row. `symmetric_hint` is a promise made by
/// the producer (assembly, Galerkin products, principal submatrices) and is what the Cholesky
/// factorization requires.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    symmetric_hint: bool,
}

impl CsrMatrix {
    /// Builds a matrix from raw parts, checking the structural invariants.
    pub fn from_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        symmetric_hint: bool,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::DimensionMismatch {
                expected: n_rows + 1,
                got: row_offsets.len(),
            });
        }
        if col_indices.len() != values.len() || row_offsets[n_rows] != values.len() {
            return Err(Error::DimensionMismatch {
                expected: row_offsets[n_rows],
                got: values.len(),
            });
        }
        for i in 0..n_rows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(Error::InvalidArgument(format!("row offsets decrease at row {i}")));
            }
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= n_cols {
                    return Err(Error::IndexOutOfRange { index: c, dim: n_cols });
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
            symmetric_hint,
        })
    }

    /// Sums duplicate entries; explicit zeros are kept so that sparsity patterns stay stable.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
        symmetric_hint: bool,
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, j, _) in triplets {
            if i >= n_rows {
                return Err(Error::IndexOutOfRange { index: i, dim: n_rows });
            }
            if j >= n_cols {
                return Err(Error::IndexOutOfRange { index: j, dim: n_cols });
            }
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, stable in input order
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[i];
            cols[p] = j;
            vals[p] = v;
            next[i] += 1;
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n_rows {
            let (lo, hi) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&p| cols[p]);
            for &p in &order {
                if let Some(&last) = col_indices.last() {
                    if col_indices.len() > row_offsets[i] && last == cols[p] {
                        *values.last_mut().unwrap() += vals[p];
                        continue;
                    }
                }
                col_indices.push(cols[p]);
                values.push(vals[p]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
            symmetric_hint,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
            symmetric_hint: true,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
            symmetric_hint: n_rows == n_cols,
        }
    }

    /// Dense row-major input; zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>], symmetric_hint: bool) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged dense input");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
            symmetric_hint,
        }
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

    pub fn symmetric_hint(&self) -> bool {
        self.symmetric_hint
    }

    pub fn with_symmetric_hint(mut self, hint: bool) -> Self {
        self.symmetric_hint = hint;
        self
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`, summing each row in ascending column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked variant of [`spmv`](Self::spmv) writing into `y`.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.values[p] * x[self.col_indices[p]];
            }
            *yi = s;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let mut row = 0.0;
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                row += self.values[p] * y[self.col_indices[p]];
            }
            s += xi * row;
        }
        s
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[p];
                let q = next[j];
                col_indices[q] = i;
                values[q] = self.values[p];
                next[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
            symmetric_hint: self.symmetric_hint,
        }
    }

    /// Sparse product `self · other` (row-by-row Gustavson accumulation).
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: other.n_rows,
            });
        }
        let n = other.n_cols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![0.0; n];
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut pattern: Vec<usize> = Vec::new();
        for i in 0..self.n_rows {
            pattern.clear();
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                let k = self.col_indices[p];
                let a = self.values[p];
                for q in other.row_offsets[k]..other.row_offsets[k + 1] {
                    let j = other.col_indices[q];
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        pattern.push(j);
                    }
                    acc[j] += a * other.values[q];
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: n,
            row_offsets,
            col_indices,
            values,
            symmetric_hint: false,
        })
    }

    /// Principal submatrix `A[I, I]`, rows and columns in the order given by `index_set`.
    pub fn submatrix(&self, index_set: &[usize]) -> Result<CsrMatrix> {
        let mut local = vec![usize::MAX; self.n_cols.max(self.n_rows)];
        for (k, &g) in index_set.iter().enumerate() {
            if g >= self.n_rows || g >= self.n_cols {
                return Err(Error::IndexOutOfRange {
                    index: g,
                    dim: self.n_rows.min(self.n_cols),
                });
            }
            if local[g] != usize::MAX {
                return Err(Error::InvalidArgument(format!("duplicate index {g} in index set")));
            }
            local[g] = k;
        }
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for &g in index_set {
            entries.clear();
            let (cols, vals) = self.row(g);
            for (&j, &v) in cols.iter().zip(vals) {
                let l = local[j];
                if l != usize::MAX {
                    entries.push((l, v));
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            for &(l, v) in &entries {
                col_indices.push(l);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            n_rows: index_set.len(),
            n_cols: index_set.len(),
            row_offsets,
            col_indices,
            values,
            symmetric_hint: self.symmetric_hint,
        })
    }

    /// Rows `rows` and columns `cols` (both in the given order); a general block extraction.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Result<CsrMatrix> {
        let mut local = vec![usize::MAX; self.n_cols];
        for (k, &g) in cols.iter().enumerate() {
            if g >= self.n_cols {
                return Err(Error::IndexOutOfRange { index: g, dim: self.n_cols });
            }
            local[g] = k;
        }
        let mut triplets = Vec::new();
        for (r, &g) in rows.iter().enumerate() {
            if g >= self.n_rows {
                return Err(Error::IndexOutOfRange { index: g, dim: self.n_rows });
            }
            let (cs, vs) = self.row(g);
            for (&j, &v) in cs.iter().zip(vs) {
                if local[j] != usize::MAX {
                    triplets.push((r, local[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &triplets, false)
    }

    /// `self + alpha · other`; the result is symmetric-hinted when both operands are.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                got: other.n_rows,
            });
        }
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        for i in 0..self.n_rows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja < jb {
                    col_indices.push(ja);
                    values.push(va[p]);
                    p += 1;
                } else if jb < ja {
                    col_indices.push(jb);
                    values.push(alpha * vb[q]);
                    q += 1;
                } else {
                    col_indices.push(ja);
                    values.push(va[p] + alpha * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
            symmetric_hint: self.symmetric_hint && other.symmetric_hint,
        })
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Checks `(i,j) ⇔ (j,i)` with values equal to `rel_tol · max|A|`.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let t = self.transpose();
        if t.row_offsets != self.row_offsets || t.col_indices != self.col_indices {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        self.values
            .iter()
            .zip(&t.values)
            .all(|(a, b)| (a - b).abs() <= rel_tol * scale)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Hash of the shape, pattern and exact value bits; identical matrices give identical
    /// fingerprints within and across runs.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n_rows.hash(&mut h);
        self.n_cols.hash(&mut h);
        self.row_offsets.hash(&mut h);
        self.col_indices.hash(&mut h);
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Writes the lower triangle in MatrixMarket coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        let lower: Vec<(usize, usize, f64)> = (0..self.n_rows)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .filter(move |(&j, _)| j <= i)
                    .map(move |(&j, &v)| (i, j, v))
                    .collect::<Vec<_>>()
            })
            .collect();
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

/// `R A Rᵀ` for a restriction `R` (rows: coarse, columns: fine).
pub fn triple_product(r: &CsrMatrix, a: &CsrMatrix) -> Result<CsrMatrix> {
    if r.n_cols != a.n_rows || a.n_rows != a.n_cols {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows,
            got: r.n_cols,
        });
    }
    let rt = r.transpose();
    let art = a.matmul(&rt)?;
    let mut out = r.matmul(&art)?;
    if a.symmetric_hint {
        // exact symmetrization: rounding in the two products can differ by an ulp
        let t = out.transpose();
        if t.row_offsets == out.row_offsets && t.col_indices == out.col_indices {
            for (v, w) in out.values.iter_mut().zip(&t.values) {
                *v = 0.5 * (*v + w);
            }
            out.symmetric_hint = true;
        }
    }
    Ok(out)
}

/// Accumulates (row, col, value) contributions and converts them to CSR once.
#[derive(Debug, Default, Clone)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            triplets: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            triplets: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.triplets.push((i, j, v));
    }

    pub fn build(self, symmetric_hint: bool) -> Result<CsrMatrix> {
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, &self.triplets, symmetric_hint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t, true).unwrap()
    }

    #[test]
    fn identity_spmv() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(CsrMatrix::identity(3).spmv(&x).unwrap(), x);
    }

    #[test]
    fn tridiagonal_on_ones_telescopes() {
        let y = tridiag(4).spmv(&[1.0; 4]).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        assert!(matches!(
            tridiag(4).spmv(&[1.0; 3]),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 0.5)], false)
            .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 3.0);
    }

    #[test]
    fn submatrix_full_and_singleton() {
        let a = tridiag(5);
        assert_eq!(a.submatrix(&[0, 1, 2, 3, 4]).unwrap(), a);
        let s = a.submatrix(&[3]).unwrap();
        assert_eq!(s.to_dense(), vec![vec![2.0]]);
        assert!(matches!(
            a.submatrix(&[7]),
            Err(Error::IndexOutOfRange { index: 7, .. })
        ));
    }

    #[test]
    fn triple_product_small_cases() {
        let a = tridiag(3);
        assert_eq!(
            triple_product(&CsrMatrix::identity(3), &a).unwrap().to_dense(),
            a.to_dense()
        );
        let a2 = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]], true);
        let ones = CsrMatrix::from_dense(&[vec![1.0, 1.0]], false);
        assert_eq!(triple_product(&ones, &a2).unwrap().to_dense(), vec![vec![7.0]]);
    }

    #[test]
    fn add_scaled_merges_patterns() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], true);
        let b = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 2.0]], true);
        let c = a.add_scaled(2.0, &b).unwrap();
        assert_eq!(c.to_dense(), vec![vec![1.0, 2.0], vec![2.0, 5.0]]);
        assert!(c.symmetric_hint());
    }

    #[test]
    fn matrix_market_header() {
        let mut buf = Vec::new();
        tridiag(2).write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n"));
    }
}
