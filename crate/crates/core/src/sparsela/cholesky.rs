//! Sparse SPD Cholesky factorization `P A Pᵀ = L Lᵀ` (up-looking, row by row).
//!
//! The symbolic phase computes the elimination tree and column counts; the numeric phase visits
//! the row pattern of each row of `L` via an elimination-tree reach. Systems with at most
//! [`DENSE_CUTOFF`] unknowns use a dense factor.

use super::ordering::reverse_cuthill_mckee;
use super::CsrMatrix;
use crate::error::{Error, Result};

/// Factorizations at or below this size are stored dense.
pub const DENSE_CUTOFF: usize = 64;

/// A pivot below `PIVOT_TOL · max|diag(A)|` is reported as loss of definiteness.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
enum Storage {
    Dense(Vec<f64>),
    Sparse {
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        vals: Vec<f64>,
    },
}

/// Cholesky factor together with its fill-reducing permutation (`perm[new] = old`).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    storage: Storage,
    /// Permuted positions whose pivots were dropped (semidefinite mode only).
    dropped: Vec<usize>,
}

impl CholeskyFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Stored entries of `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(_) => self.n * (self.n + 1) / 2,
            Storage::Sparse { vals, .. } => vals.len(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Original indices of the unknowns eliminated as linearly dependent; the solve returns
    /// zero for them.
    pub fn dropped(&self) -> Vec<usize> {
        self.dropped.iter().map(|&k| self.perm[k]).collect()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Unchecked solve writing into `x`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        match &self.storage {
            Storage::Dense(l) => {
                for i in 0..n {
                    let row = &l[i * n..i * n + i];
                    let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
                    y[i] = (y[i] - s) / l[i * n + i];
                }
                for &k in &self.dropped {
                    y[k] = 0.0;
                }
                for i in (0..n).rev() {
                    let mut s = y[i];
                    for k in i + 1..n {
                        s -= l[k * n + i] * y[k];
                    }
                    y[i] = s / l[i * n + i];
                }
            }
            Storage::Sparse {
                col_ptr,
                row_idx,
                vals,
            } => {
                for j in 0..n {
                    let yj = y[j] / vals[col_ptr[j]];
                    y[j] = yj;
                    for p in col_ptr[j] + 1..col_ptr[j + 1] {
                        y[row_idx[p]] -= vals[p] * yj;
                    }
                }
                for &k in &self.dropped {
                    y[k] = 0.0;
                }
                for j in (0..n).rev() {
                    let mut s = y[j];
                    for p in col_ptr[j] + 1..col_ptr[j + 1] {
                        s -= vals[p] * y[row_idx[p]];
                    }
                    y[j] = s / vals[col_ptr[j]];
                }
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
    }
}

/// Factorizes a symmetric positive definite matrix under reverse Cuthill–McKee ordering.
pub fn cholesky_factorize(a: &CsrMatrix) -> Result<CholeskyFactor> {
    factorize(a, None)
}

/// Factorization of a symmetric positive semidefinite matrix. A pivot that falls below
/// `rel_tol` times its original diagonal entry marks the unknown as dependent on earlier ones:
/// it is eliminated and solves return zero for it, i.e. the factor solves exactly on the span
/// of the remaining unknowns.
pub fn cholesky_factorize_semidefinite(a: &CsrMatrix, rel_tol: f64) -> Result<CholeskyFactor> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidArgument("rel_tol must lie in (0, 1)".into()));
    }
    factorize(a, Some(rel_tol))
}

fn factorize(a: &CsrMatrix, drop_tol: Option<f64>) -> Result<CholeskyFactor> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            got: a.n_cols(),
        });
    }
    if !a.symmetric_hint() {
        return Err(Error::InvalidArgument(
            "Cholesky factorization requires a symmetric matrix".into(),
        ));
    }
    let n = a.n_rows();
    let perm = reverse_cuthill_mckee(a);
    let c = a.submatrix(&perm)?;
    let diag = c.diagonal();
    let max_diag = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let pivots = Pivots {
        tol: PIVOT_TOL * max_diag,
        drop: drop_tol.map(|r| diag.iter().map(|d| r * d.abs()).collect()),
    };
    let mut dropped = Vec::new();
    let storage = if n <= DENSE_CUTOFF {
        dense_factor(&c, &pivots, &mut dropped).map_err(|k| not_pd(&perm, k, "dense factorization"))?
    } else {
        sparse_factor(&c, &pivots, &mut dropped).map_err(|k| not_pd(&perm, k, "sparse factorization"))?
    };
    Ok(CholeskyFactor {
        n,
        perm,
        storage,
        dropped,
    })
}

struct Pivots {
    tol: f64,
    /// Per-row drop thresholds in semidefinite mode.
    drop: Option<Vec<f64>>,
}

impl Pivots {
    /// `Ok(true)` to drop the pivot, `Ok(false)` to keep it.
    fn check(&self, k: usize, d: f64) -> std::result::Result<bool, (usize, f64)> {
        match &self.drop {
            Some(t) if d <= t[k].max(self.tol) => Ok(true),
            _ if d > self.tol => Ok(false),
            _ => Err((k, d)),
        }
    }
}

fn not_pd(perm: &[usize], (k, d): (usize, f64), context: &str) -> Error {
    Error::NotPositiveDefinite {
        pivot: perm[k],
        value: d,
        context: context.into(),
    }
}

fn dense_factor(c: &CsrMatrix, pivots: &Pivots, dropped: &mut Vec<usize>) -> std::result::Result<Storage, (usize, f64)> {
    let n = c.n_rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        let (cols, vals) = c.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                l[i * n + j] = v;
            }
        }
    }
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if pivots.check(j, d)? {
            dropped.push(j);
            l[j * n..j * n + j].iter_mut().for_each(|v| *v = 0.0);
            l[j * n + j] = 1.0;
            for i in j + 1..n {
                l[i * n + j] = 0.0;
            }
            continue;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(Storage::Dense(l))
}

/// Elimination tree of a symmetric matrix from its upper triangle (row `k`, columns `< k`).
fn elimination_tree(c: &CsrMatrix) -> Vec<usize> {
    let n = c.n_rows();
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for &i0 in c.row(k).0 {
            let mut i = i0;
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Pattern of row `k` of `L` (excluding the diagonal) in topological order, written into
/// `stack[top..]`; returns `top`.
fn ereach(
    c: &CsrMatrix,
    k: usize,
    parent: &[usize],
    stack: &mut [usize],
    mark: &mut [usize],
) -> usize {
    let n = c.n_rows();
    let mut top = n;
    mark[k] = k;
    let mut path = Vec::new();
    for &i0 in c.row(k).0 {
        if i0 > k {
            continue;
        }
        let mut i = i0;
        path.clear();
        while mark[i] != k {
            path.push(i);
            mark[i] = k;
            i = parent[i];
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

fn sparse_factor(c: &CsrMatrix, pivots: &Pivots, dropped: &mut Vec<usize>) -> std::result::Result<Storage, (usize, f64)> {
    let n = c.n_rows();
    let parent = elimination_tree(c);
    let mut stack = vec![0usize; n];
    let mut mark = vec![usize::MAX; n];

    // symbolic: column counts by visiting every row pattern once
    let mut counts = vec![1usize; n];
    for k in 0..n {
        let top = ereach(c, k, &parent, &mut stack, &mut mark);
        for &i in &stack[top..] {
            counts[i] += 1;
        }
    }
    let mut col_ptr = vec![0usize; n + 1];
    for j in 0..n {
        col_ptr[j + 1] = col_ptr[j] + counts[j];
    }
    let nnz = col_ptr[n];
    let mut row_idx = vec![0usize; nnz];
    let mut vals = vec![0.0; nnz];
    let mut next = col_ptr.clone();
    let mut x = vec![0.0; n];
    let mut is_dropped = vec![false; n];
    mark.iter_mut().for_each(|m| *m = usize::MAX);

    for k in 0..n {
        let top = ereach(c, k, &parent, &mut stack, &mut mark);
        let (cols, cvals) = c.row(k);
        for (&i, &v) in cols.iter().zip(cvals) {
            if i <= k {
                x[i] = v;
            }
        }
        let mut d = x[k];
        x[k] = 0.0;
        for &i in &stack[top..] {
            let lki = if is_dropped[i] { 0.0 } else { x[i] / vals[col_ptr[i]] };
            x[i] = 0.0;
            for p in col_ptr[i] + 1..next[i] {
                x[row_idx[p]] -= vals[p] * lki;
            }
            d -= lki * lki;
            let p = next[i];
            row_idx[p] = k;
            vals[p] = lki;
            next[i] += 1;
        }
        let p = next[k];
        row_idx[p] = k;
        next[k] += 1;
        if pivots.check(k, d)? {
            is_dropped[k] = true;
            dropped.push(k);
            for &i in &stack[top..] {
                vals[next[i] - 1] = 0.0;
            }
            vals[p] = 1.0;
        } else {
            vals[p] = d.sqrt();
        }
    }
    Ok(Storage::Sparse {
        col_ptr,
        row_idx,
        vals,
    })
}

/// Solves `A x = b` with a fresh factorization; convenience for one-off systems.
pub fn cholesky_solve(factor: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>> {
    factor.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
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

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.spmv(x).unwrap();
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
        let nb: f64 = b.iter().map(|v| v * v).sum();
        (r / nb).sqrt()
    }

    #[test]
    fn identity_factor() {
        let f = cholesky_factorize(&CsrMatrix::identity(5)).unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let f = cholesky_factorize(&laplacian_1d(100)).unwrap();
        assert!(f.solve(&vec![0.0; 100]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        for n in [8, 64, 65, 300] {
            let a = laplacian_1d(n);
            let f = cholesky_factorize(&a).unwrap();
            assert_eq!(f.is_dense(), n <= DENSE_CUTOFF);
            let b: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
            let x = f.solve(&b).unwrap();
            assert!(residual(&a, &x, &b) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn tridiagonal_has_no_fill() {
        let f = cholesky_factorize(&laplacian_1d(200)).unwrap();
        assert_eq!(f.factor_nnz(), 200 + 199);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]], true);
        assert!(matches!(
            cholesky_factorize(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let mut big = laplacian_1d(100).to_dense();
        big[50][50] = -3.0;
        let a = CsrMatrix::from_dense(&big, true);
        assert!(matches!(
            cholesky_factorize(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn unsymmetric_hint_rejected() {
        let a = laplacian_1d(3).with_symmetric_hint(false);
        assert!(matches!(cholesky_factorize(&a), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let a = laplacian_1d(120);
        let f = cholesky_factorize(&a).unwrap();
        let b: Vec<f64> = (0..120).map(|i| (i as f64).sin()).collect();
        let x1 = f.solve(&b).unwrap();
        let x2 = f.solve(&b).unwrap();
        assert!(x1.iter().zip(&x2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    // Laplacian with an extra unknown that duplicates unknown `k`.
    fn duplicated(n: usize, k: usize) -> CsrMatrix {
        let l = laplacian_1d(n).to_dense();
        let mut a = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..=n {
            for j in 0..=n {
                let (p, q) = (if i == n { k } else { i }, if j == n { k } else { j });
                a[i][j] = l[p][q];
            }
        }
        CsrMatrix::from_dense(&a, true)
    }

    #[test]
    fn semidefinite_drops_dependent_unknowns() {
        for n in [10, 150] {
            let a = duplicated(n, 3);
            assert!(cholesky_factorize(&a).is_err());
            let f = cholesky_factorize_semidefinite(&a, 1e-10).unwrap();
            let dropped = f.dropped();
            assert_eq!(dropped.len(), 1);
            assert!(dropped[0] == 3 || dropped[0] == n);
            let xi: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.7).cos()).collect();
            let b = a.spmv(&xi).unwrap();
            let x = f.solve(&b).unwrap();
            assert_eq!(x[dropped[0]], 0.0);
            assert!(residual(&a, &x, &b) < 1e-10, "n = {n}");
        }
        let f = cholesky_factorize_semidefinite(&laplacian_1d(80), 1e-10).unwrap();
        assert!(f.dropped().is_empty());
    }
}
