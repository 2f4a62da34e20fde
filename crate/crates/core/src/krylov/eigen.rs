use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LinearOperator, Solver};
use crate::error::{Error, Result};
use crate::sparsela::{cholesky_factorize, dot, norm2, CsrMatrix};

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Start vector; a fixed pseudo-random vector when absent.
    pub start: Option<Vec<f64>>,
}

impl EigenOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub value: f64,
    /// M-normalized.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖A x − λ M x‖ / ‖M x‖`
    pub residual: f64,
}

fn start_vector(n: usize, opts: &EigenOptions) -> Result<Vec<f64>> {
    match &opts.start {
        Some(s) if s.len() != n => Err(Error::DimensionMismatch { expected: n, got: s.len() }),
        Some(s) => Ok(s.clone()),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            Ok((0..n).map(|_| rng.gen_range(0.5..1.5)).collect())
        }
    }
}

fn check_pencil(a: &CsrMatrix, m: &CsrMatrix) -> Result<usize> {
    let n = a.n_rows();
    for d in [a.n_cols(), m.n_rows(), m.n_cols()] {
        if d != n {
            return Err(Error::DimensionMismatch { expected: n, got: d });
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty eigenproblem".into()));
    }
    Ok(n)
}

fn residual(a: &CsrMatrix, m: &CsrMatrix, lambda: f64, x: &[f64], ax: &mut [f64], mx: &mut [f64]) -> f64 {
    a.apply(x, ax);
    m.apply(x, mx);
    let r: f64 = ax.iter().zip(mx.iter()).map(|(p, q)| (p - lambda * q).powi(2)).sum();
    r.sqrt() / norm2(mx)
}

/// Smallest eigenpair of `A x = λ M x` by inverse iteration; `a_inv` solves with `A`.
pub fn smallest_eigenpair(
    a: &CsrMatrix,
    m: &CsrMatrix,
    a_inv: &dyn Solver,
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let n = check_pencil(a, m)?;
    if a_inv.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a_inv.dim() });
    }
    let mut x = start_vector(n, opts)?;
    let mut mx = vec![0.0; n];
    let mut ax = vec![0.0; n];
    m.apply(&x, &mut mx);
    let s = dot(&x, &mx).sqrt();
    x.iter_mut().for_each(|v| *v /= s);
    let mut res = f64::INFINITY;
    for it in 1..=opts.max_iter {
        m.apply(&x, &mut mx);
        let mut y = a_inv.solve(&mx)?;
        m.apply(&y, &mut mx);
        let s = dot(&y, &mx).sqrt();
        y.iter_mut().for_each(|v| *v /= s);
        // fix the sign so iterates do not flip
        let k = (0..n).max_by(|&i, &j| y[i].abs().total_cmp(&y[j].abs())).unwrap_or(0);
        if y[k] < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        x = y;
        a.apply(&x, &mut ax);
        let lambda = dot(&x, &ax);
        res = residual(a, m, lambda, &x, &mut ax, &mut mx);
        if res <= opts.tol {
            return Ok(EigenResult {
                value: lambda,
                vector: x,
                iterations: it,
                residual: res,
            });
        }
    }
    Err(Error::NoConvergence {
        method: "inverse iteration",
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Largest eigenvalue of `M⁻¹A` by power iteration (M solves by Cholesky); stops when the
/// Rayleigh quotient changes by at most `tol` relative.
pub fn largest_eigenvalue(a: &CsrMatrix, m: &CsrMatrix, opts: &EigenOptions) -> Result<EigenResult> {
    let n = check_pencil(a, m)?;
    let fm = cholesky_factorize(m)?;
    let mut x = start_vector(n, opts)?;
    let mut ax = vec![0.0; n];
    let mut mx = vec![0.0; n];
    let mut prev = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        a.apply(&x, &mut ax);
        let mut y = fm.solve(&ax)?;
        m.apply(&y, &mut mx);
        let s = dot(&y, &mx).sqrt();
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("power iteration collapsed to zero".into()));
        }
        y.iter_mut().for_each(|v| *v /= s);
        x = y;
        a.apply(&x, &mut ax);
        let lambda = dot(&x, &ax);
        change = (lambda - prev).abs() / lambda.abs();
        prev = lambda;
        if change <= opts.tol {
            let residual = residual(a, m, lambda, &x, &mut ax, &mut mx);
            return Ok(EigenResult {
                value: lambda,
                vector: x,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        method: "power iteration",
        iterations: opts.max_iter,
        residual: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn diag(v: &[f64]) -> CsrMatrix {
        let t: Vec<_> = v.iter().enumerate().map(|(i, &x)| (i, i, x)).collect();
        CsrMatrix::from_triplets(v.len(), v.len(), &t, true).unwrap()
    }

    #[test]
    fn diagonal_pencil() {
        let a = diag(&[2.0, 5.0]);
        let m = CsrMatrix::identity(2);
        let f = cholesky_factorize(&a).unwrap();
        let lo = smallest_eigenpair(&a, &m, &f, &EigenOptions::new(1e-12, 500)).unwrap();
        assert!((lo.value - 2.0).abs() < 1e-12);
        assert!((lo.vector[0].abs() - 1.0).abs() < 1e-10 && lo.vector[1].abs() < 1e-6);
        let hi = largest_eigenvalue(&a, &m, &EigenOptions::new(1e-14, 500)).unwrap();
        assert!((hi.value - 5.0).abs() < 1e-10);
    }

    #[test]
    fn laplacian_pencil_against_dense() {
        let n = 30;
        let mut ta = Vec::new();
        let mut tm = Vec::new();
        for i in 0..n {
            ta.push((i, i, 2.0));
            tm.push((i, i, 4.0 / 6.0));
            if i > 0 {
                ta.push((i, i - 1, -1.0));
                ta.push((i - 1, i, -1.0));
                tm.push((i, i - 1, 1.0 / 6.0));
                tm.push((i - 1, i, 1.0 / 6.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &ta, true).unwrap();
        let m = CsrMatrix::from_triplets(n, n, &tm, true).unwrap();
        // dense oracle through the Cholesky factor of M
        let ad = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let md = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        let l = md.cholesky().unwrap().l();
        let li = l.clone().try_inverse().unwrap();
        let ev = (&li * ad * li.transpose()).symmetric_eigenvalues();
        let f = cholesky_factorize(&a).unwrap();
        let lo = smallest_eigenpair(&a, &m, &f, &EigenOptions::new(1e-11, 5000)).unwrap();
        assert!((lo.value - ev.min()).abs() <= 1e-8 * ev.min());
        let hi = largest_eigenvalue(&a, &m, &EigenOptions::new(1e-14, 50_000)).unwrap();
        assert!((hi.value - ev.max()).abs() <= 1e-8 * ev.max());
    }
}
