use std::time::{Duration, Instant};

use super::{LinearOperator, Solver};
use crate::error::{Error, Result};
use crate::sparsela::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCriterion {
    /// `√(rᵀz) / √(r₀ᵀz₀) ≤ tol`
    PreconditionedResidual,
    /// `‖r‖ / ‖b‖ ≤ tol`
    RelativeResidual,
}

#[derive(Debug, Clone)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub criterion: StopCriterion,
    /// Exact solution for recording `‖x − x*‖_A / ‖x*‖_A` per iteration.
    pub reference: Option<Vec<f64>>,
}

impl PcgOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            criterion: StopCriterion::PreconditionedResidual,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖r_k‖/‖b‖` of the recursively updated residual, entry 0 for the initial guess.
    pub residual_history: Vec<f64>,
    /// `√(r_kᵀz_k)/√(r₀ᵀz₀)`
    pub precond_residual_history: Vec<f64>,
    /// Relative A-norm error against the reference, when one was given.
    pub energy_error_history: Option<Vec<f64>>,
    /// `‖b − A x‖/‖b‖` recomputed at exit.
    pub final_relative_residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
}

impl SolveReport {
    /// Ratios of successive entries of the energy error history, or of the preconditioned
    /// residual history when no reference was given.
    pub fn reduction_factors(&self) -> Vec<f64> {
        let h = self
            .energy_error_history
            .as_ref()
            .unwrap_or(&self.precond_residual_history);
        h.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Preconditioned conjugate gradients. Stops on `opts.criterion` or after `max_iter`
/// iterations (then `converged = false`).
pub fn pcg(
    a: &dyn LinearOperator,
    b: &[f64],
    precond: &dyn LinearOperator,
    x0: Option<&[f64]>,
    opts: &PcgOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.dim();
    for len in [b.len(), precond.dim(), x0.map_or(n, <[f64]>::len)] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("pcg tolerance must be positive".into()));
    }
    if let Some(r) = &opts.reference {
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let b_norm = norm2(b);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };

    let mut ap = vec![0.0; n];
    let ref_norm = opts.reference.as_ref().map(|xs| {
        a.apply(xs, &mut ap);
        let v = dot(xs, &ap).sqrt();
        if v > 0.0 {
            v
        } else {
            1.0
        }
    });
    let mut err_buf = vec![0.0; n];
    let mut energy_error = |x: &[f64], ap: &mut [f64]| -> Option<f64> {
        let xs = opts.reference.as_ref()?;
        for i in 0..n {
            err_buf[i] = x[i] - xs[i];
        }
        a.apply(&err_buf, ap);
        Some(dot(&err_buf, ap).max(0.0).sqrt() / ref_norm.unwrap_or(1.0))
    };

    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut residual_history = vec![norm2(&r) / scale];
    let mut precond_residual_history = vec![1.0];
    let mut energy_hist = opts.reference.as_ref().map(|_| Vec::new());
    if let Some(h) = energy_hist.as_mut() {
        h.push(energy_error(&x, &mut ap).unwrap_or(0.0));
    }

    let done = |rel: f64, prel: f64| match opts.criterion {
        StopCriterion::PreconditionedResidual => prel <= opts.tol,
        StopCriterion::RelativeResidual => rel <= opts.tol,
    };
    let mut converged = rz0 <= 0.0 || residual_history[0] == 0.0;
    let mut p = z.clone();
    let mut it = 0;
    while !converged && it < opts.max_iter {
        a.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::BreakdownIndefinite {
                iteration: it,
                curvature,
            });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        it += 1;
        let rel = norm2(&r) / scale;
        let prel = (rz_new.max(0.0) / rz0).sqrt();
        residual_history.push(rel);
        precond_residual_history.push(prel);
        if let Some(h) = energy_hist.as_mut() {
            h.push(energy_error(&x, &mut ap).unwrap_or(0.0));
        }
        converged = done(rel, prel) || rz_new == 0.0;
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    a.apply(&x, &mut ap);
    let true_res: f64 = ap.iter().zip(b).map(|(v, w)| (w - v).powi(2)).sum::<f64>().sqrt() / scale;
    Ok((
        x,
        SolveReport {
            iterations: it,
            residual_history,
            precond_residual_history,
            energy_error_history: energy_hist,
            final_relative_residual: true_res,
            converged,
            wall_time: start.elapsed(),
        },
    ))
}

/// PCG wrapped as a [`Solver`]; fails with `NoConvergence` if the tolerance is not reached.
pub struct PcgSolver<'a> {
    pub a: &'a dyn LinearOperator,
    pub precond: &'a dyn LinearOperator,
    pub opts: PcgOptions,
}

impl Solver for PcgSolver<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (x, rep) = pcg(self.a, b, self.precond, None, &self.opts)?;
        if !rep.converged {
            return Err(Error::NoConvergence {
                method: "pcg",
                iterations: rep.iterations,
                residual: rep.final_relative_residual,
            });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{Identity, Jacobi};
    use crate::sparsela::{cholesky_factorize, CsrMatrix};

    fn laplacian(n: usize) -> CsrMatrix {
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
    fn identity_in_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 4.0];
        let (x, rep) = pcg(&a, &b, &Identity(5), None, &PcgOptions::new(1e-12, 10)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn jacobi_is_exact_for_diagonal() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1e4]], true);
        let b = [1.0, 1.0];
        let opts = PcgOptions::new(1e-12, 50);
        let (_, plain) = pcg(&a, &b, &Identity(2), None, &opts).unwrap();
        let (x, pre) = pcg(&a, &b, &Jacobi::new(&a), None, &opts).unwrap();
        assert!(pre.iterations <= 2 && pre.iterations <= plain.iterations);
        assert!((x[1] - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn exact_inverse_preconditioner() {
        let a = laplacian(100);
        let f = cholesky_factorize(&a).unwrap();
        let b: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).cos()).collect();
        let (_, rep) = pcg(&a, &b, &f, None, &PcgOptions::new(1e-10, 10)).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn energy_error_is_monotone() {
        let a = laplacian(60);
        let xs: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let b = a.spmv(&xs).unwrap();
        let mut opts = PcgOptions::new(1e-12, 200);
        opts.reference = Some(xs.clone());
        let (x, rep) = pcg(&a, &b, &Identity(60), None, &opts).unwrap();
        assert!(rep.converged);
        let h = rep.energy_error_history.unwrap();
        for w in h.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
        let err: f64 = x.iter().zip(&xs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn indefinite_breaks_down() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]], true);
        let r = pcg(&a, &[0.0, 1.0], &Identity(2), None, &PcgOptions::new(1e-10, 10));
        assert!(matches!(r, Err(Error::BreakdownIndefinite { .. })));
    }

    #[test]
    fn iteration_cap_reports_unconverged() {
        let a = laplacian(50);
        let b = vec![1.0; 50];
        let (_, rep) = pcg(&a, &b, &Identity(50), None, &PcgOptions::new(1e-14, 3)).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn zero_rhs() {
        let a = laplacian(4);
        let (x, rep) = pcg(&a, &[0.0; 4], &Identity(4), None, &PcgOptions::new(1e-10, 10)).unwrap();
        assert!(rep.converged && x.iter().all(|&v| v == 0.0));
    }
}
