//! Preconditioned conjugate gradients and extreme generalized eigenvalue estimators.

mod eigen;
mod pcg;

pub use eigen::{largest_eigenvalue, smallest_eigenpair, EigenOptions, EigenResult};
pub use pcg::{pcg, PcgOptions, PcgSolver, SolveReport, StopCriterion};

use crate::error::Result;
use crate::sparsela::{CholeskyFactor, CsrMatrix};

/// Symmetric linear map on `R^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

impl LinearOperator for CholeskyFactor {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y);
    }
}

pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Diagonal scaling by the inverse diagonal of a matrix.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        Self {
            inv_diag: a.diagonal().iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl LinearOperator for Jacobi {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.inv_diag) {
            *yi = xi * d;
        }
    }
}

/// Something that (approximately) solves `A x = b`.
pub trait Solver: Sync {
    fn dim(&self) -> usize;
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>>;
}

impl Solver for CholeskyFactor {
    fn dim(&self) -> usize {
        self.n()
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        CholeskyFactor::solve(self, b)
    }
}
