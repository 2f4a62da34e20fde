//! Sparse linear algebra: CSR storage, products, principal submatrices and SPD factorization.

mod cholesky;
mod csr;
pub mod ordering;

pub use cholesky::{cholesky_factorize, cholesky_factorize_semidefinite, cholesky_solve, CholeskyFactor, DENSE_CUTOFF, PIVOT_TOL};
pub use csr::{triple_product, CsrMatrix, TripletBuilder};

/// Euclidean dot product, summed in index order.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
