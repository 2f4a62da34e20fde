//! Time-step bounds for θ < ¼.

use crate::error::Result;
use crate::fem::{scalar_p1_matrices, AssembledSystem};
use crate::krylov::{largest_eigenvalue, smallest_eigenpair, EigenOptions};
use crate::network::Network;
use crate::sparsela::cholesky_factorize;

/// Inverse-inequality constant of linear elements in one dimension.
pub const C_INV: f64 = 3.464_101_615_137_754_6; // √12

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CflMode {
    /// `τ ≤ h_min √(m_min/a_max) / (√(¼−θ) C_inv)`; `a_max` defaults to [`default_a_max`].
    Conservative { a_max: Option<f64> },
    /// `τ* = 1/√((¼−θ) λ_max(M⁻¹A))`, power iteration to relative tolerance `tol`.
    Sharp { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflEstimate {
    /// ms; `+∞` for θ ≥ ¼.
    pub tau: f64,
    pub lambda_max: Option<f64>,
    pub a_max: Option<f64>,
    pub m_min: Option<f64>,
    pub h_min: f64,
}

pub fn sharp_tau(lambda_max: f64, theta: f64) -> f64 {
    if theta >= 0.25 {
        f64::INFINITY
    } else {
        1.0 / ((0.25 - theta) * lambda_max).sqrt()
    }
}

pub fn conservative_tau(h_min: f64, m_min: f64, a_max: f64, theta: f64) -> f64 {
    if theta >= 0.25 {
        f64::INFINITY
    } else {
        h_min * (m_min / a_max).sqrt() / ((0.25 - theta).sqrt() * C_INV)
    }
}

/// `C_F²` with `‖v‖² ≤ C_F² ‖∂v‖²` for scalar P1 functions vanishing at constrained nodes:
/// the reciprocal of the smallest eigenvalue of the scalar stiffness/mass pencil.
pub fn friedrichs_constant_sq(net: &Network) -> Result<f64> {
    let (k, m) = scalar_p1_matrices(net);
    let fk = cholesky_factorize(&k)?;
    let eig = smallest_eigenpair(&k, &m, &fk, &EigenOptions::new(1e-10 * k.max_abs(), 100_000))?;
    Ok(1.0 / eig.value)
}

/// Continuity constant of `a` in the `V×V` norm from coefficient extremes:
/// `a(v,v) ≤ 2b_max‖∂u‖² + (c_max + 2b_max C_F²)‖∂r‖²`.
pub fn default_a_max(net: &Network) -> Result<f64> {
    let bounds = net.coefficient_bounds();
    let cf2 = friedrichs_constant_sq(net)?;
    Ok((2.0 * bounds.b.1).max(bounds.c.1 + 2.0 * bounds.b.1 * cf2))
}

pub fn cfl_estimate(net: &Network, system: &AssembledSystem, theta: f64, mode: CflMode) -> Result<CflEstimate> {
    let h_min = net.min_edge_length();
    if theta >= 0.25 {
        return Ok(CflEstimate {
            tau: f64::INFINITY,
            lambda_max: None,
            a_max: None,
            m_min: None,
            h_min,
        });
    }
    match mode {
        CflMode::Conservative { a_max } => {
            let a_max = match a_max {
                Some(v) => v,
                None => default_a_max(net)?,
            };
            let b = net.coefficient_bounds();
            let m_min = net.c().min(b.d.0);
            Ok(CflEstimate {
                tau: conservative_tau(h_min, m_min, a_max, theta),
                lambda_max: None,
                a_max: Some(a_max),
                m_min: Some(m_min),
                h_min,
            })
        }
        CflMode::Sharp { tol } => {
            let lam = largest_eigenvalue(&system.a, &system.m, &EigenOptions::new(tol, 1_000_000))?.value;
            Ok(CflEstimate {
                tau: sharp_tau(lam, theta),
                lambda_max: Some(lam),
                a_max: None,
                m_min: None,
                h_min,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::network::{build_network, Edge, Node, NodeConstraint, Vec3};
    use nalgebra::DMatrix;

    #[test]
    fn leapfrog_sharp_bound_is_two_over_root_lambda() {
        assert_eq!(sharp_tau(4.0, 0.0), 1.0);
        assert!(sharp_tau(4.0, 0.25).is_infinite());
        assert!(conservative_tau(1.0, 1.0, 1.0, 0.3).is_infinite());
    }

    #[test]
    fn single_clamped_edge_against_dense() {
        let nodes = vec![Node::new(0, Vec3::zeros()), Node::new(1, Vec3::new(1.0, 0.5, 0.0))];
        let mut e = Edge::unit(0, 1);
        e.b *= 3.0;
        let net = build_network(nodes, vec![e], 0.7, &[NodeConstraint::clamp(0)]).unwrap();
        let sys = assemble(&net);
        let est = cfl_estimate(&net, &sys, 0.0, CflMode::Sharp { tol: 1e-14 }).unwrap();
        let a = DMatrix::from_fn(6, 6, |i, j| sys.a.get(i, j));
        let m = DMatrix::from_fn(6, 6, |i, j| sys.m.get(i, j));
        let li = m.cholesky().unwrap().l().try_inverse().unwrap();
        let lam = (&li * a * li.transpose()).symmetric_eigenvalues().max();
        assert!((est.tau - 2.0 / lam.sqrt()).abs() <= 1e-8 * est.tau);
    }

    #[test]
    fn friedrichs_constant_of_clamped_bar() {
        // −v'' = λ v on (0, L), v(0) = 0, v'(L) = 0: λ₁ = (π / 2L)²
        let n = 64;
        let nodes: Vec<Node> = (0..=n).map(|i| Node::new(i, Vec3::new(i as f64 / n as f64, 0.0, 0.0))).collect();
        let edges = (0..n).map(|i| Edge::unit(i, i + 1)).collect();
        let net = build_network(nodes, edges, 1.0, &[NodeConstraint::clamp(0)]).unwrap();
        let cf2 = friedrichs_constant_sq(&net).unwrap();
        let exact = (2.0 / std::f64::consts::PI).powi(2);
        assert!((cf2 - exact).abs() < 1e-3 * exact);
    }
}
