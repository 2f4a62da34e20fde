//! P1 finite element discretization on beam networks: dof numbering, element and global
//! matrices with Dirichlet elimination, loads, norms and the graph forms.

mod element;
mod graph;
mod loads;
mod norms;

use rayon::prelude::*;

pub use element::{element_mass, element_stiffness, element_stiffness_with_rule, skew, Mat12, GAUSS2};
pub use graph::{graph_forms, scalar_p1_matrices, GraphForms};
pub use loads::{assemble_load, theta_load};
pub use norms::{l2_norm, prolongate, transfer, v_norm};

use crate::error::{Error, Result};
use crate::network::{Network, Vec3, NODE_DOFS};
use crate::sparsela::{cholesky_factorize, CsrMatrix, TripletBuilder};

/// Numbering of the `6·n_nodes` scalar unknowns: free dofs first, grouped by node as
/// (u₁,u₂,u₃,r₁,r₂,r₃), then constrained dofs in the same node/component order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    index: Vec<[usize; NODE_DOFS]>,
    owner: Vec<(usize, usize)>,
    n_free: usize,
    prescribed: Vec<f64>,
}

impl DofMap {
    pub fn new(net: &Network) -> Self {
        let n = net.node_count();
        let mut index = vec![[usize::MAX; NODE_DOFS]; n];
        let mut owner = Vec::with_capacity(n * NODE_DOFS);
        let mut n_free = 0;
        for pass_free in [true, false] {
            for (i, node) in net.nodes().iter().enumerate() {
                for k in 0..NODE_DOFS {
                    if node.constrained[k] != pass_free {
                        index[i][k] = owner.len();
                        owner.push((i, k));
                    }
                }
            }
            if pass_free {
                n_free = owner.len();
            }
        }
        let prescribed = owner[n_free..]
            .iter()
            .map(|&(i, k)| net.node(i).prescribed[k])
            .collect();
        Self {
            index,
            owner,
            n_free,
            prescribed,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.index.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_total(&self) -> usize {
        self.owner.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.owner.len() - self.n_free
    }

    /// Global index of `(node, component)`.
    pub fn dof(&self, node: usize, component: usize) -> usize {
        self.index[node][component]
    }

    pub fn node_dofs(&self, node: usize) -> &[usize; NODE_DOFS] {
        &self.index[node]
    }

    /// `(node, component)` owning global index `dof`.
    pub fn owner(&self, dof: usize) -> (usize, usize) {
        self.owner[dof]
    }

    pub fn is_free(&self, dof: usize) -> bool {
        dof < self.n_free
    }

    /// Prescribed values of the constrained dofs, in constrained order.
    pub fn prescribed(&self) -> &[f64] {
        &self.prescribed
    }

    /// Appends the prescribed values to a free vector.
    pub fn full_from_free(&self, x_free: &[f64]) -> Vec<f64> {
        assert_eq!(x_free.len(), self.n_free);
        let mut x = Vec::with_capacity(self.n_total());
        x.extend_from_slice(x_free);
        x.extend_from_slice(&self.prescribed);
        x
    }

    pub fn state_from_full(&self, x: &[f64]) -> State {
        let n = self.n_nodes();
        let mut s = State::zeros(n);
        for i in 0..n {
            for k in 0..3 {
                s.u[i][k] = x[self.index[i][k]];
                s.r[i][k] = x[self.index[i][k + 3]];
            }
        }
        s
    }

    pub fn state_from_free(&self, x_free: &[f64]) -> State {
        self.state_from_full(&self.full_from_free(x_free))
    }

    /// Global vector of a state (constrained entries taken from the state, not the map).
    pub fn full_from_state(&self, s: &State) -> Vec<f64> {
        let mut x = vec![0.0; self.n_total()];
        for i in 0..self.n_nodes() {
            for k in 0..3 {
                x[self.index[i][k]] = s.u[i][k];
                x[self.index[i][k + 3]] = s.r[i][k];
            }
        }
        x
    }

    pub fn free_from_state(&self, s: &State) -> Vec<f64> {
        let mut x = self.full_from_state(s);
        x.truncate(self.n_free);
        x
    }
}

/// Nodal displacement and rotation coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<Vec3>,
    pub r: Vec<Vec3>,
    /// ms
    pub time: Option<f64>,
}

impl State {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            u: vec![Vec3::zeros(); n_nodes],
            r: vec![Vec3::zeros(); n_nodes],
            time: None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.u.len()
    }

    /// Component `k` (0..6) of node `i`.
    pub fn component(&self, i: usize, k: usize) -> f64 {
        if k < 3 {
            self.u[i][k]
        } else {
            self.r[i][k - 3]
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.r).all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Componentwise `self − other`.
    pub fn sub(&self, other: &State) -> State {
        State {
            u: self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect(),
            r: self.r.iter().zip(&other.r).map(|(a, b)| a - b).collect(),
            time: None,
        }
    }

    pub fn scaled(&self, s: f64) -> State {
        State {
            u: self.u.iter().map(|a| a * s).collect(),
            r: self.r.iter().map(|a| a * s).collect(),
            time: self.time,
        }
    }
}

/// Global stiffness and mass. `a`, `m` act on free dofs; `a_full`, `m_full` on all dofs in
/// dof-map order, kept for energies of states with inhomogeneous Dirichlet data.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub dof_map: DofMap,
    pub a: CsrMatrix,
    pub m: CsrMatrix,
    /// `−A_fc g_c`
    pub lift: Vec<f64>,
    pub a_full: CsrMatrix,
    pub m_full: CsrMatrix,
}

impl AssembledSystem {
    pub fn n_free(&self) -> usize {
        self.dof_map.n_free()
    }

    /// `xᵀ A x` over all dofs.
    pub fn a_energy(&self, s: &State) -> f64 {
        let x = self.dof_map.full_from_state(s);
        self.a_full.quad_form(&x)
    }

    /// `xᵀ M x` over all dofs.
    pub fn m_energy(&self, s: &State) -> f64 {
        let x = self.dof_map.full_from_state(s);
        self.m_full.quad_form(&x)
    }

    /// Solves the stationary problem `A x = load + lift` by sparse Cholesky.
    pub fn solve_direct(&self, load: &[f64]) -> Result<State> {
        let rhs = self.rhs(load)?;
        if rhs.is_empty() {
            return Ok(self.dof_map.state_from_free(&[]));
        }
        let f = cholesky_factorize(&self.a)?;
        Ok(self.dof_map.state_from_free(&f.solve(&rhs)?))
    }

    /// `load + lift`
    pub fn rhs(&self, load: &[f64]) -> Result<Vec<f64>> {
        if load.len() != self.n_free() {
            return Err(Error::DimensionMismatch {
                expected: self.n_free(),
                got: load.len(),
            });
        }
        Ok(load.iter().zip(&self.lift).map(|(a, b)| a + b).collect())
    }
}

/// Assembles stiffness and mass; element matrices are computed in parallel and merged in edge
/// order.
pub fn assemble(net: &Network) -> AssembledSystem {
    let dof_map = DofMap::new(net);
    let elems: Vec<(Mat12, Mat12)> = (0..net.edge_count())
        .into_par_iter()
        .map(|e| {
            let edge = net.edge(e);
            let (x1, x2) = (net.node(edge.endpoints[0]).position, net.node(edge.endpoints[1]).position);
            (element_stiffness(edge, &x1, &x2), element_mass(edge, &x1, &x2, net.c()))
        })
        .collect();

    let n = dof_map.n_total();
    let mut ka = TripletBuilder::with_capacity(n, n, 144 * net.edge_count());
    let mut km = TripletBuilder::with_capacity(n, n, 72 * net.edge_count());
    for (e, (ke, me)) in elems.iter().enumerate() {
        let [a, b] = net.edge(e).endpoints;
        let mut g = [0usize; 12];
        for k in 0..NODE_DOFS {
            g[k] = dof_map.dof(a, k);
            g[k + 6] = dof_map.dof(b, k);
        }
        for p in 0..12 {
            for q in 0..12 {
                ka.push(g[p], g[q], ke[(p, q)]);
                if me[(p, q)] != 0.0 {
                    km.push(g[p], g[q], me[(p, q)]);
                }
            }
        }
    }
    let a_full = ka.build(true).expect("indices in range");
    let m_full = km.build(true).expect("indices in range");
    let nf = dof_map.n_free();
    let free: Vec<usize> = (0..nf).collect();
    let cons: Vec<usize> = (nf..n).collect();
    let a = a_full.submatrix(&free).expect("free range is valid");
    let m = m_full.submatrix(&free).expect("free range is valid");
    let a_fc = a_full.block(&free, &cons).expect("ranges are valid");
    let lift = a_fc
        .spmv(dof_map.prescribed())
        .expect("dimensions agree")
        .into_iter()
        .map(|v| -v)
        .collect();
    AssembledSystem {
        dof_map,
        a,
        m,
        lift,
        a_full,
        m_full,
    }
}
