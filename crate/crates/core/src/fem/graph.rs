//! Node-based graph mass and weighted Laplacian, and the scalar P1 matrices they are
//! spectrally equivalent to.

use super::GAUSS2;
use crate::network::Network;
use crate::sparsela::{CsrMatrix, TripletBuilder};

/// Scalar graph forms on the nodes without any constrained component.
#[derive(Debug, Clone)]
pub struct GraphForms {
    /// Network node index of each row.
    pub nodes: Vec<usize>,
    /// Diagonal `½ Σ_{e∼n} h_e`.
    pub mass: CsrMatrix,
    /// Weights `1/h_e`.
    pub laplacian: CsrMatrix,
}

fn free_nodes(net: &Network) -> (Vec<usize>, Vec<usize>) {
    let mut local = vec![usize::MAX; net.node_count()];
    let mut nodes = Vec::new();
    for i in 0..net.node_count() {
        if !net.node(i).is_constrained() {
            local[i] = nodes.len();
            nodes.push(i);
        }
    }
    (nodes, local)
}

pub fn graph_forms(net: &Network) -> GraphForms {
    let (nodes, local) = free_nodes(net);
    let n = nodes.len();
    let mut diag_m = vec![0.0; n];
    let mut diag_l = vec![0.0; n];
    let mut lap = TripletBuilder::new(n, n);
    for e in 0..net.edge_count() {
        let h = net.edge_length(e);
        let [a, b] = net.edge(e).endpoints;
        for (p, q) in [(a, b), (b, a)] {
            if local[p] == usize::MAX {
                continue;
            }
            diag_m[local[p]] += 0.5 * h;
            diag_l[local[p]] += 1.0 / h;
            if local[q] != usize::MAX {
                lap.push(local[p], local[q], -1.0 / h);
            }
        }
    }
    for i in 0..n {
        lap.push(i, i, diag_l[i]);
    }
    let mass = CsrMatrix::from_triplets(
        n,
        n,
        &diag_m.iter().enumerate().map(|(i, &v)| (i, i, v)).collect::<Vec<_>>(),
        true,
    )
    .expect("diagonal is valid");
    GraphForms {
        nodes,
        mass,
        laplacian: lap.build(true).expect("indices in range"),
    }
}

/// Scalar P1 stiffness `∫ ∂v ∂w` and consistent mass `∫ v w` on the same node set as
/// [`graph_forms`], integrated by quadrature of the shape functions.
pub fn scalar_p1_matrices(net: &Network) -> (CsrMatrix, CsrMatrix) {
    let (nodes, local) = free_nodes(net);
    let n = nodes.len();
    let mut k = TripletBuilder::new(n, n);
    let mut m = TripletBuilder::new(n, n);
    for e in 0..net.edge_count() {
        let h = net.edge_length(e);
        let ends = net.edge(e).endpoints;
        let grad = [-1.0 / h, 1.0 / h];
        for p in 0..2 {
            for q in 0..2 {
                let (i, j) = (local[ends[p]], local[ends[q]]);
                if i == usize::MAX || j == usize::MAX {
                    continue;
                }
                let mut kv = 0.0;
                let mut mv = 0.0;
                for &(xi, w) in &GAUSS2 {
                    let shape = [1.0 - xi, xi];
                    kv += w * h * grad[p] * grad[q];
                    mv += w * h * shape[p] * shape[q];
                }
                k.push(i, j, kv);
                m.push(i, j, mv);
            }
        }
    }
    (
        k.build(true).expect("indices in range"),
        m.build(true).expect("indices in range"),
    )
}
