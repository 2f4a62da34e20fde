//! Uniform edge subdivision.

use super::{Edge, Network, Node};
use crate::error::{Error, Result};

/// Index in `refine(net, n_splits)` of the point at fraction `k / 2^n_splits` along coarse
/// edge `e` (k = 0 and k = 2^n_splits give the coarse endpoints).
pub fn refined_node_index(net: &Network, e: usize, k: usize, n_splits: u32) -> usize {
    let segs = 1usize << n_splits;
    let [a, b] = net.edge(e).endpoints;
    match k {
        0 => a,
        k if k == segs => b,
        k => net.node_count() + e * (segs - 1) + (k - 1),
    }
}

/// Splits every edge into `2^n_splits` equal collinear pieces carrying the parent's
/// coefficients. Coarse nodes keep their indices and constraints; new interior nodes follow in
/// edge order and are unconstrained.
pub fn refine(net: &Network, n_splits: u32) -> Result<Network> {
    if n_splits == 0 {
        return Err(Error::InvalidArgument("n_splits must be >= 1".into()));
    }
    let segs = 1usize << n_splits;
    let mut nodes: Vec<Node> = net.nodes().to_vec();
    nodes.reserve(net.edge_count() * (segs - 1));
    let mut edges = Vec::with_capacity(net.edge_count() * segs);
    for (e, edge) in net.edges().iter().enumerate() {
        let [a, b] = edge.endpoints;
        let (xa, xb) = (net.node(a).position, net.node(b).position);
        for k in 1..segs {
            let t = k as f64 / segs as f64;
            // convex combination keeps coordinates inside the bounding box
            nodes.push(Node::new(nodes.len(), xa * (1.0 - t) + xb * t));
        }
        for k in 0..segs {
            edges.push(Edge::new(
                refined_node_index(net, e, k, n_splits),
                refined_node_index(net, e, k + 1, n_splits),
                edge.b,
                edge.c,
                edge.d,
            ));
        }
    }
    Network::new(nodes, edges, net.c())
}
