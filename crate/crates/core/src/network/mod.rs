//! Spatial network data model: nodes with Dirichlet data, straight edges carrying global-frame
//! coefficient matrices, generators, refinement and the network diagnostics.

mod diagnostics;
mod generate;
mod refine;

use std::collections::HashMap;

use nalgebra::SymmetricEigen;

pub use diagnostics::{check_assumptions, BoxMass, NetworkDiagnostics};
pub use generate::{
    beam_coefficients, expanded_metal_boundary, fibers_from_segments, generate_expanded_metal,
    generate_random_fibers, rectangle_section, ExpandedMetal, FiberParams, LengthDist, Material,
    Section,
};
pub use refine::{refine, refined_node_index};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Number of scalar unknowns per node: displacement (3) then rotation (3).
pub const NODE_DOFS: usize = 6;

/// Component names in dof order.
pub const COMPONENTS: [&str; NODE_DOFS] = ["ux", "uy", "uz", "rx", "ry", "rz"];

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    /// Millimeters.
    pub position: Vec3,
    pub constrained: [bool; NODE_DOFS],
    /// Prescribed values (mm for displacement, radians for rotation); read only where constrained.
    pub prescribed: [f64; NODE_DOFS],
}

impl Node {
    pub fn new(id: usize, position: Vec3) -> Self {
        Self {
            id,
            position,
            constrained: [false; NODE_DOFS],
            prescribed: [0.0; NODE_DOFS],
        }
    }

    /// Fixes all six components to zero.
    pub fn clamped(mut self) -> Self {
        self.constrained = [true; NODE_DOFS];
        self.prescribed = [0.0; NODE_DOFS];
        self
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained.iter().any(|&c| c)
    }

    pub fn is_clamped(&self) -> bool {
        self.constrained.iter().all(|&c| c)
    }
}

/// Straight beam between two nodes. `b` (force stiffness), `c` (moment stiffness) and `d`
/// (rotational inertia density) are stored in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub endpoints: [usize; 2],
    pub b: Mat3,
    pub c: Mat3,
    pub d: Mat3,
}

impl Edge {
    pub fn new(n1: usize, n2: usize, b: Mat3, c: Mat3, d: Mat3) -> Self {
        Self {
            endpoints: [n1, n2],
            b,
            c,
            d,
        }
    }

    /// Edge with identity coefficient matrices.
    pub fn unit(n1: usize, n2: usize) -> Self {
        Self::new(n1, n2, Mat3::identity(), Mat3::identity(), Mat3::identity())
    }
}

/// Extra Dirichlet data applied by [`build_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConstraint {
    pub node_id: usize,
    pub constrained: [bool; NODE_DOFS],
    pub prescribed: [f64; NODE_DOFS],
}

impl NodeConstraint {
    pub fn clamp(node_id: usize) -> Self {
        Self {
            node_id,
            constrained: [true; NODE_DOFS],
            prescribed: [0.0; NODE_DOFS],
        }
    }
}

/// Validated, connected network. Node ids equal their index; edge endpoints are node indices.
/// Positions are translated so the bounding box is `[0,l₁]×[0,l₂]×[0,l₃]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    c: f64,
    bounding_box: [f64; 3],
}

impl Network {
    /// Validates everything except the presence of Dirichlet nodes (generators produce
    /// unconstrained networks). Edge endpoints refer to node ids.
    pub fn new(mut nodes: Vec<Node>, mut edges: Vec<Edge>, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidNetwork(format!("mass density c = {c} must be positive")));
        }
        if nodes.is_empty() {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        let mut index_of = HashMap::with_capacity(nodes.len());
        for (k, node) in nodes.iter().enumerate() {
            if index_of.insert(node.id, k).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate node id {}", node.id)));
            }
            if !node.position.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidNetwork(format!("node {} position not finite", node.id)));
            }
            for k in 0..NODE_DOFS {
                if node.constrained[k] && !node.prescribed[k].is_finite() {
                    return Err(Error::InvalidNetwork(format!(
                        "node {}: prescribed {} not finite",
                        node.id, COMPONENTS[k]
                    )));
                }
            }
        }
        for (e, edge) in edges.iter_mut().enumerate() {
            for end in edge.endpoints.iter_mut() {
                *end = *index_of.get(end).ok_or_else(|| {
                    Error::InvalidNetwork(format!("edge {e} references unknown node id {end}"))
                })?;
            }
            let [a, b] = edge.endpoints;
            if a == b || (nodes[a].position - nodes[b].position).norm() <= 0.0 {
                return Err(Error::ZeroLengthEdge { edge: e });
            }
            for (name, m) in [("B", &edge.b), ("C", &edge.c), ("D", &edge.d)] {
                check_spd(e, name, m)?;
            }
        }
        for (k, node) in nodes.iter_mut().enumerate() {
            node.id = k;
        }

        let components = connected_components(nodes.len(), &edges);
        if components.len() > 1 {
            return Err(Error::DisconnectedGraph { components });
        }

        let mut lo = nodes[0].position;
        let mut hi = nodes[0].position;
        for n in &nodes {
            lo = lo.inf(&n.position);
            hi = hi.sup(&n.position);
        }
        for n in nodes.iter_mut() {
            n.position -= lo;
        }
        let ext = hi - lo;
        Ok(Self {
            nodes,
            edges,
            c,
            bounding_box: [ext.x, ext.y, ext.z],
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Translational mass density (kg/mm).
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Box extents `[l₁, l₂, l₃]` (mm).
    pub fn bounding_box(&self) -> [f64; 3] {
        self.bounding_box
    }

    pub fn edge_vector(&self, e: usize) -> Vec3 {
        let [a, b] = self.edges[e].endpoints;
        self.nodes[b].position - self.nodes[a].position
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_vector(e).norm()
    }

    /// Unit direction from the first to the second endpoint.
    pub fn edge_direction(&self, e: usize) -> Vec3 {
        let v = self.edge_vector(e);
        v / v.norm()
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.edges.len()).map(|e| self.edge_length(e)).collect()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edge_lengths().into_iter().fold(0.0, f64::max)
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edge_lengths().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn total_length(&self) -> f64 {
        self.edge_lengths().iter().sum()
    }

    /// Incident edges per node, in ascending edge order.
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (e, edge) in self.edges.iter().enumerate() {
            inc[edge.endpoints[0]].push(e);
            inc[edge.endpoints[1]].push(e);
        }
        inc
    }

    pub fn has_dirichlet(&self) -> bool {
        self.nodes.iter().any(Node::is_constrained)
    }

    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_constrained())
            .collect()
    }

    /// Copy of the network with every constraint removed.
    pub fn without_constraints(&self) -> Network {
        let mut out = self.clone();
        for n in out.nodes.iter_mut() {
            n.constrained = [false; NODE_DOFS];
            n.prescribed = [0.0; NODE_DOFS];
        }
        out
    }

    /// Copy of the network with `f` applied to every node's Dirichlet data.
    pub fn map_constraints<F>(&self, mut f: F) -> Network
    where
        F: FnMut(&Node) -> ([bool; NODE_DOFS], [f64; NODE_DOFS]),
    {
        let mut out = self.clone();
        for n in out.nodes.iter_mut() {
            let (mask, vals) = f(n);
            n.constrained = mask;
            n.prescribed = vals;
        }
        out
    }

    /// Coefficient extremes over all edges: `(b_min, b_max, c_min, c_max, d_min, d_max)`.
    pub fn coefficient_bounds(&self) -> CoefficientBounds {
        let mut out = CoefficientBounds {
            b: (f64::INFINITY, 0.0),
            c: (f64::INFINITY, 0.0),
            d: (f64::INFINITY, 0.0),
        };
        for edge in &self.edges {
            for (m, slot) in [(&edge.b, &mut out.b), (&edge.c, &mut out.c), (&edge.d, &mut out.d)]
            {
                let ev = SymmetricEigen::new(*m).eigenvalues;
                slot.0 = slot.0.min(ev.min());
                slot.1 = slot.1.max(ev.max());
            }
        }
        out
    }
}

/// Smallest and largest eigenvalues of the coefficient fields over the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub b: (f64, f64),
    pub c: (f64, f64),
    pub d: (f64, f64),
}

/// Builds a network, applies `dirichlet` on top of the node flags and requires at least one
/// constrained node.
pub fn build_network(
    mut nodes: Vec<Node>,
    edges: Vec<Edge>,
    c: f64,
    dirichlet: &[NodeConstraint],
) -> Result<Network> {
    for dc in dirichlet {
        let node = nodes
            .iter_mut()
            .find(|n| n.id == dc.node_id)
            .ok_or_else(|| Error::InvalidNetwork(format!("unknown node id {}", dc.node_id)))?;
        for k in 0..NODE_DOFS {
            if dc.constrained[k] {
                node.constrained[k] = true;
                node.prescribed[k] = dc.prescribed[k];
            }
        }
    }
    let net = Network::new(nodes, edges, c)?;
    if !net.has_dirichlet() {
        return Err(Error::EmptyDirichletSet);
    }
    Ok(net)
}

fn check_spd(edge: usize, name: &'static str, m: &Mat3) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidNetwork(format!("edge {edge}: {name} not finite")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidNetwork(format!("edge {edge}: {name} not symmetric")));
    }
    let min_eigenvalue = SymmetricEigen::new(*m).eigenvalues.min();
    if !(min_eigenvalue > 0.0) {
        return Err(Error::NonSpdCoefficient {
            edge,
            matrix: name,
            min_eigenvalue,
        });
    }
    Ok(())
}

/// Connected components (node index lists, each ascending) ordered by smallest member.
pub(crate) fn connected_components(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.endpoints[0]), find(&mut parent, e.endpoints[1]));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    comps
}
