//! Sampled checks of the homogeneity, locality and boundary-density network assumptions.
//! Connectivity/isoperimetry is not checked.

use super::Network;

/// Mass of one sampled box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxMass {
    pub radius: f64,
    pub center: [f64; 3],
    /// Sum over nodes in the box of half the lengths of their incident edges.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDiagnostics {
    pub r0: f64,
    pub max_edge_length: f64,
    pub locality_ok: bool,
    /// Edges with `h_e ≥ R₀`.
    pub locality_violations: Vec<usize>,
    /// `(R, σ(R))` for `R ∈ {R₀, 2R₀, 4R₀}`; `None` when no box of that radius fits in the domain.
    /// Estimated from boxes on a stride grid, not the continuous max/min.
    pub homogeneity: Vec<(f64, Option<f64>)>,
    pub boundary_density_ok: bool,
    /// Constrained nodes with no other constrained node closer than `R₀`.
    pub boundary_density_violations: Vec<usize>,
    pub box_masses: Vec<BoxMass>,
}

impl NetworkDiagnostics {
    pub fn homogeneity_ratio(&self, r: f64) -> Option<f64> {
        self.homogeneity
            .iter()
            .find(|(rr, _)| (rr - r).abs() <= 1e-12 * r)
            .and_then(|(_, s)| *s)
    }
}

/// Nodal masses `½ Σ_{e∼n} h_e`.
pub fn node_masses(net: &Network) -> Vec<f64> {
    let mut m = vec![0.0; net.node_count()];
    for e in 0..net.edge_count() {
        let h = net.edge_length(e);
        for &n in &net.edge(e).endpoints {
            m[n] += 0.5 * h;
        }
    }
    m
}

/// Box centres `x = R + k·stride` per axis with `[x−R, x+R] ⊂ [0, l]`; degenerate axes get 0.
fn centres(l: f64, r: f64, stride: f64) -> Vec<f64> {
    if l == 0.0 {
        return vec![0.0];
    }
    let eps = 1e-9 * l;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let x = r + k as f64 * stride;
        if x + r > l + eps {
            break;
        }
        out.push(x);
        k += 1;
    }
    out
}

/// Box `B_R(x) = Π [x_k − R, x_k + R)`, closed on the right where `x_k + R = l_k`.
fn in_box(p: &[f64; 3], x: &[f64; 3], r: f64, l: &[f64; 3]) -> bool {
    (0..3).all(|k| {
        if l[k] == 0.0 {
            return true;
        }
        let (lo, hi) = (x[k] - r, x[k] + r);
        let closed = (hi - l[k]).abs() <= 1e-9 * l[k];
        p[k] >= lo && (p[k] < hi || (closed && p[k] <= hi))
    })
}

/// Reports the assumption checks for length scale `r0`, sampling box centres every `stride` mm.
pub fn check_assumptions(net: &Network, r0: f64, stride: f64) -> NetworkDiagnostics {
    assert!(r0 > 0.0 && stride > 0.0, "R0 and stride must be positive");
    let lengths = net.edge_lengths();
    let max_edge_length = lengths.iter().copied().fold(0.0, f64::max);
    let locality_violations: Vec<usize> =
        (0..lengths.len()).filter(|&e| lengths[e] >= r0).collect();

    let mass = node_masses(net);
    let l = net.bounding_box();
    let pos: Vec<[f64; 3]> = net
        .nodes()
        .iter()
        .map(|n| [n.position.x, n.position.y, n.position.z])
        .collect();
    let mut homogeneity = Vec::new();
    let mut box_masses = Vec::new();
    for r in [r0, 2.0 * r0, 4.0 * r0] {
        let (cx, cy, cz) = (centres(l[0], r, stride), centres(l[1], r, stride), centres(l[2], r, stride));
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut any = false;
        for &x in &cx {
            for &y in &cy {
                for &z in &cz {
                    let c = [x, y, z];
                    let m: f64 = (0..pos.len())
                        .filter(|&i| in_box(&pos[i], &c, r, &l))
                        .map(|i| mass[i])
                        .sum();
                    lo = lo.min(m);
                    hi = hi.max(m);
                    any = true;
                    box_masses.push(BoxMass {
                        radius: r,
                        center: c,
                        mass: m,
                    });
                }
            }
        }
        let all_flat = l.iter().all(|&v| v == 0.0);
        let sigma = (any && !all_flat && !cx.is_empty() && !cy.is_empty() && !cz.is_empty())
            .then(|| if lo > 0.0 { hi / lo } else { f64::INFINITY });
        homogeneity.push((r, sigma));
    }

    let dir = net.dirichlet_nodes();
    let boundary_density_violations: Vec<usize> = dir
        .iter()
        .copied()
        .filter(|&y| {
            !dir.iter().any(|&x| {
                x != y && (net.node(x).position - net.node(y).position).norm() < r0
            })
        })
        .collect();

    NetworkDiagnostics {
        r0,
        max_edge_length,
        locality_ok: locality_violations.is_empty(),
        locality_violations,
        homogeneity,
        boundary_density_ok: boundary_density_violations.is_empty(),
        boundary_density_violations,
        box_masses,
    }
}
