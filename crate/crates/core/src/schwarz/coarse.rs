//! Cartesian coarse grid over the network bounding box, trilinear prolongation and the
//! subdomains given by the supports of the coarse hat functions.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::DofMap;
use crate::network::{Network, NODE_DOFS};
use crate::sparsela::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax];

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    pub fn is_max(self) -> bool {
        self as usize % 2 == 1
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = ["x", "y", "z"][self.axis()];
        write!(f, "{axis}{}", if self.is_max() { "+" } else { "-" })
    }
}

impl FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Face::ALL
            .into_iter()
            .find(|f| f.to_string() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown face '{s}' (use x-, x+, y-, y+, z-, z+)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    pub lengths: [f64; 3],
    pub cells: [usize; 3],
}

impl CoarseGrid {
    pub fn new(lengths: [f64; 3], cells: [usize; 3]) -> Result<Self> {
        if cells.contains(&0) {
            return Err(Error::InvalidArgument("coarse grid needs at least one cell per axis".into()));
        }
        Ok(Self { lengths, cells })
    }

    /// Cell sizes `H_k = l_k / n_k`.
    pub fn h(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| self.lengths[k] / self.cells[k] as f64)
    }

    pub fn n_nodes(&self) -> usize {
        self.cells.iter().map(|n| n + 1).product()
    }

    pub fn node_index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * (self.cells[1] + 1) + ijk[1]) * (self.cells[2] + 1) + ijk[2]
    }

    pub fn node_ijk(&self, mut idx: usize) -> [usize; 3] {
        let k = idx % (self.cells[2] + 1);
        idx /= self.cells[2] + 1;
        let j = idx % (self.cells[1] + 1);
        [idx / (self.cells[1] + 1), j, k]
    }

    pub fn node_position(&self, idx: usize) -> [f64; 3] {
        let ijk = self.node_ijk(idx);
        let h = self.h();
        [0, 1, 2].map(|k| ijk[k] as f64 * h[k])
    }

    pub fn on_face(&self, idx: usize, face: Face) -> bool {
        let ijk = self.node_ijk(idx);
        let a = face.axis();
        if face.is_max() {
            ijk[a] == self.cells[a]
        } else {
            ijk[a] == 0
        }
    }

    /// Strictly positive trilinear hat values at `p` as `(coarse node, value)`.
    pub fn hat_values(&self, p: [f64; 3]) -> Vec<(usize, f64)> {
        let mut axes = [[(0usize, 0.0f64); 2]; 3];
        for k in 0..3 {
            let l = self.lengths[k];
            let n = self.cells[k];
            if l == 0.0 {
                axes[k] = [(0, 1.0), (1, 0.0)];
                continue;
            }
            let s = p[k] / (l / n as f64);
            let cell = (s.floor().max(0.0) as usize).min(n - 1);
            let xi = (s - cell as f64).clamp(0.0, 1.0);
            axes[k] = [(cell, 1.0 - xi), (cell + 1, xi)];
        }
        let mut out = Vec::with_capacity(8);
        for &(i, wi) in &axes[0] {
            for &(j, wj) in &axes[1] {
                for &(k, wk) in &axes[2] {
                    let w = wi * wj * wk;
                    if w > 0.0 {
                        out.push((self.node_index([i, j, k]), w));
                    }
                }
            }
        }
        out.sort_by_key(|&(i, _)| i);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub coarse_node: usize,
    /// Free dofs, ascending.
    pub dofs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

/// Coarse space and subdomain decomposition for one dof map.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    pub grid: Option<CoarseGrid>,
    /// `R₀ᵀ`: free dofs × active coarse dofs.
    pub prolongation: CsrMatrix,
    /// `(coarse node, field)` of each prolongation column.
    pub columns: Vec<(usize, usize)>,
    pub subdomains: Vec<Subdomain>,
}

impl CoarseSpace {
    /// Assembles a decomposition from explicit parts (used for exactness checks).
    pub fn from_parts(prolongation: CsrMatrix, subdomains: Vec<Subdomain>) -> Self {
        let columns = (0..prolongation.n_cols()).map(|c| (c, 0)).collect();
        Self {
            grid: None,
            prolongation,
            columns,
            subdomains,
        }
    }

    pub fn n_free(&self) -> usize {
        self.prolongation.n_rows()
    }

    pub fn n_coarse(&self) -> usize {
        self.prolongation.n_cols()
    }

    /// Number of subdomains containing each free dof, summarized.
    pub fn overlap_stats(&self) -> OverlapStats {
        let mut count = vec![0usize; self.n_free()];
        for s in &self.subdomains {
            for &d in &s.dofs {
                count[d] += 1;
            }
        }
        let min = count.iter().copied().min().unwrap_or(0);
        let max = count.iter().copied().max().unwrap_or(0);
        let mean = if count.is_empty() {
            0.0
        } else {
            count.iter().sum::<usize>() as f64 / count.len() as f64
        };
        OverlapStats { min, max, mean }
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.prolongation.fingerprint().hash(&mut h);
        for s in &self.subdomains {
            s.coarse_node.hash(&mut h);
            s.dofs.hash(&mut h);
        }
        h.finish()
    }
}

/// Builds the trilinear coarse space on a `cells` grid over the bounding box. Coarse nodes on
/// `dirichlet_faces` are dropped for all six fields, as are columns without any free dof.
pub fn build_coarse(net: &Network, map: &DofMap, cells: [usize; 3], dirichlet_faces: &[Face]) -> Result<CoarseSpace> {
    let grid = CoarseGrid::new(net.bounding_box(), cells)?;
    let l = grid.lengths;
    let n_c = grid.n_nodes();
    let mut support: Vec<Vec<(usize, f64)>> = Vec::with_capacity(net.node_count());
    for (i, node) in net.nodes().iter().enumerate() {
        let p = [node.position.x, node.position.y, node.position.z];
        let outside = (0..3).any(|k| {
            let eps = 1e-12 * l[k].max(1.0);
            p[k] < -eps || p[k] > l[k] + eps
        });
        if outside {
            return Err(Error::NodeOutsideBox { node: i });
        }
        support.push(grid.hat_values(p));
    }

    let deactivated: Vec<bool> = (0..n_c)
        .map(|c| dirichlet_faces.iter().any(|&f| grid.on_face(c, f)))
        .collect();
    let mut has_free = vec![[false; NODE_DOFS]; n_c];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_c];
    for (i, sup) in support.iter().enumerate() {
        for &(c, _) in sup {
            for f in 0..NODE_DOFS {
                let d = map.dof(i, f);
                if map.is_free(d) {
                    has_free[c][f] = true;
                    members[c].push(d);
                }
            }
        }
    }

    let mut col_of = vec![[usize::MAX; NODE_DOFS]; n_c];
    let mut columns = Vec::new();
    for c in 0..n_c {
        if deactivated[c] {
            continue;
        }
        for f in 0..NODE_DOFS {
            if has_free[c][f] {
                col_of[c][f] = columns.len();
                columns.push((c, f));
            }
        }
    }
    let mut t = TripletBuilder::new(map.n_free(), columns.len());
    for (i, sup) in support.iter().enumerate() {
        for &(c, w) in sup {
            for f in 0..NODE_DOFS {
                let d = map.dof(i, f);
                if map.is_free(d) && col_of[c][f] != usize::MAX {
                    t.push(d, col_of[c][f], w);
                }
            }
        }
    }
    let prolongation = t.build(false)?;

    let subdomains = members
        .into_iter()
        .enumerate()
        .map(|(c, mut dofs)| {
            dofs.sort_unstable();
            dofs.dedup();
            Subdomain { coarse_node: c, dofs }
        })
        .collect();
    Ok(CoarseSpace {
        grid: Some(grid),
        prolongation,
        columns,
        subdomains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_expanded_metal, ExpandedMetal};

    fn sheet() -> (Network, DofMap) {
        let net = generate_expanded_metal(&ExpandedMetal::steel_sheet()).unwrap();
        let net = net.map_constraints(|n| {
            if n.position.x == 320.0 {
                ([true; 6], [0.0; 6])
            } else {
                ([false; 6], [0.0; 6])
            }
        });
        let map = DofMap::new(&net);
        (net, map)
    }

    #[test]
    fn faces_parse_and_print() {
        for f in Face::ALL {
            assert_eq!(f.to_string().parse::<Face>().unwrap(), f);
        }
        assert!("w+".parse::<Face>().is_err());
    }

    #[test]
    fn partition_of_unity_on_single_cell() {
        let (net, map) = sheet();
        let cs = build_coarse(&net, &map, [1, 1, 1], &[]).unwrap();
        let grid = cs.grid.as_ref().unwrap();
        assert_eq!(grid.n_nodes(), 8);
        // planar network: only the 4 coarse nodes with k = 0 carry weight
        assert_eq!(cs.n_coarse(), 4 * 6);
        let ones = vec![1.0; cs.n_coarse()];
        let sums = cs.prolongation.spmv(&ones).unwrap();
        assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn corner_node_has_single_unit_entry() {
        let grid = CoarseGrid::new([2.0, 3.0, 1.0], [2, 3, 1]).unwrap();
        assert_eq!(grid.hat_values([0.0, 0.0, 0.0]), vec![(0, 1.0)]);
        let far = grid.hat_values([2.0, 3.0, 1.0]);
        assert_eq!(far, vec![(grid.n_nodes() - 1, 1.0)]);
        let mid = grid.hat_values([0.5, 1.5, 0.5]);
        assert_eq!(mid.len(), 8);
        assert!((mid.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn subdomains_match_geometric_membership() {
        let (net, map) = sheet();
        let cs = build_coarse(&net, &map, [4, 4, 1], &[Face::XMax]).unwrap();
        let grid = cs.grid.clone().unwrap();
        let h = grid.h();
        for s in &cs.subdomains {
            let c = grid.node_position(s.coarse_node);
            let mut want: Vec<usize> = Vec::new();
            for (i, n) in net.nodes().iter().enumerate() {
                let p = n.position;
                let inside = (p.x - c[0]).abs() < h[0]
                    && (p.y - c[1]).abs() < h[1]
                    && grid.node_ijk(s.coarse_node)[2] == 0;
                if inside {
                    want.extend(map.node_dofs(i).iter().copied().filter(|&d| map.is_free(d)));
                }
            }
            want.sort_unstable();
            assert_eq!(s.dofs, want, "coarse node {}", s.coarse_node);
        }
        let stats = cs.overlap_stats();
        assert!(stats.min >= 1 && stats.max <= 8);
        // x+ face coarse nodes carry no columns
        assert!(cs.columns.iter().all(|&(c, _)| !grid.on_face(c, Face::XMax)));
    }
}
