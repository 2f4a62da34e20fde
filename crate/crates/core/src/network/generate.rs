//! Network generators: expanded-metal diamond lattice and synthetic straight-fiber mats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{connected_components, Edge, Mat3, Network, Node, Vec3};
use crate::error::{Error, Result};

/// Linear elastic material in internal units (kg, mm, ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Young's modulus, kg/(mm·ms²).
    pub e: f64,
    pub nu: f64,
    /// Density, kg/mm³.
    pub rho: f64,
}

impl Material {
    /// From Young's modulus in MPa and density in kg/mm³. 1 MPa = 10⁻³ kg/(mm·ms²).
    pub fn from_si(e_mpa: f64, nu: f64, rho_kg_per_mm3: f64) -> Result<Self> {
        if !(e_mpa > 0.0 && rho_kg_per_mm3 > 0.0 && nu > 0.0 && nu < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "material needs E > 0, rho > 0, 0 < nu < 0.5 (got E={e_mpa}, nu={nu}, rho={rho_kg_per_mm3})"
            )));
        }
        Ok(Self {
            e: e_mpa * 1e-3,
            nu,
            rho: rho_kg_per_mm3,
        })
    }

    pub fn shear_modulus(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    /// Structural steel: 210 GPa, ν = 0.3, 7850 kg/m³.
    pub fn steel() -> Self {
        Self::from_si(210_000.0, 0.3, 7.85e-6).expect("valid constants")
    }
}

/// Cross-section constants. `i2`, `i3` are second moments about the local axes e₂ (in the
/// reference plane, normal to the beam) and e₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub area: f64,
    pub i2: f64,
    pub i3: f64,
    /// Saint-Venant torsion constant.
    pub j: f64,
    pub shear_factor: f64,
}

/// Solid rectangle with side `width` along e₂ and `thickness` along e₃.
pub fn rectangle_section(width: f64, thickness: f64) -> Section {
    let (a, b) = if width >= thickness {
        (width, thickness)
    } else {
        (thickness, width)
    };
    let j = a * b.powi(3) * (1.0 / 3.0 - 0.21 * (b / a) * (1.0 - b.powi(4) / (12.0 * a.powi(4))));
    Section {
        area: width * thickness,
        i2: width * thickness.powi(3) / 12.0,
        i3: thickness * width.powi(3) / 12.0,
        j,
        shear_factor: 5.0 / 6.0,
    }
}

/// Local beam frame: e₁ along the beam, e₂ = ẑ × e₁ normalized (x̂ × e₁ for vertical beams),
/// e₃ = e₁ × e₂. Columns of the returned matrix.
fn local_frame(t: &Vec3) -> Mat3 {
    let e1 = t.normalize();
    let mut e2 = Vec3::z().cross(&e1);
    if e2.norm() < 1e-8 {
        e2 = Vec3::x().cross(&e1);
    }
    let e2 = e2.normalize();
    let e3 = e1.cross(&e2);
    Mat3::from_columns(&[e1, e2, e3])
}

/// Global-frame `(B, C, D)` for a beam of the given section along `direction`.
pub fn beam_coefficients(section: &Section, mat: &Material, direction: &Vec3) -> (Mat3, Mat3, Mat3) {
    let r = local_frame(direction);
    let g = mat.shear_modulus();
    let rot = |d: Vec3| r * Mat3::from_diagonal(&d) * r.transpose();
    let sym = |m: Mat3| (m + m.transpose()) * 0.5;
    let ka = section.shear_factor * g * section.area;
    let b = rot(Vec3::new(mat.e * section.area, ka, ka));
    let c = rot(Vec3::new(
        g * section.j,
        mat.e * section.i2,
        mat.e * section.i3,
    ));
    let d = rot(Vec3::new(section.j, section.i2, section.i3) * mat.rho);
    (sym(b), sym(c), sym(d))
}

/// Expanded-metal sheet in the z = 0 plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedMetal {
    pub n_x: usize,
    pub n_y: usize,
    pub diamond_w: f64,
    pub diamond_h: f64,
    pub strand_w: f64,
    pub strand_t: f64,
    pub material: Material,
}

impl ExpandedMetal {
    /// 4 × 8 diamonds of 80 × 40 mm with 6 × 3 mm steel strands (a 320 mm square sheet).
    pub fn steel_sheet() -> Self {
        Self {
            n_x: 4,
            n_y: 8,
            diamond_w: 80.0,
            diamond_h: 40.0,
            strand_w: 6.0,
            strand_t: 3.0,
            material: Material::steel(),
        }
    }
}

/// Diamond lattice with `n_x × n_y` cells. Diamond `(i, j)` has its side vertices at
/// `(w·i, h·(j+½))`, `(w·(i+1), h·(j+½))` and its tips at `(w·(i+½), h·j)`, `(w·(i+½), h·(j+1))`;
/// neighbouring diamonds share vertices. Nodes are unconstrained.
pub fn generate_expanded_metal(p: &ExpandedMetal) -> Result<Network> {
    if p.n_x == 0 || p.n_y == 0 {
        return Err(Error::InvalidArgument("lattice needs n_x, n_y >= 1".into()));
    }
    for (name, v) in [
        ("diamond_w", p.diamond_w),
        ("diamond_h", p.diamond_h),
        ("strand_w", p.strand_w),
        ("strand_t", p.strand_t),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
    }
    let (nx, ny, w, h) = (p.n_x, p.n_y, p.diamond_w, p.diamond_h);
    // side vertices (i in 0..=nx, j in 0..ny) then tips (i in 0..nx, j in 0..=ny)
    let side = |i: usize, j: usize| i * ny + j;
    let n_side = (nx + 1) * ny;
    let tip = |i: usize, j: usize| n_side + i * (ny + 1) + j;
    let mut nodes = Vec::with_capacity(n_side + nx * (ny + 1));
    for i in 0..=nx {
        for j in 0..ny {
            let pos = Vec3::new(w * i as f64, h * (j as f64 + 0.5), 0.0);
            nodes.push(Node::new(nodes.len(), pos));
        }
    }
    for i in 0..nx {
        for j in 0..=ny {
            let pos = Vec3::new(w * (i as f64 + 0.5), h * j as f64, 0.0);
            nodes.push(Node::new(nodes.len(), pos));
        }
    }
    let section = rectangle_section(p.strand_w, p.strand_t);
    let mut edges = Vec::with_capacity(4 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (l, r, b, t) = (side(i, j), side(i + 1, j), tip(i, j), tip(i, j + 1));
            for (a, z) in [(l, b), (b, r), (r, t), (t, l)] {
                let dir = nodes[z].position - nodes[a].position;
                let (bm, cm, dm) = beam_coefficients(&section, &p.material, &dir);
                edges.push(Edge::new(a, z, bm, cm, dm));
            }
        }
    }
    Network::new(nodes, edges, p.material.rho * section.area)
}

/// Node indices on the left (x = 0) and right (x = l₁) columns of a generated sheet.
pub fn expanded_metal_boundary(net: &Network) -> (Vec<usize>, Vec<usize>) {
    let l1 = net.bounding_box()[0];
    let tol = 1e-9 * l1.max(1.0);
    let pick = |x: f64| {
        (0..net.node_count())
            .filter(|&i| (net.node(i).position.x - x).abs() <= tol)
            .collect::<Vec<_>>()
    };
    (pick(0.0), pick(l1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LengthDist {
    Fixed(f64),
    Uniform { min: f64, max: f64 },
}

impl LengthDist {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            LengthDist::Fixed(l) => l,
            LengthDist::Uniform { min, max } => rng.gen_range(min..=max),
        }
    }
}

/// Random straight-fiber deposition in the box `[0,lx]×[0,ly]×[0,lz]` (planar when `lz = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct FiberParams {
    pub n_fibers: usize,
    pub length: LengthDist,
    pub box_size: [f64; 3],
    pub seed: u64,
    pub section: Section,
    pub material: Material,
}

impl FiberParams {
    /// Planar mat of 0.02 × 0.01 mm cellulose-like fibers (E = 12 GPa, 770 kg/m³).
    pub fn planar(n_fibers: usize, length: LengthDist, lx: f64, ly: f64, seed: u64) -> Self {
        Self {
            n_fibers,
            length,
            box_size: [lx, ly, 0.0],
            seed,
            section: rectangle_section(0.02, 0.01),
            material: Material::from_si(12_000.0, 0.3, 7.7e-7).expect("valid constants"),
        }
    }
}

/// Deposits fibers with uniformly distributed centres and orientations, clips them to the box
/// and joins them where centerlines come within 10⁻⁶ × box diagonal. Returns the largest
/// connected component.
pub fn generate_random_fibers(p: &FiberParams) -> Result<Network> {
    if p.n_fibers == 0 {
        return Err(Error::InvalidArgument("n_fibers must be >= 1".into()));
    }
    let [lx, ly, lz] = p.box_size;
    if !(lx > 0.0 && ly > 0.0 && lz >= 0.0) {
        return Err(Error::InvalidArgument("fiber box needs lx, ly > 0 and lz >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let tol = 1e-6 * (lx * lx + ly * ly + lz * lz).sqrt();
    let mut segments = Vec::with_capacity(p.n_fibers);
    for _ in 0..p.n_fibers {
        let centre = Vec3::new(
            rng.gen::<f64>() * lx,
            rng.gen::<f64>() * ly,
            rng.gen::<f64>() * lz,
        );
        let dir = if lz == 0.0 {
            let phi = rng.gen::<f64>() * std::f64::consts::PI;
            Vec3::new(phi.cos(), phi.sin(), 0.0)
        } else {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
            let s = (1.0 - z * z).sqrt();
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        };
        let half = 0.5 * p.length.sample(&mut rng);
        if let Some((a, b)) = clip_to_box(centre - dir * half, centre + dir * half, &p.box_size) {
            if (b - a).norm() > tol {
                segments.push((a, b));
            }
        }
    }
    fibers_from_segments(&segments, &p.section, &p.material, tol)
}

/// Liang–Barsky clipping of segment `a→b` against the box.
fn clip_to_box(a: Vec3, b: Vec3, size: &[f64; 3]) -> Option<(Vec3, Vec3)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..3 {
        for (p, q) in [(-d[k], a[k]), (d[k], size[k] - a[k])] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
    }
    (t0 < t1).then(|| (a + d * t0, a + d * t1))
}

/// Parameters `(s, t)` of the closest points between segments `p1 + s·d1` and `p2 + t·d2`.
fn closest_params(p1: &Vec3, d1: &Vec3, p2: &Vec3, d2: &Vec3) -> (f64, f64) {
    let r = p1 - p2;
    let (a, e, f) = (d1.dot(d1), d2.dot(d2), d2.dot(&r));
    let c = d1.dot(&r);
    let b = d1.dot(d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

/// Builds a fiber network from explicit centerline segments: segment pairs closer than `tol`
/// are joined at a shared node, nodes closer than `tol` along a fiber are merged, and the
/// largest connected component is kept.
pub fn fibers_from_segments(
    segments: &[(Vec3, Vec3)],
    section: &Section,
    material: &Material,
    tol: f64,
) -> Result<Network> {
    let mut points: Vec<Vec3> = Vec::new();
    let mut on_fiber: Vec<Vec<(f64, usize)>> = vec![Vec::new(); segments.len()];
    for (f, (a, b)) in segments.iter().enumerate() {
        on_fiber[f].push((0.0, points.len()));
        points.push(*a);
        on_fiber[f].push((1.0, points.len()));
        points.push(*b);
    }
    let boxes: Vec<(Vec3, Vec3)> = segments.iter().map(|(a, b)| (a.inf(b), a.sup(b))).collect();
    for f in 0..segments.len() {
        let (a1, b1) = segments[f];
        let d1 = b1 - a1;
        for g in f + 1..segments.len() {
            let overlap = (0..3).all(|k| {
                boxes[f].0[k] <= boxes[g].1[k] + tol && boxes[g].0[k] <= boxes[f].1[k] + tol
            });
            if !overlap {
                continue;
            }
            let (a2, b2) = segments[g];
            let d2 = b2 - a2;
            let (s, t) = closest_params(&a1, &d1, &a2, &d2);
            let (p, q) = (a1 + d1 * s, a2 + d2 * t);
            if (p - q).norm() <= tol {
                on_fiber[f].push((s, points.len()));
                on_fiber[g].push((t, points.len()));
                points.push((p + q) * 0.5);
            }
        }
    }

    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (f, list) in on_fiber.iter_mut().enumerate() {
        list.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let len = (segments[f].1 - segments[f].0).norm();
        for k in 1..list.len() {
            if (list[k].0 - list[k - 1].0) * len <= tol {
                let (x, y) = (find(&mut parent, list[k].1), find(&mut parent, list[k - 1].1));
                if x != y {
                    parent[x.max(y)] = x.min(y);
                }
            }
        }
    }

    let mut edge_pairs: Vec<[usize; 2]> = Vec::new();
    let mut dir_of: Vec<usize> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (f, list) in on_fiber.iter().enumerate() {
        let reps: Vec<usize> = list.iter().map(|&(_, i)| find(&mut parent, i)).collect();
        for k in 1..reps.len() {
            let (a, b) = (reps[k - 1], reps[k]);
            if a != b && seen.insert((a.min(b), a.max(b))) {
                edge_pairs.push([a, b]);
                dir_of.push(f);
            }
        }
    }

    // keep the largest component (ties: the one with the smallest point index)
    let mut used: Vec<usize> = edge_pairs.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut local = vec![usize::MAX; points.len()];
    for (k, &p) in used.iter().enumerate() {
        local[p] = k;
    }
    let tmp_edges: Vec<Edge> = edge_pairs
        .iter()
        .map(|&[a, b]| Edge::unit(local[a], local[b]))
        .collect();
    let comps = connected_components(used.len(), &tmp_edges);
    let best = comps
        .iter()
        .max_by(|x, y| x.len().cmp(&y.len()).then(y[0].cmp(&x[0])))
        .cloned()
        .unwrap_or_default();
    if best.len() < 2 {
        return Err(Error::DegenerateNetwork { nodes: best.len() });
    }
    let mut new_id = vec![usize::MAX; used.len()];
    for (k, &v) in best.iter().enumerate() {
        new_id[v] = k;
    }
    let nodes: Vec<Node> = best
        .iter()
        .enumerate()
        .map(|(k, &v)| Node::new(k, points[used[v]]))
        .collect();
    let mut edges = Vec::new();
    for (e, te) in tmp_edges.iter().enumerate() {
        let [a, b] = te.endpoints;
        if new_id[a] == usize::MAX {
            continue;
        }
        let f = dir_of[e];
        let dir = segments[f].1 - segments[f].0;
        let (bm, cm, dm) = beam_coefficients(section, material, &dir);
        edges.push(Edge::new(new_id[a], new_id[b], bm, cm, dm));
    }
    Network::new(nodes, edges, material.rho * section.area)
}
