//! P1 Timoshenko element matrices. Local dof order: (u at node 1, r at node 1, u at node 2,
//! r at node 2), three components each.

use nalgebra::SMatrix;

use crate::network::{Edge, Mat3, Vec3};

pub type Mat12 = SMatrix<f64, 12, 12>;
type Op = SMatrix<f64, 3, 12>;

/// Two-point Gauss–Legendre rule on [0, 1] as (point, weight) pairs.
pub const GAUSS2: [(f64, f64); 2] = [
    (0.5 - 0.288_675_134_594_812_9, 0.5),
    (0.5 + 0.288_675_134_594_812_9, 0.5),
];

/// Matrix of `r ↦ i × r`.
pub fn skew(i: &Vec3) -> Mat3 {
    Mat3::new(0.0, -i.z, i.y, i.z, 0.0, -i.x, -i.y, i.x, 0.0)
}

fn put(op: &mut Op, col: usize, m: &Mat3) {
    op.fixed_view_mut::<3, 3>(0, col).copy_from(m);
}

/// Stiffness `∫ B(∂u + i×r)·(∂φ + i×ψ) + C ∂r·∂ψ` over the edge, integrated with `rule` on the
/// reference interval.
pub fn element_stiffness_with_rule(edge: &Edge, x1: &Vec3, x2: &Vec3, rule: &[(f64, f64)]) -> Mat12 {
    let d = x2 - x1;
    let h = d.norm();
    let i = d / h;
    let s = skew(&i);
    let eye = Mat3::identity();

    let mut k = Mat12::zeros();
    for &(xi, w) in rule {
        let mut g = Op::zeros();
        put(&mut g, 0, &(-eye / h));
        put(&mut g, 3, &(s * (1.0 - xi)));
        put(&mut g, 6, &(eye / h));
        put(&mut g, 9, &(s * xi));
        k += g.transpose() * edge.b * g * (w * h);
    }
    let mut kc = Op::zeros();
    put(&mut kc, 3, &(-eye / h));
    put(&mut kc, 9, &(eye / h));
    k += kc.transpose() * edge.c * kc * h;
    (k + k.transpose()) * 0.5
}

/// Element stiffness with two-point Gauss quadrature (exact for P1).
pub fn element_stiffness(edge: &Edge, x1: &Vec3, x2: &Vec3) -> Mat12 {
    element_stiffness_with_rule(edge, x1, x2, &GAUSS2)
}

/// Consistent mass for `⟨c u, φ⟩ + ⟨D r, ψ⟩`.
pub fn element_mass(edge: &Edge, x1: &Vec3, x2: &Vec3, c: f64) -> Mat12 {
    let h = (x2 - x1).norm();
    let mut m = Mat12::zeros();
    let cu = Mat3::identity() * c;
    for (a, b, f) in [(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)] {
        let w = f * h / 6.0;
        m.fixed_view_mut::<3, 3>(6 * a, 6 * b).copy_from(&(cu * w));
        m.fixed_view_mut::<3, 3>(6 * a + 3, 6 * b + 3).copy_from(&(edge.d * w));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_edge() -> Edge {
        Edge::unit(0, 1)
    }

    #[test]
    fn axial_and_torsion_blocks() {
        let k = element_stiffness(&unit_edge(), &Vec3::zeros(), &Vec3::x());
        // ux at dofs 0 and 6, rx at 3 and 9
        for (p, q) in [(0, 6), (3, 9)] {
            assert_relative_eq!(k[(p, p)], 1.0, epsilon = 1e-14);
            assert_relative_eq!(k[(q, q)], 1.0, epsilon = 1e-14);
            assert_relative_eq!(k[(p, q)], -1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn translation_in_kernel() {
        let k = element_stiffness(&unit_edge(), &Vec3::zeros(), &Vec3::x());
        let mut v = SMatrix::<f64, 12, 1>::zeros();
        v[0] = 1.0;
        v[6] = 1.0;
        assert!((k * v).amax() < 1e-13);
    }

    #[test]
    fn mass_unit_edge() {
        let m = element_mass(&unit_edge(), &Vec3::zeros(), &Vec3::x(), 1.0);
        for k in 0..12 {
            assert_relative_eq!(m[(k, k)], 1.0 / 3.0, epsilon = 1e-15);
            assert_relative_eq!(m[(k, (k + 6) % 12)], 1.0 / 6.0, epsilon = 1e-15);
            let row: f64 = m.row(k).sum();
            assert_relative_eq!(row, 0.5, epsilon = 1e-15);
        }
    }
}
