use std::sync::Arc;

use beamnet::fem::assemble;
use beamnet::krylov::{pcg, PcgOptions};
use beamnet::network::{generate_expanded_metal, generate_random_fibers, ExpandedMetal, FiberParams, LengthDist, Network};
use beamnet::schwarz::{build_coarse, Face, SchwarzCounters, SchwarzPreconditioner};
use beamnet::sparsela::{cholesky_factorize, cholesky_factorize_semidefinite, triple_product};

fn clamp_left_lift_right(net: &Network) -> Network {
    let lx = net.bounding_box()[0];
    net.map_constraints(|n| {
        if n.position.x <= 1e-9 * lx {
            ([true; 6], [0.0; 6])
        } else if n.position.x >= lx * (1.0 - 1e-9) {
            ([false, false, true, false, false, false], [0.0, 0.0, 0.1 * lx, 0.0, 0.0, 0.0])
        } else {
            ([false; 6], [0.0; 6])
        }
    })
}

fn pcg_against_direct(net: &Network, cells: [usize; 3]) -> usize {
    let sys = assemble(net);
    let exact = cholesky_factorize(&sys.a).unwrap().solve(&sys.lift).unwrap();
    let space = build_coarse(net, &sys.dof_map, cells, &[Face::XMin]).unwrap();
    let pre = SchwarzPreconditioner::setup(&sys.a, &space, Arc::new(SchwarzCounters::default())).unwrap();
    let (x, rep) = pcg(&sys.a, &sys.lift, &pre, None, &PcgOptions::new(1e-12, 2000)).unwrap();
    assert!(rep.converged);
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (p, q) in x.iter().zip(&exact) {
        assert!((p - q).abs() <= 1e-7 * scale);
    }
    rep.iterations
}

#[test]
fn schwarz_pcg_reproduces_direct_solution_on_sheet() {
    let net = clamp_left_lift_right(&generate_expanded_metal(&ExpandedMetal::steel_sheet()).unwrap());
    for cells in [[1, 1, 1], [2, 2, 1], [4, 4, 1]] {
        assert!(pcg_against_direct(&net, cells) < 200);
    }
}

#[test]
fn fine_coarse_grid_on_sparse_fibers_stays_solvable() {
    // many coarse functions see only a few fibers, so the coarse operator has dependent columns
    let fibers = generate_random_fibers(&FiberParams::planar(80, LengthDist::Fixed(0.3), 1.0, 1.0, 5)).unwrap();
    let net = clamp_left_lift_right(&fibers);
    let sys = assemble(&net);
    let space = build_coarse(&net, &sys.dof_map, [12, 12, 1], &[Face::XMin]).unwrap();
    let a0 = triple_product(&space.prolongation.transpose(), &sys.a).unwrap();
    assert!(!cholesky_factorize_semidefinite(&a0, 1e-10).unwrap().dropped().is_empty());
    pcg_against_direct(&net, [12, 12, 1]);
}
