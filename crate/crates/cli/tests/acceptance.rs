//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release -p beamnet-cli --test acceptance` runs everything; numeric arguments
//! after `--` select criteria, e.g. `-- 6 7 8`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use beamnet::dynamics::{RunOptions, Stepper, ThetaConfig, WaveProblem};
use beamnet::fem::{
    assemble, element_mass, element_stiffness, element_stiffness_with_rule, graph_forms, scalar_p1_matrices, Mat12,
};
use beamnet::network::{
    generate_expanded_metal, generate_random_fibers, refine, Edge, ExpandedMetal, FiberParams, LengthDist, Mat3,
    Network, Node, Vec3,
};
use beamnet::schwarz::SchwarzCache;
use beamnet::sparsela::{cholesky_factorize, CsrMatrix, TripletBuilder};
use beamnet::Error;
use beamnet_cli::bc::BcSpec;
use beamnet_cli::experiments::{
    ddstudy, eig, hconv, released_initial_state, stability_bracket, tauconv, wave, DdStudy, Outcome, SolverSpec,
};
use nalgebra::{DMatrix, DVector, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = anyhow::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Verdict);

fn sheet() -> Network {
    generate_expanded_metal(&ExpandedMetal::steel_sheet()).unwrap()
}

/// Right side clamped, left side lifted to a 15° bend; the lift is released for wave runs.
fn bend_spec(net: &Network) -> BcSpec {
    let uz = 15f64.to_radians().tan() * net.bounding_box()[0];
    format!("slab axis=x at=max fix=all; slab axis=x at=min fix=uz value={uz} release")
        .parse()
        .unwrap()
}

/// Static bend state as initial data on the network without the left constraint.
fn release_problem() -> anyhow::Result<(Network, beamnet::fem::State)> {
    let base = sheet();
    let spec = bend_spec(&base);
    let (held, free) = (spec.apply(&base, true), spec.apply(&base, false));
    let init = released_initial_state(&held, &free, &SolverSpec::Direct, &[])?;
    Ok((free, init))
}

fn within(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|v| (lo..=hi).contains(&v))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.3}"))
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let rows = a.to_dense();
    DMatrix::from_fn(a.n_rows(), a.n_cols(), |i, j| rows[i][j])
}

fn h_convergence() -> Verdict {
    let base = sheet();
    let net = bend_spec(&base).apply(&base, true);
    let r = hconv(&net, &[0, 1, 2, 3, 4], 6, &SolverSpec::Direct, &[])?;
    let pass = within(r.v_slope, 0.85, 1.15) && within(r.l2_slope, 1.8, 2.2);
    let errs: Vec<String> = r.rows.iter().map(|row| format!("{:.3e}/{:.3e}", row.v_err, row.l2_err)).collect();
    Ok((
        pass,
        format!(
            "V slope {} (want [0.85, 1.15]), L2 slope {} (want [1.8, 2.2]); V/L2 errors by level {}",
            fmt_opt(r.v_slope),
            fmt_opt(r.l2_slope),
            errs.join(" ")
        ),
    ))
}

fn energy_conservation() -> Verdict {
    let (net, init) = release_problem()?;
    let config = ThetaConfig::new(0.25, 1e-3, 200);
    let (_, out) = wave(&net, &init, &config, &RunOptions::default(), &mut SchwarzCache::new())?;
    let e0 = out.energy[0].total;
    let drift = max_abs(out.energy.iter().map(|e| (e.total - e0) / e0));
    Ok((
        drift <= 1e-9 && out.steps_taken == 200,
        format!("relative drift {drift:.2e} over {} steps (want <= 1e-9)", out.steps_taken),
    ))
}

fn stability() -> Verdict {
    let (net, init) = release_problem()?;
    let r = stability_bracket(&net, &init, &[0.95, 1.05], 10_000, 1e3, None)?;
    let (below, above) = (&r.rows[0], &r.rows[1]);
    let stable = below.outcome == Outcome::Stable && below.steps_taken == 10_000 && below.max_energy_ratio <= 2.0;
    let unstable = above.outcome != Outcome::Stable;
    let gap = (3.0..=15.0).contains(&r.gap_factor);
    Ok((
        stable && unstable && gap,
        format!(
            "tau* {:.4e} ms; 0.95 tau*: {:?}, max energy ratio {:.3}; 1.05 tau*: {:?} at step {:?}; \
             conservative tau {:.4e} ms, gap {:.1} (want [3, 15])",
            r.sharp.tau,
            below.outcome,
            below.max_energy_ratio,
            above.outcome,
            above.stop_step,
            r.conservative.tau,
            r.gap_factor
        ),
    ))
}

fn tau_convergence() -> Verdict {
    let base = sheet();
    let net = "slab axis=x at=max fix=all".parse::<BcSpec>()?.apply(&base, true);
    let e = eig(&net, 1.0 / 12.0, 1e-10, None)?;
    let period = 2.0 * PI / e.lambda1.sqrt();
    let cn_taus: Vec<f64> = [25.0, 50.0, 100.0, 200.0, 400.0].iter().map(|n| period / n).collect();
    let cn = tauconv(&net, &[0.25], &cn_taus, 1.0, 1e-10)?;
    let n0 = (1.1 * period / e.tau_sharp).ceil();
    let taus12: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|k| period / (k * n0)).collect();
    let t12 = tauconv(&net, &[1.0 / 12.0], &taus12, 1.0, 1e-10)?;
    let (s, f) = (&cn.slopes[0], &t12.slopes[0]);
    let pass = within(s.err_l2, 1.8, 2.2)
        && within(s.vel_err_l2, 1.8, 2.2)
        && within(f.err_l2, 3.5, 4.5)
        && within(f.vel_err_l2, 3.5, 4.5);
    let errs12: Vec<String> = t12.rows.iter().map(|r| format!("{:.3e}", r.err_l2)).collect();
    Ok((
        pass,
        format!(
            "CN state {} velocity {} (want [1.8, 2.2]); theta=1/12 state {} velocity {} (want [3.5, 4.5]), \
             steps per period from {n0} (stability limit {:.3e} ms), L2 errors {}",
            fmt_opt(s.err_l2),
            fmt_opt(s.vel_err_l2),
            fmt_opt(f.err_l2),
            fmt_opt(f.vel_err_l2),
            e.tau_sharp,
            errs12.join(" ")
        ),
    ))
}

fn robust(study: &DdStudy) -> (bool, String) {
    let mut its: Vec<usize> = study.rows.iter().map(|r| r.iterations).collect();
    let listed = its.iter().map(usize::to_string).collect::<Vec<_>>().join("/");
    its.sort_unstable();
    let median = its[its.len() / 2] as f64;
    let deviation = max_abs(its.iter().map(|&i| (i as f64 - median) / median));
    let spread = study.rows.iter().map(|r| r.factor_spread(3).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let converged = study.rows.iter().all(|r| r.converged);
    (
        converged && deviation <= 0.2 && spread <= 0.1,
        format!(
            "{} dofs, iterations {listed}, max deviation {:.0}% (want <= 20%), factor spread {spread:.3} (want <= 0.1)",
            study.operator.n_rows(),
            100.0 * deviation
        ),
    )
}

fn h_robustness() -> Verdict {
    let grids = [[2, 2, 1], [4, 4, 1], [8, 8, 1]];
    let fine = refine(&sheet(), 3)?;
    let spec = bend_spec(&fine);
    let net = spec.apply(&fine, true);
    let (sheet_ok, sheet_msg) = robust(&ddstudy(&net, &spec.dirichlet_faces(&net, true), &grids, None, 1e-8, 1000, 1)?);

    let fibers = generate_random_fibers(&FiberParams::planar(400, LengthDist::Fixed(0.2), 1.0, 1.0, 7))?;
    let uz = 15f64.to_radians().tan() * fibers.bounding_box()[0];
    let spec: BcSpec = format!("slab axis=x at=min fix=all; slab axis=x at=max fix=uz value={uz}").parse()?;
    let net = spec.apply(&fibers, true);
    let study = ddstudy(&net, &spec.dirichlet_faces(&net, true), &grids, None, 1e-8, 1000, 1)?;
    let big = study.operator.n_rows() >= 10_000;
    let (fiber_ok, fiber_msg) = robust(&study);
    Ok((
        sheet_ok && fiber_ok && big,
        format!("sheet i=3: {sheet_msg}; fibers: {fiber_msg}"),
    ))
}

/// 10 × 20 jittered grid with unit coefficients.
fn unit_grid(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, ny) = (10, 20);
    let id = |i: usize, j: usize| i * ny + j;
    let mut nodes = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let p = Vec3::new(i as f64 + rng.gen_range(-0.3..0.3), j as f64 + rng.gen_range(-0.3..0.3), 0.0);
            nodes.push(Node::new(id(i, j), p));
        }
    }
    let mut edges = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            if i + 1 < nx {
                edges.push(Edge::unit(id(i, j), id(i + 1, j)));
            }
            if j + 1 < ny {
                edges.push(Edge::unit(id(i, j), id(i, j + 1)));
            }
        }
    }
    Network::new(nodes, edges, 1.0).unwrap()
}

fn spectral_equivalence() -> Verdict {
    let net = unit_grid(6);
    let forms = graph_forms(&net);
    let (k, m) = scalar_p1_matrices(&net);
    let n = forms.nodes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut bracket_ok = true;
    let mut global_ok = true;
    for _ in 0..200 {
        let v: Vec<[f64; 6]> = (0..net.node_count())
            .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
            .collect();
        for (e, edge) in net.edges().iter().enumerate() {
            let [a, b] = edge.endpoints;
            let h = net.edge_length(e);
            let me = element_mass(edge, &net.node(a).position, &net.node(b).position, 1.0);
            for comp in 0..6 {
                let mut z = SVector::<f64, 12>::zeros();
                z[comp] = v[a][comp];
                z[6 + comp] = v[b][comp];
                let q = z.dot(&(me * z));
                let s = v[a][comp].powi(2) + v[b][comp].powi(2);
                bracket_ok &= h / 6.0 * s <= q && q <= h / 2.0 * s;
            }
        }
        let w: Vec<f64> = forms.nodes.iter().map(|&i| v[i][0]).collect();
        let (qm, qg) = (m.quad_form(&w), forms.mass.quad_form(&w));
        global_ok &= qg / 3.0 <= qm && qm <= qg;
    }
    let diff = max_abs(dense(&k).iter().zip(dense(&forms.laplacian).iter()).map(|(x, y)| x - y));
    Ok((
        n == 200 && bracket_ok && global_ok && diff <= 1e-13,
        format!(
            "{n} dofs, element bracket {}, global bracket {}, max |K - L| {diff:.1e} (want <= 1e-13)",
            if bracket_ok { "holds" } else { "violated" },
            if global_ok { "holds" } else { "violated" }
        ),
    ))
}

fn rigid_modes(x1: &Vec3, x2: &Vec3) -> Vec<SVector<f64, 12>> {
    let mut modes = Vec::new();
    for k in 0..3 {
        let e = Vec3::ith(k, 1.0);
        let mut t = SVector::<f64, 12>::zeros();
        let mut r = SVector::<f64, 12>::zeros();
        for (off, x) in [(0, x1), (6, x2)] {
            t.fixed_rows_mut::<3>(off).copy_from(&e);
            r.fixed_rows_mut::<3>(off).copy_from(&e.cross(x));
            r.fixed_rows_mut::<3>(off + 3).copy_from(&e);
        }
        modes.push(t);
        modes.push(r);
    }
    modes
}

fn fiber_sample() -> Network {
    generate_random_fibers(&FiberParams::planar(60, LengthDist::Fixed(0.4), 1.0, 1.0, 3)).unwrap()
}

fn kernel_and_spd() -> Verdict {
    let mut worst: f64 = 0.0;
    for net in [sheet(), fiber_sample(), unit_grid(7)] {
        for edge in net.edges() {
            let [a, b] = edge.endpoints;
            let (x1, x2) = (net.node(a).position, net.node(b).position);
            let k = element_stiffness(edge, &x1, &x2);
            let scale = k.amax();
            for z in rigid_modes(&x1, &x2) {
                worst = worst.max((k * z).amax() / (scale * z.amax()));
            }
        }
    }
    let mut spd_ok = true;
    let mut cases = 0;
    for net in [sheet(), fiber_sample(), unit_grid(7)] {
        let bare = net.without_constraints();
        for spec in ["slab axis=x at=min fix=all", "slab axis=y at=max fix=all; slab axis=x at=max fix=u"] {
            let constrained = spec.parse::<BcSpec>()?.apply(&bare, true);
            spd_ok &= cholesky_factorize(&assemble(&constrained).a).is_ok();
            cases += 1;
        }
        let single = bare.map_constraints({
            let mut i = 0;
            move |_| {
                i += 1;
                ([i == 1; 6], [0.0; 6])
            }
        });
        spd_ok &= cholesky_factorize(&assemble(&single).a).is_ok();
        cases += 1;
    }
    let mut singular_ok = true;
    for net in [sheet(), fiber_sample(), unit_grid(7)] {
        singular_ok &= matches!(
            cholesky_factorize(&assemble(&net.without_constraints()).a),
            Err(Error::NotPositiveDefinite { .. })
        );
    }
    Ok((
        worst <= 1e-12 && spd_ok && singular_ok,
        format!(
            "max relative |K z| on rigid modes {worst:.1e} (want <= 1e-12); Cholesky with Dirichlet nodes {} \
             ({cases} cases); without constraints {}",
            if spd_ok { "passes" } else { "FAILS" },
            if singular_ok { "NotPositiveDefinite" } else { "NOT DETECTED" }
        ),
    ))
}

/// Four-point Gauss–Legendre rule on [0, 1].
fn gauss4() -> [(f64, f64); 4] {
    let (p1, w1) = (0.339_981_043_584_856_3, 0.652_145_154_862_546_1);
    let (p2, w2) = (0.861_136_311_594_052_6, 0.347_854_845_137_453_9);
    [
        ((1.0 - p2) / 2.0, w2 / 2.0),
        ((1.0 - p1) / 2.0, w1 / 2.0),
        ((1.0 + p1) / 2.0, w1 / 2.0),
        ((1.0 + p2) / 2.0, w2 / 2.0),
    ]
}

fn random_spd(rng: &mut ChaCha8Rng) -> Mat3 {
    let g = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    g * g.transpose() + Mat3::identity() * 0.5
}

/// Clamped-left networks small enough for dense oracles.
fn small_systems() -> Vec<Network> {
    let mut out = Vec::new();
    for (n_x, n_y) in [(1, 1), (2, 2), (3, 3)] {
        let base = generate_expanded_metal(&ExpandedMetal {
            n_x,
            n_y,
            ..ExpandedMetal::steel_sheet()
        })
        .unwrap();
        out.push("slab axis=x at=min fix=all value=0.5".parse::<BcSpec>().unwrap().apply(&base, true));
    }
    out
}

fn oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rule = gauss4();
    let mut elem: f64 = 0.0;
    let check_edge = |edge: &Edge, x1: &Vec3, x2: &Vec3| -> f64 {
        let k2: Mat12 = element_stiffness(edge, x1, x2);
        let k4 = element_stiffness_with_rule(edge, x1, x2, &rule);
        (k2 - k4).amax() / k4.amax()
    };
    for net in [sheet(), fiber_sample()] {
        for edge in net.edges() {
            let [a, b] = edge.endpoints;
            elem = elem.max(check_edge(edge, &net.node(a).position, &net.node(b).position));
        }
    }
    for _ in 0..50 {
        let edge = Edge::new(0, 1, random_spd(&mut rng), random_spd(&mut rng), random_spd(&mut rng));
        let x1 = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        let x2 = x1 + Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        elem = elem.max(check_edge(&edge, &x1, &x2));
    }

    let mut matrices: Vec<CsrMatrix> = small_systems().iter().map(|n| assemble(n).a).collect();
    for n in [40, 120, 200] {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 4.0 + rng.gen_range(0.0..1.0));
            for _ in 0..2 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v = rng.gen_range(-0.5..0.5);
                    t.push(i, j, v);
                    t.push(j, i, v);
                }
            }
        }
        matrices.push(t.build(true)?);
    }
    let mut chol: f64 = 0.0;
    let mut sizes = Vec::new();
    for a in &matrices {
        let n = a.n_rows();
        sizes.push(n);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = cholesky_factorize(a)?.solve(&b)?;
        let xd = dense(a).cholesky().expect("oracle factorization").solve(&DVector::from_vec(b));
        chol = chol.max(max_abs(x.iter().zip(xd.iter()).map(|(p, q)| p - q)) / xd.amax());
    }

    let mut step: f64 = 0.0;
    for net in small_systems() {
        let sys = assemble(&net);
        let n = sys.n_free();
        for theta in [0.0, 1.0 / 12.0, 0.25] {
            let tau = 2e-3;
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x1: Vec<f64> = x0.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
            let problem = WaveProblem::new(&sys, x0.clone(), vec![0.0; n])?;
            let mut stepper = Stepper::new(&problem, &ThetaConfig::new(theta, tau, 1), &mut SchwarzCache::new())?;
            let (x2, _) = stepper.step(1, &x0, &x1, None)?;
            let (a, m) = (dense(&sys.a), dense(&sys.m));
            let s = &m + &a * (tau * tau * theta);
            let rhs = (DVector::from_vec(sys.lift.clone()) - &a * DVector::from_vec(x1.clone())) * (tau * tau);
            let delta = s.cholesky().expect("oracle factorization").solve(&rhs);
            let xd = DVector::from_vec(x1) * 2.0 - DVector::from_vec(x0) + delta;
            step = step.max(max_abs(x2.iter().zip(xd.iter()).map(|(p, q)| p - q)) / xd.amax());
        }
    }
    Ok((
        elem <= 1e-13 && chol <= 1e-10 && step <= 1e-12,
        format!(
            "element vs 4-point Gauss {elem:.1e} (want <= 1e-13); Cholesky vs dense {chol:.1e} on n = {sizes:?} \
             (want <= 1e-10); theta step vs dense {step:.1e} (want <= 1e-12)"
        ),
    ))
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 8] = [
        ("static h-convergence", h_convergence),
        ("discrete energy conservation", energy_conservation),
        ("leapfrog stability bracket", stability),
        ("tau-convergence", tau_convergence),
        ("preconditioner H-robustness", h_robustness),
        ("spectral-equivalence oracle", spectral_equivalence),
        ("kernel and SPD structure", kernel_and_spd),
        ("oracle equivalences", oracles),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {number} [{}] {name} ({secs:.1} s): {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
