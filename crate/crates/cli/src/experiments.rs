//! Experiment drivers shared by the CLI and the acceptance suite.

use std::sync::Arc;
use std::time::Instant;

use beamnet::dynamics::{
    cfl_estimate, run, run_with_observer, CflEstimate, CflMode, EnergyEntry, RunOptions, RunOutput, StepSolver,
    StopReason, ThetaConfig, WaveProblem,
};
use beamnet::fem::{assemble, l2_norm, transfer, v_norm, AssembledSystem, State};
use beamnet::krylov::{pcg, smallest_eigenpair, EigenOptions, PcgOptions, SolveReport};
use beamnet::network::{refine, Network};
use beamnet::schwarz::{build_coarse, CounterSnapshot, Face, SchwarzCache, SchwarzCounters, SchwarzPreconditioner};
use beamnet::sparsela::{cholesky_factorize, CsrMatrix};
use beamnet::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverSpec {
    Direct,
    Schwarz { cells: [usize; 3], tol: f64, max_iter: usize },
}

#[derive(Debug, Clone)]
pub struct StaticOutcome {
    pub state: State,
    pub report: Option<SolveReport>,
    pub counters: Option<CounterSnapshot>,
}

/// Solves `A x = lift` (zero loads, Dirichlet data only).
pub fn solve_static(net: &Network, sys: &AssembledSystem, solver: &SolverSpec, faces: &[Face]) -> Result<StaticOutcome> {
    let rhs = sys.rhs(&vec![0.0; sys.n_free()])?;
    match solver {
        SolverSpec::Direct => Ok(StaticOutcome {
            state: sys.solve_direct(&vec![0.0; sys.n_free()])?,
            report: None,
            counters: None,
        }),
        SolverSpec::Schwarz { cells, tol, max_iter } => {
            if sys.n_free() == 0 {
                return Ok(StaticOutcome {
                    state: sys.dof_map.state_from_free(&[]),
                    report: None,
                    counters: None,
                });
            }
            let space = build_coarse(net, &sys.dof_map, *cells, faces)?;
            let counters = Arc::new(SchwarzCounters::default());
            let pre = SchwarzPreconditioner::setup(&sys.a, &space, counters.clone())?;
            let (x, rep) = pcg(&sys.a, &rhs, &pre, None, &PcgOptions::new(*tol, *max_iter))?;
            if !rep.converged {
                return Err(Error::NoConvergence {
                    method: "pcg",
                    iterations: rep.iterations,
                    residual: rep.final_relative_residual,
                });
            }
            Ok(StaticOutcome {
                state: sys.dof_map.state_from_free(&x),
                report: Some(rep),
                counters: Some(counters.snapshot()),
            })
        }
    }
}

/// Least-squares slope of `log y` against `log x` over the positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn level(base: &Network, i: u32) -> Result<Network> {
    if i == 0 {
        Ok(base.clone())
    } else {
        refine(base, i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HconvRow {
    pub level: u32,
    pub h: f64,
    pub n_free: usize,
    pub v_err: f64,
    pub l2_err: f64,
    pub v_rate: Option<f64>,
    pub l2_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HconvResult {
    pub reference_level: u32,
    pub reference_v_norm: f64,
    pub reference_l2_norm: f64,
    pub rows: Vec<HconvRow>,
    pub v_slope: Option<f64>,
    pub l2_slope: Option<f64>,
}

/// Solves on `refine(base, i)` for each level and measures the error of the linear
/// interpolant against the solution at `reference`.
pub fn hconv(base: &Network, levels: &[u32], reference: u32, solver: &SolverSpec, faces: &[Face]) -> Result<HconvResult> {
    if let Some(&bad) = levels.iter().find(|&&l| l > reference) {
        return Err(Error::InvalidArgument(format!("level {bad} exceeds the reference level {reference}")));
    }
    let solve = |i: u32| -> Result<(Network, State)> {
        let net = level(base, i)?;
        let sys = assemble(&net);
        let s = solve_static(&net, &sys, solver, faces)?.state;
        Ok((net, s))
    };
    let (ref_net, ref_state) = solve(reference)?;
    let mut rows: Vec<HconvRow> = Vec::new();
    for &i in levels {
        let (net, s) = solve(i)?;
        let err = transfer(base, &s, i, reference).sub(&ref_state);
        let (v_err, l2_err) = (v_norm(&ref_net, &err), l2_norm(&ref_net, &err));
        let rate = |prev: f64, cur: f64| (prev > 0.0 && cur > 0.0).then(|| (prev / cur).log2());
        let (v_rate, l2_rate) = match rows.last() {
            Some(p) if p.level + 1 == i => (rate(p.v_err, v_err), rate(p.l2_err, l2_err)),
            _ => (None, None),
        };
        rows.push(HconvRow {
            level: i,
            h: net.max_edge_length(),
            n_free: assemble(&net).n_free(),
            v_err,
            l2_err,
            v_rate,
            l2_rate,
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    Ok(HconvResult {
        reference_level: reference,
        reference_v_norm: v_norm(&ref_net, &ref_state),
        reference_l2_norm: l2_norm(&ref_net, &ref_state),
        v_slope: loglog_slope(&h, &rows.iter().map(|r| r.v_err).collect::<Vec<_>>()),
        l2_slope: loglog_slope(&h, &rows.iter().map(|r| r.l2_err).collect::<Vec<_>>()),
        rows,
    })
}

/// Static solution on `static_net` restricted to the constraints of `wave_net`: the released
/// components become free and keep their static values as initial data. Both networks must
/// share nodes.
pub fn released_initial_state(static_net: &Network, wave_net: &Network, solver: &SolverSpec, faces: &[Face]) -> Result<State> {
    if static_net.node_count() != wave_net.node_count() {
        return Err(Error::InvalidArgument("static and wave networks differ".into()));
    }
    let sys = assemble(static_net);
    let mut s = solve_static(static_net, &sys, solver, faces)?.state;
    for (i, n) in wave_net.nodes().iter().enumerate() {
        for k in 0..3 {
            if n.constrained[k] {
                s.u[i][k] = n.prescribed[k];
            }
            if n.constrained[k + 3] {
                s.r[i][k] = n.prescribed[k + 3];
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Stable,
    EnergyGrowth,
    Nonfinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketRow {
    pub factor: f64,
    pub tau: f64,
    pub steps_requested: usize,
    pub steps_taken: usize,
    /// `max_n E_phys^{n+½} / E_phys^{½}` over the steps taken.
    pub max_energy_ratio: f64,
    pub outcome: Outcome,
    /// Step at which growth or a non-finite entry was detected.
    pub stop_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketResult {
    pub sharp: CflEstimate,
    pub conservative: CflEstimate,
    /// Sharp over conservative step bound.
    pub gap_factor: f64,
    pub rows: Vec<BracketRow>,
}

fn max_ratio(energy: &[EnergyEntry]) -> f64 {
    let e0 = energy.first().map_or(1.0, EnergyEntry::physical);
    energy.iter().map(|e| e.physical() / e0).fold(1.0, f64::max)
}

/// Leapfrog runs at `factor · τ*` for each factor.
pub fn stability_bracket(
    net: &Network,
    initial: &State,
    factors: &[f64],
    steps: usize,
    growth_limit: f64,
    a_max: Option<f64>,
) -> Result<BracketResult> {
    let sys = assemble(net);
    let sharp = cfl_estimate(net, &sys, 0.0, CflMode::Sharp { tol: 1e-10 })?;
    let conservative = cfl_estimate(net, &sys, 0.0, CflMode::Conservative { a_max })?;
    let problem = WaveProblem::from_states(&sys, initial, &State::zeros(net.node_count()))?;
    let mut rows = Vec::new();
    for &factor in factors {
        let tau = factor * sharp.tau;
        let config = ThetaConfig::new(0.0, tau, steps);
        let options = RunOptions {
            probes: Vec::new(),
            growth_limit: Some(growth_limit),
        };
        let row = match run(&problem, &config, &options, &mut SchwarzCache::new()) {
            Ok(out) => {
                let (outcome, stop_step) = match out.stopped {
                    Some(StopReason::EnergyGrowth { step, .. }) => (Outcome::EnergyGrowth, Some(step)),
                    None => (Outcome::Stable, None),
                };
                BracketRow {
                    factor,
                    tau,
                    steps_requested: steps,
                    steps_taken: out.steps_taken,
                    max_energy_ratio: max_ratio(&out.energy),
                    outcome,
                    stop_step,
                }
            }
            Err(Error::NonfiniteState { step }) => BracketRow {
                factor,
                tau,
                steps_requested: steps,
                steps_taken: step.saturating_sub(1),
                max_energy_ratio: f64::INFINITY,
                outcome: Outcome::Nonfinite,
                stop_step: Some(step),
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(BracketResult {
        gap_factor: sharp.tau / conservative.tau,
        sharp,
        conservative,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauconvRow {
    pub theta: f64,
    pub tau: f64,
    pub steps: usize,
    pub err_l2: f64,
    pub err_v: f64,
    pub vel_err_l2: f64,
    pub vel_err_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauconvSlopes {
    pub theta: f64,
    pub err_l2: Option<f64>,
    pub err_v: Option<f64>,
    pub vel_err_l2: Option<f64>,
    pub vel_err_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauconvResult {
    pub lambda1: f64,
    pub eigen_residual: f64,
    pub period: f64,
    pub final_time: f64,
    pub rows: Vec<TauconvRow>,
    pub slopes: Vec<TauconvSlopes>,
}

/// Eigenmode data `x⁰ = φ̂`, `v⁰ = 0` against the semi-discrete solution `φ̂ cos(√λ₁ t)` up to
/// `periods` periods. Reports the maximum over steps of the state error and of the error of
/// the half-step difference quotient `D_τ`, each in the L² and V norms.
pub fn tauconv(net: &Network, thetas: &[f64], taus: &[f64], periods: f64, eig_tol: f64) -> Result<TauconvResult> {
    let sys = assemble(net);
    let fac = cholesky_factorize(&sys.a)?;
    let eig = smallest_eigenpair(&sys.a, &sys.m, &fac, &EigenOptions::new(eig_tol, 100_000))?;
    let omega = eig.value.sqrt();
    let period = 2.0 * std::f64::consts::PI / omega;
    let final_time = periods * period;
    let map = &sys.dof_map;
    let phi = map.state_from_free(&eig.vector);
    let mut rows = Vec::new();
    for &theta in thetas {
        for &tau in taus {
            let steps = (final_time / tau).round().max(1.0) as usize;
            let problem = WaveProblem::new(&sys, eig.vector.clone(), vec![0.0; sys.n_free()])?;
            let config = ThetaConfig::new(theta, tau, steps);
            let (mut el2, mut ev, mut vl2, mut vv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            let mut prev_err: Option<State> = None;
            let mut observe = |n: usize, x: &[f64]| {
                let exact = phi.scaled((omega * n as f64 * tau).cos());
                let err = map.state_from_free(x).sub(&exact);
                el2 = el2.max(l2_norm(net, &err));
                ev = ev.max(v_norm(net, &err));
                if let Some(p) = &prev_err {
                    let d = err.sub(p).scaled(1.0 / tau);
                    vl2 = vl2.max(l2_norm(net, &d));
                    vv = vv.max(v_norm(net, &d));
                }
                prev_err = Some(err);
            };
            run_with_observer(&problem, &config, &RunOptions::default(), &mut SchwarzCache::new(), &mut observe)?;
            rows.push(TauconvRow {
                theta,
                tau,
                steps,
                err_l2: el2,
                err_v: ev,
                vel_err_l2: vl2,
                vel_err_v: vv,
            });
        }
    }
    let slopes = thetas
        .iter()
        .map(|&theta| {
            let sel: Vec<&TauconvRow> = rows.iter().filter(|r| r.theta == theta).collect();
            let t: Vec<f64> = sel.iter().map(|r| r.tau).collect();
            let col = |f: fn(&TauconvRow) -> f64| loglog_slope(&t, &sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            TauconvSlopes {
                theta,
                err_l2: col(|r| r.err_l2),
                err_v: col(|r| r.err_v),
                vel_err_l2: col(|r| r.vel_err_l2),
                vel_err_v: col(|r| r.vel_err_v),
            }
        })
        .collect();
    Ok(TauconvResult {
        lambda1: eig.value,
        eigen_residual: eig.residual,
        period,
        final_time,
        rows,
        slopes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdRow {
    pub cells: [usize; 3],
    pub n_coarse: usize,
    pub n_subdomains: usize,
    pub max_subdomain_dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_relative_residual: f64,
    /// Relative A-norm error at exit.
    pub final_energy_error: f64,
    pub reduction_factors: Vec<f64>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub counters: CounterSnapshot,
}

impl DdRow {
    /// Mean reduction factor from iteration `skip` on.
    pub fn mean_factor(&self, skip: usize) -> Option<f64> {
        let f = self.reduction_factors.get(skip..)?;
        (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64)
    }

    /// Largest deviation of a reduction factor from the mean, from iteration `skip` on.
    pub fn factor_spread(&self, skip: usize) -> Option<f64> {
        let m = self.mean_factor(skip)?;
        self.reduction_factors[skip..].iter().map(|f| (f - m).abs()).reduce(f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct DdStudy {
    /// `A` for the elliptic problem, `M + τ²θA` for one implicit time step.
    pub operator: CsrMatrix,
    pub rhs: Vec<f64>,
    pub reference: Vec<f64>,
    pub rows: Vec<DdRow>,
    pub reports: Vec<SolveReport>,
}

/// Right-hand side of the study: the Dirichlet lift for the elliptic problem when it is
/// nonzero, otherwise `A*·ξ` with seeded random `ξ`.
fn study_rhs(op: &CsrMatrix, sys: &AssembledSystem, time_dependent: bool, seed: u64) -> Result<Vec<f64>> {
    if !time_dependent && sys.lift.iter().any(|&v| v != 0.0) {
        return Ok(sys.lift.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi: Vec<f64> = (0..op.n_rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    op.spmv(&xi)
}

/// PCG with the two-level Schwarz preconditioner for each coarse grid, zero initial guess,
/// stopping on `tol` for the preconditioned residual. The A-norm error against a direct
/// solve is recorded per iteration.
pub fn ddstudy(
    net: &Network,
    faces: &[Face],
    grids: &[[usize; 3]],
    time_step: Option<(f64, f64)>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<DdStudy> {
    let sys = assemble(net);
    let operator = match time_step {
        Some((theta, tau)) => sys.m.add_scaled(tau * tau * theta, &sys.a)?,
        None => sys.a.clone(),
    };
    let rhs = study_rhs(&operator, &sys, time_step.is_some(), seed)?;
    let reference = cholesky_factorize(&operator)?.solve(&rhs)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &cells in grids {
        let t0 = Instant::now();
        let space = build_coarse(net, &sys.dof_map, cells, faces)?;
        let counters = Arc::new(SchwarzCounters::default());
        let pre = SchwarzPreconditioner::setup(&operator, &space, counters.clone())?;
        let setup_seconds = t0.elapsed().as_secs_f64();
        let mut opts = PcgOptions::new(tol, max_iter);
        opts.reference = Some(reference.clone());
        let (_, rep) = pcg(&operator, &rhs, &pre, None, &opts)?;
        let energy = rep.energy_error_history.clone().unwrap_or_default();
        rows.push(DdRow {
            cells,
            n_coarse: space.n_coarse(),
            n_subdomains: pre.n_subdomains(),
            max_subdomain_dofs: space.subdomains.iter().map(|s| s.dofs.len()).max().unwrap_or(0),
            iterations: rep.iterations,
            converged: rep.converged,
            final_relative_residual: rep.final_relative_residual,
            final_energy_error: energy.last().copied().unwrap_or(f64::NAN),
            reduction_factors: rep.reduction_factors(),
            setup_seconds,
            solve_seconds: rep.wall_time.as_secs_f64(),
            counters: counters.snapshot(),
        });
        reports.push(rep);
    }
    Ok(DdStudy {
        operator,
        rhs,
        reference,
        rows,
        reports,
    })
}

/// Wave run from a released static state with zero initial velocity.
pub fn wave(
    net: &Network,
    initial: &State,
    config: &ThetaConfig,
    options: &RunOptions,
    cache: &mut SchwarzCache,
) -> Result<(AssembledSystem, RunOutput)> {
    let sys = assemble(net);
    let out = {
        let problem = WaveProblem::from_states(&sys, initial, &State::zeros(net.node_count()))?;
        run(&problem, config, options, cache)?
    };
    Ok((sys, out))
}

/// Step solver for the wave command.
pub fn step_solver(net: &Network, sys: &AssembledSystem, spec: &SolverSpec, faces: &[Face]) -> Result<StepSolver> {
    Ok(match spec {
        SolverSpec::Direct => StepSolver::Direct,
        SolverSpec::Schwarz { cells, tol, max_iter } => StepSolver::Schwarz {
            space: build_coarse(net, &sys.dof_map, *cells, faces)?,
            tol: *tol,
            max_iter: *max_iter,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigSummary {
    pub lambda1: f64,
    pub lambda1_iterations: usize,
    pub lambda1_residual: f64,
    pub lambda_max: f64,
    pub tau_sharp: f64,
    pub tau_conservative: f64,
    pub a_max: f64,
    pub m_min: f64,
    pub h_min: f64,
}

pub fn eig(net: &Network, theta: f64, tol: f64, a_max: Option<f64>) -> Result<EigSummary> {
    let sys = assemble(net);
    let fac = cholesky_factorize(&sys.a)?;
    let low = smallest_eigenpair(&sys.a, &sys.m, &fac, &EigenOptions::new(tol, 100_000))?;
    let sharp = cfl_estimate(net, &sys, 0.0, CflMode::Sharp { tol })?;
    let lambda_max = sharp.lambda_max.unwrap_or(f64::NAN);
    let cons = cfl_estimate(net, &sys, theta, CflMode::Conservative { a_max })?;
    Ok(EigSummary {
        lambda1: low.value,
        lambda1_iterations: low.iterations,
        lambda1_residual: low.residual,
        lambda_max,
        tau_sharp: beamnet::dynamics::sharp_tau(lambda_max, theta),
        tau_conservative: cons.tau,
        a_max: cons.a_max.unwrap_or(f64::NAN),
        m_min: cons.m_min.unwrap_or(f64::NAN),
        h_min: cons.h_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::BcSpec;
    use beamnet::network::{generate_expanded_metal, ExpandedMetal};

    fn small_sheet(spec: &str) -> Network {
        let net = generate_expanded_metal(&ExpandedMetal {
            n_x: 2,
            n_y: 2,
            ..ExpandedMetal::steel_sheet()
        })
        .unwrap();
        spec.parse::<BcSpec>().unwrap().apply(&net, true)
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let net = small_sheet("slab axis=x at=max fix=all");
        let sys = assemble(&net);
        for solver in [
            SolverSpec::Direct,
            SolverSpec::Schwarz {
                cells: [2, 2, 1],
                tol: 1e-10,
                max_iter: 100,
            },
        ] {
            let s = solve_static(&net, &sys, &solver, &[Face::XMax]).unwrap().state;
            assert!(s.u.iter().chain(&s.r).all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn direct_and_pcg_agree() {
        let net = small_sheet("slab axis=x at=max fix=all; slab axis=x at=min fix=uz value=20");
        let sys = assemble(&net);
        let d = solve_static(&net, &sys, &SolverSpec::Direct, &[]).unwrap().state;
        let schwarz = SolverSpec::Schwarz {
            cells: [2, 2, 1],
            tol: 1e-10,
            max_iter: 200,
        };
        let p = solve_static(&net, &sys, &schwarz, &[Face::XMax]).unwrap().state;
        assert!(v_norm(&net, &d.sub(&p)) <= 1e-8 * v_norm(&net, &d));
    }

    #[test]
    fn reference_level_has_zero_error() {
        let net = small_sheet("slab axis=x at=max fix=all; slab axis=x at=min fix=uz value=20");
        let res = hconv(&net, &[0, 1, 2], 2, &SolverSpec::Direct, &[]).unwrap();
        assert_eq!(res.rows[2].v_err, 0.0);
        assert!(res.rows[0].v_err > res.rows[1].v_err);
        assert!(hconv(&net, &[3], 2, &SolverSpec::Direct, &[]).is_err());
    }

    #[test]
    fn release_keeps_static_values() {
        let spec: BcSpec = "slab axis=x at=max fix=all; slab axis=x at=min fix=uz value=20 release"
            .parse()
            .unwrap();
        let base = small_sheet("");
        let (st, wv) = (spec.apply(&base, true), spec.apply(&base, false));
        let s = released_initial_state(&st, &wv, &SolverSpec::Direct, &[]).unwrap();
        for (i, n) in base.nodes().iter().enumerate() {
            if n.position.x == 0.0 {
                assert_eq!(s.u[i].z, 20.0);
            }
        }
        let sys = assemble(&wv);
        assert!(WaveProblem::from_states(&sys, &s, &State::zeros(s.n_nodes())).is_ok());
    }
}
