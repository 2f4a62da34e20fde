//! θ-scheme time stepping in second-difference form:
//! `(M + τ²θA)(x^{n+1} − 2x^n + x^{n−1}) = τ²(F^{n;θ} − A x^n)`,
//! which is the three-level scheme rearranged so each step needs one product with `A`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{AssembledSystem, State};
use crate::krylov::{pcg, PcgOptions};
use crate::schwarz::{CoarseSpace, CounterSnapshot, SchwarzCache, SchwarzPreconditioner};
use crate::sparsela::{cholesky_factorize, CholeskyFactor, CsrMatrix};

#[derive(Debug, Clone)]
pub enum StepSolver {
    Direct,
    Schwarz {
        space: CoarseSpace,
        tol: f64,
        max_iter: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ThetaConfig {
    pub theta: f64,
    /// ms
    pub tau: f64,
    pub steps: usize,
    pub solver: StepSolver,
}

impl ThetaConfig {
    pub fn new(theta: f64, tau: f64, steps: usize) -> Self {
        Self {
            theta,
            tau,
            steps,
            solver: StepSolver::Direct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.tau)));
        }
        if !(0.0..=0.5).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!("theta must lie in [0, 1/2], got {}", self.theta)));
        }
        Ok(())
    }
}

/// Free-dof load vector at time `t` (ms), without the Dirichlet lift.
pub type LoadFn<'a> = dyn Fn(f64) -> Vec<f64> + Sync + 'a;

/// Semi-discrete wave problem `M ẍ + A x = F + lift` on the free dofs; constrained dofs hold
/// their prescribed values for all time.
pub struct WaveProblem<'a> {
    pub system: &'a AssembledSystem,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    /// Third time derivative at t = 0, used only for θ = 1/12 (zero when absent).
    pub w0: Option<Vec<f64>>,
    pub load: Option<Box<LoadFn<'a>>>,
}

impl<'a> WaveProblem<'a> {
    pub fn new(system: &'a AssembledSystem, x0: Vec<f64>, v0: Vec<f64>) -> Result<Self> {
        let n = system.n_free();
        for v in [&x0, &v0] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        Ok(Self {
            system,
            x0,
            v0,
            w0: None,
            load: None,
        })
    }

    /// Initial data from nodal states; constrained entries of `u0` must equal the prescribed
    /// values and those of `v0` must vanish.
    pub fn from_states(system: &'a AssembledSystem, u0: &State, v0: &State) -> Result<Self> {
        let map = &system.dof_map;
        let full_u = map.full_from_state(u0);
        let full_v = map.full_from_state(v0);
        for (k, g) in map.prescribed().iter().enumerate() {
            let d = map.n_free() + k;
            if full_u[d] != *g || full_v[d] != 0.0 {
                let (node, comp) = map.owner(d);
                return Err(Error::InvalidArgument(format!(
                    "initial data violate the Dirichlet condition at node {node}, component {comp}"
                )));
            }
        }
        Self::new(system, map.free_from_state(u0), map.free_from_state(v0))
    }

    fn force(&self, t: f64) -> Vec<f64> {
        let mut f = self.system.lift.clone();
        if let Some(load) = &self.load {
            for (fi, li) in f.iter_mut().zip(load(t)) {
                *fi += li;
            }
        }
        f
    }
}

/// Half-step energy terms, each including the factor ½.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEntry {
    /// Half step `n + ½`.
    pub n: usize,
    pub kinetic: f64,
    pub potential: f64,
    pub correction: f64,
    pub total: f64,
}

impl EnergyEntry {
    /// Kinetic plus potential, without the θ correction.
    pub fn physical(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// `ℰ^{n+½} = ½[m(D,D) + a(x^{n+½}, x^{n+½}) + τ²(θ−¼) a(D,D)]` with `D = (x^{n+1} − x^n)/τ`;
/// the potential term uses the full state including prescribed values.
pub fn discrete_energy(
    system: &AssembledSystem,
    theta: f64,
    tau: f64,
    n: usize,
    x_n: &[f64],
    x_np1: &[f64],
) -> EnergyEntry {
    let d: Vec<f64> = x_np1.iter().zip(x_n).map(|(a, b)| (a - b) / tau).collect();
    let half: Vec<f64> = x_np1.iter().zip(x_n).map(|(a, b)| 0.5 * (a + b)).collect();
    let kinetic = 0.5 * system.m.quad_form(&d);
    let potential = 0.5 * system.a_full.quad_form(&system.dof_map.full_from_free(&half));
    let correction = 0.5 * tau * tau * (theta - 0.25) * system.a.quad_form(&d);
    EnergyEntry {
        n,
        kinetic,
        potential,
        correction,
        total: kinetic + potential + correction,
    }
}

enum Inner {
    Direct(CholeskyFactor),
    Pcg {
        a_star: CsrMatrix,
        precond: Arc<SchwarzPreconditioner>,
        opts: PcgOptions,
    },
    Empty,
}

/// Per-step solver for `S = M + τ²θA` (`S = M` for θ = 0), factorized once per run.
pub struct Stepper<'p> {
    problem: &'p WaveProblem<'p>,
    theta: f64,
    tau: f64,
    inner: Inner,
    pub iterations: Vec<usize>,
}

impl<'p> Stepper<'p> {
    pub fn new(problem: &'p WaveProblem<'p>, config: &ThetaConfig, cache: &mut SchwarzCache) -> Result<Self> {
        config.validate()?;
        let sys = problem.system;
        let tau2 = config.tau * config.tau;
        let s = if config.theta == 0.0 {
            sys.m.clone()
        } else {
            sys.m.add_scaled(tau2 * config.theta, &sys.a)?
        };
        let inner = if s.n_rows() == 0 {
            Inner::Empty
        } else {
            match (&config.solver, config.theta == 0.0) {
                (StepSolver::Schwarz { space, tol, max_iter }, false) => Inner::Pcg {
                    precond: cache.get_or_setup(&s, space)?,
                    a_star: s,
                    opts: PcgOptions::new(*tol, *max_iter),
                },
                _ => Inner::Direct(cholesky_factorize(&s)?),
            }
        };
        Ok(Self {
            problem,
            theta: config.theta,
            tau: config.tau,
            inner,
            iterations: Vec::new(),
        })
    }

    /// Solves `S δ = τ² (F − A x)` with `guess` as the PCG start.
    fn second_difference(&mut self, f: &[f64], x: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let sys = self.problem.system;
        let ax = sys.a.spmv(x)?;
        let tau2 = self.tau * self.tau;
        let rhs: Vec<f64> = f.iter().zip(&ax).map(|(fi, ai)| tau2 * (fi - ai)).collect();
        match &self.inner {
            Inner::Empty => Ok(Vec::new()),
            Inner::Direct(fac) => fac.solve(&rhs),
            Inner::Pcg { a_star, precond, opts } => {
                let (d, rep) = pcg(a_star, &rhs, precond.as_ref(), guess, opts)?;
                if !rep.converged {
                    return Err(Error::NoConvergence {
                        method: "pcg",
                        iterations: rep.iterations,
                        residual: rep.final_relative_residual,
                    });
                }
                self.iterations.push(rep.iterations);
                Ok(d)
            }
        }
    }

    fn theta_force(&self, n: usize) -> Vec<f64> {
        let p = self.problem;
        if p.load.is_none() {
            return p.force(0.0);
        }
        let t = n as f64 * self.tau;
        let (fm, f0, fp) = (p.force(t - self.tau), p.force(t), p.force(t + self.tau));
        crate::fem::theta_load(&fm, &f0, &fp, self.theta).expect("equal lengths")
    }

    /// `x¹` from `x⁰`, the initial velocity and (θ = 1/12) the third-derivative correction.
    pub fn initial_step(&mut self) -> Result<Vec<f64>> {
        let p = self.problem;
        let tau = self.tau;
        let mut v = p.v0.clone();
        if (self.theta - 1.0 / 12.0).abs() < 1e-15 {
            if let Some(w) = &p.w0 {
                for (vi, wi) in v.iter_mut().zip(w) {
                    *vi += tau * tau / 6.0 * wi;
                }
            }
        }
        let f = self.theta_force(0);
        let d = self.second_difference(&f, &p.x0, None)?;
        let x1: Vec<f64> = (0..p.x0.len())
            .map(|i| p.x0[i] + tau * v[i] + 0.5 * d[i])
            .collect();
        check_finite(&x1, 1)?;
        Ok(x1)
    }

    /// `x^{n+1}` from `x^{n−1}`, `x^n`; `prev_delta` seeds the iterative solver.
    pub fn step(&mut self, n: usize, x_nm1: &[f64], x_n: &[f64], prev_delta: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.theta_force(n);
        let d = self.second_difference(&f, x_n, prev_delta)?;
        let x: Vec<f64> = (0..x_n.len()).map(|i| 2.0 * x_n[i] - x_nm1[i] + d[i]).collect();
        check_finite(&x, n + 1)?;
        Ok((x, d))
    }
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonfiniteState { step })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    /// Physical energy exceeded the growth limit times its first value.
    EnergyGrowth { step: usize, ratio: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Steps at which to record nodal snapshots.
    pub probes: Vec<usize>,
    /// Stop once physical energy exceeds this multiple of its value at n = ½.
    pub growth_limit: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub energy: Vec<EnergyEntry>,
    pub probes: Vec<State>,
    /// Last two free states `(x^{N−1}, x^N)`; `x^{N−1}` is empty when N = 0.
    pub last: (Vec<f64>, Vec<f64>),
    pub steps_taken: usize,
    /// PCG iterations per solve when the Schwarz solver is used.
    pub solve_iterations: Vec<usize>,
    pub counters: CounterSnapshot,
    pub stopped: Option<StopReason>,
}

/// Runs the scheme for `config.steps` steps, calling `observer(n, x^n)` for every state.
pub fn run_with_observer(
    problem: &WaveProblem,
    config: &ThetaConfig,
    options: &RunOptions,
    cache: &mut SchwarzCache,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<RunOutput> {
    let sys = problem.system;
    let mut stepper = Stepper::new(problem, config, cache)?;
    let mut probes = Vec::new();
    let record = |n: usize, x: &[f64], probes: &mut Vec<State>| {
        if options.probes.contains(&n) {
            let mut s = sys.dof_map.state_from_free(x);
            s.time = Some(n as f64 * config.tau);
            probes.push(s);
        }
    };
    observer(0, &problem.x0);
    record(0, &problem.x0, &mut probes);
    let mut energy = Vec::new();
    let mut stopped = None;
    if config.steps == 0 {
        return Ok(RunOutput {
            energy,
            probes,
            last: (Vec::new(), problem.x0.clone()),
            steps_taken: 0,
            solve_iterations: stepper.iterations,
            counters: cache.counters().snapshot(),
            stopped,
        });
    }
    let mut prev = problem.x0.clone();
    let mut cur = stepper.initial_step()?;
    let mut delta: Option<Vec<f64>> = None;
    observer(1, &cur);
    record(1, &cur, &mut probes);
    energy.push(discrete_energy(sys, config.theta, config.tau, 0, &prev, &cur));
    let e0 = energy[0].physical();
    let mut steps_taken = 1;
    for n in 1..config.steps {
        if let Some(limit) = options.growth_limit {
            let ratio = energy.last().map_or(1.0, |e| e.physical() / e0);
            if ratio > limit {
                stopped = Some(StopReason::EnergyGrowth { step: n, ratio });
                break;
            }
        }
        let (next, d) = stepper.step(n, &prev, &cur, delta.as_deref())?;
        energy.push(discrete_energy(sys, config.theta, config.tau, n, &cur, &next));
        prev = cur;
        cur = next;
        delta = Some(d);
        steps_taken = n + 1;
        observer(n + 1, &cur);
        record(n + 1, &cur, &mut probes);
    }
    Ok(RunOutput {
        energy,
        probes,
        last: (prev, cur),
        steps_taken,
        solve_iterations: stepper.iterations,
        counters: cache.counters().snapshot(),
        stopped,
    })
}

pub fn run(problem: &WaveProblem, config: &ThetaConfig, options: &RunOptions, cache: &mut SchwarzCache) -> Result<RunOutput> {
    run_with_observer(problem, config, options, cache, &mut |_, _| {})
}
