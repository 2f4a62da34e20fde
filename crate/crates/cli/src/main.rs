use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use beamnet::dynamics::{cfl_estimate, CflMode, RunOptions, StopReason, ThetaConfig};
use beamnet::fem::{assemble, l2_norm, v_norm};
use beamnet::network::{
    check_assumptions, generate_expanded_metal, generate_random_fibers, refine, ExpandedMetal, FiberParams,
    LengthDist, Material, Network,
};
use beamnet::schwarz::{Face, SchwarzCache};
use beamnet::Error;
use beamnet_cli::bc::BcSpec;
use beamnet_cli::experiments::{self, SolverSpec};
use beamnet_cli::io::{self, fmt_f64, table_to_csv};
use beamnet_cli::report::RunReport;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "beamnet", version, about = "Timoshenko beam network solver and experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Serial reductions everywhere (single worker thread).
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated network file.
    Generate(GenerateArgs),
    /// Subdivide every edge of a network 2^splits times.
    Refine {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        splits: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Network assumption diagnostics.
    Check {
        #[command(flatten)]
        net: NetArgs,
        /// Locality radius R₀ (mm).
        #[arg(long)]
        r0: f64,
        /// Box-centre spacing (mm); defaults to R₀/2.
        #[arg(long)]
        stride: Option<f64>,
    },
    /// Stationary problem with Dirichlet data.
    Static {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Spatial convergence against a refined reference.
    Hconv {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        levels: Vec<u32>,
        #[arg(long, default_value_t = 6)]
        reference: u32,
    },
    /// θ-scheme run from a released static state.
    Wave {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        time: TimeArgs,
        /// Step size as a multiple of the sharp leapfrog bound (overrides --tau).
        #[arg(long)]
        tau_factor: Option<f64>,
        /// Steps at which nodal snapshots are written.
        #[arg(long, value_delimiter = ',')]
        probes: Vec<usize>,
        /// Stop when physical energy exceeds this multiple of its initial value.
        #[arg(long, default_value_t = 1e3)]
        growth_limit: f64,
    },
    /// Temporal convergence on eigenmode data.
    Tauconv {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.25")]
        thetas: Vec<f64>,
        /// Step sizes (ms).
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        periods: f64,
        #[arg(long, default_value_t = 1e-10)]
        eig_tol: f64,
    },
    /// Schwarz-PCG iteration counts across coarse grids.
    Ddstudy {
        #[command(flatten)]
        net: NetArgs,
        /// Coarse grids, e.g. 2x2x1,4x4x1,8x8x1.
        #[arg(long, value_delimiter = ',', default_value = "2x2x1,4x4x1,8x8x1")]
        grids: Vec<String>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        /// Study the implicit step operator M + τ²θA instead of A.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Extreme eigenvalues and step-size bounds.
    Eig {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Continuity constant for the conservative bound.
        #[arg(long)]
        a_max: Option<f64>,
    },
}

#[derive(Args)]
struct NetArgs {
    #[arg(long)]
    network: PathBuf,
    /// Boundary conditions, inline or `@file`.
    #[arg(long, default_value = "")]
    bc: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Direct,
    Schwarz,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "direct")]
    solver: SolverKind,
    /// Coarse cells per axis.
    #[arg(long, value_delimiter = ',', default_value = "4,4,1")]
    coarse: Vec<usize>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

#[derive(Args)]
struct TimeArgs {
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    /// Step size (ms).
    #[arg(long, default_value_t = 1e-3)]
    tau: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    ExpandedMetal,
    Fibers,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    out: PathBuf,
    /// Refinement level applied after generation.
    #[arg(long, default_value_t = 0)]
    refine: u32,
    #[arg(long, default_value_t = 4)]
    nx: usize,
    #[arg(long, default_value_t = 8)]
    ny: usize,
    #[arg(long, default_value_t = 80.0)]
    diamond_w: f64,
    #[arg(long, default_value_t = 40.0)]
    diamond_h: f64,
    #[arg(long, default_value_t = 6.0)]
    strand_w: f64,
    #[arg(long, default_value_t = 3.0)]
    strand_t: f64,
    /// Young's modulus (MPa).
    #[arg(long, default_value_t = 210_000.0)]
    e_mpa: f64,
    #[arg(long, default_value_t = 0.3)]
    nu: f64,
    /// Density (kg/mm³).
    #[arg(long, default_value_t = 7.85e-6)]
    rho: f64,
    #[arg(long, default_value_t = 1000)]
    fibers: usize,
    /// Fiber length (mm); with --length-max, the lower end of a uniform range.
    #[arg(long, default_value_t = 0.4)]
    length: f64,
    #[arg(long)]
    length_max: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,1,0")]
    r#box: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn load(args: &NetArgs) -> anyhow::Result<(Network, BcSpec)> {
    let net = io::read_network(&args.network).with_context(|| format!("reading {}", args.network.display()))?;
    let text = match args.bc.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => args.bc.clone(),
    };
    Ok((net, text.parse()?))
}

fn require_dirichlet(net: &Network) -> anyhow::Result<()> {
    if net.has_dirichlet() {
        Ok(())
    } else {
        Err(Error::EmptyDirichletSet.into())
    }
}

fn solver_spec(a: &SolverArgs) -> anyhow::Result<SolverSpec> {
    Ok(match a.solver {
        SolverKind::Direct => SolverSpec::Direct,
        SolverKind::Schwarz => SolverSpec::Schwarz {
            cells: cells(&a.coarse)?,
            tol: a.tol,
            max_iter: a.max_iter,
        },
    })
}

fn cells(v: &[usize]) -> anyhow::Result<[usize; 3]> {
    match v {
        [a, b, c] if *a > 0 && *b > 0 && *c > 0 => Ok([*a, *b, *c]),
        _ => Err(Error::InvalidArgument(format!("coarse grid needs three positive sizes, got {v:?}")).into()),
    }
}

fn parse_grid(s: &str) -> anyhow::Result<[usize; 3]> {
    let v: Vec<usize> = s
        .split('x')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("bad grid '{s}'")))?;
    cells(&v)
}

fn faces_json(faces: &[Face]) -> Vec<String> {
    faces.iter().map(ToString::to_string).collect()
}

struct Out<'a> {
    dir: &'a Path,
    report: RunReport,
}

impl Out<'_> {
    fn write(&mut self, name: &str, text: String) -> anyhow::Result<()> {
        fs::write(self.dir.join(name), text).with_context(|| format!("writing {name}"))?;
        self.report.outputs.push(name.to_string());
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let started = Instant::now();
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let mut out = Out {
        dir: &cli.out_dir,
        report: RunReport::new("", json!({})),
    };
    let mut code = 0;
    match cli.command {
        Command::Generate(g) => {
            let mut net = match g.kind {
                Kind::ExpandedMetal => generate_expanded_metal(&ExpandedMetal {
                    n_x: g.nx,
                    n_y: g.ny,
                    diamond_w: g.diamond_w,
                    diamond_h: g.diamond_h,
                    strand_w: g.strand_w,
                    strand_t: g.strand_t,
                    material: Material::from_si(g.e_mpa, g.nu, g.rho)?,
                })?,
                Kind::Fibers => {
                    let [lx, ly, lz] = match g.r#box.as_slice() {
                        [a, b, c] => [*a, *b, *c],
                        [a, b] => [*a, *b, 0.0],
                        _ => bail!(Error::InvalidArgument("--box needs lx,ly[,lz]".into())),
                    };
                    let length = match g.length_max {
                        Some(max) => LengthDist::Uniform { min: g.length, max },
                        None => LengthDist::Fixed(g.length),
                    };
                    let mut p = FiberParams::planar(g.fibers, length, lx, ly, g.seed);
                    p.box_size[2] = lz;
                    generate_random_fibers(&p)?
                }
            };
            if g.refine > 0 {
                net = refine(&net, g.refine)?;
            }
            io::write_network(&g.out, &net)?;
            out.report = RunReport::new("generate", json!({"out": g.out, "refine": g.refine, "seed": g.seed}));
            out.report.outputs.push(g.out.display().to_string());
            out.report.set("nodes", net.node_count());
            out.report.set("edges", net.edge_count());
            out.report.set("max_edge_length", net.max_edge_length());
        }
        Command::Refine { net: na, splits, out: path } => {
            let (net, bc) = load(&na)?;
            let fine = refine(&bc.apply(&net, true), splits)?;
            io::write_network(&path, &fine)?;
            out.report = RunReport::new("refine", json!({"network": na.network, "splits": splits}));
            out.report.outputs.push(path.display().to_string());
            out.report.set("nodes", fine.node_count());
            out.report.set("max_edge_length", fine.max_edge_length());
        }
        Command::Check { net: na, r0, stride } => {
            let (net, bc) = load(&na)?;
            let net = bc.apply(&net, true);
            let stride = stride.unwrap_or(r0 / 2.0);
            let d = check_assumptions(&net, r0, stride);
            out.report = RunReport::new("check", json!({"network": na.network, "r0": r0, "stride": stride}));
            let rows: Vec<Vec<String>> = d
                .homogeneity
                .iter()
                .map(|(r, s)| vec![fmt_f64(*r), opt(*s)])
                .collect();
            out.write("homogeneity.csv", table_to_csv(&["radius", "sigma"], &rows))?;
            let rows: Vec<Vec<String>> = d
                .box_masses
                .iter()
                .map(|b| vec![fmt_f64(b.radius), fmt_f64(b.center[0]), fmt_f64(b.center[1]), fmt_f64(b.center[2]), fmt_f64(b.mass)])
                .collect();
            out.write("box_masses.csv", table_to_csv(&["radius", "x", "y", "z", "mass"], &rows))?;
            let mut rows: Vec<Vec<String>> = d
                .locality_violations
                .iter()
                .map(|e| vec!["locality".into(), "edge".into(), e.to_string()])
                .collect();
            rows.extend(
                d.boundary_density_violations
                    .iter()
                    .map(|n| vec!["boundary_density".into(), "node".into(), n.to_string()]),
            );
            out.write("violations.csv", table_to_csv(&["check", "kind", "index"], &rows))?;
            out.report.set("max_edge_length", d.max_edge_length);
            out.report.set("locality_ok", d.locality_ok);
            out.report.set("boundary_density_ok", d.boundary_density_ok);
            for (r, s) in &d.homogeneity {
                out.report.set(&format!("sigma_R{r}"), s.map_or(serde_json::Value::Null, |v| v.into()));
            }
            out.report.notes.push("homogeneity sampled on a stride grid of box centres".into());
        }
        Command::Static { net: na, solver } => {
            let (net, bc) = load(&na)?;
            let net = bc.apply(&net, true);
            require_dirichlet(&net)?;
            let faces = bc.dirichlet_faces(&net, true);
            let spec = solver_spec(&solver)?;
            let sys = assemble(&net);
            let res = experiments::solve_static(&net, &sys, &spec, &faces)?;
            out.report = RunReport::new(
                "static",
                json!({"network": na.network, "bc": na.bc, "solver": format!("{spec:?}"), "dirichlet_faces": faces_json(&faces)}),
            );
            out.write("state.csv", io::state_to_csv(&net, &res.state))?;
            out.write("state.vtk", io::state_to_vtk(&net, &res.state))?;
            let vn = v_norm(&net, &res.state);
            let ln = l2_norm(&net, &res.state);
            out.write(
                "norms.csv",
                table_to_csv(&["n_free", "v_norm", "l2_norm"], &[vec![sys.n_free().to_string(), fmt_f64(vn), fmt_f64(ln)]]),
            )?;
            out.report.set("n_free", sys.n_free());
            out.report.set("v_norm", vn);
            out.report.set("l2_norm", ln);
            if let Some(rep) = &res.report {
                out.write("solve.csv", io::solve_report_to_csv(rep))?;
                out.report.set("iterations", rep.iterations);
                out.report.set("final_relative_residual", rep.final_relative_residual);
            }
            out.report.counters = res.counters.map(Into::into);
        }
        Command::Hconv {
            net: na,
            solver,
            levels,
            reference,
        } => {
            let (net, bc) = load(&na)?;
            let net = bc.apply(&net, true);
            require_dirichlet(&net)?;
            let faces = bc.dirichlet_faces(&net, true);
            let spec = solver_spec(&solver)?;
            let res = experiments::hconv(&net, &levels, reference, &spec, &faces)?;
            out.report = RunReport::new(
                "hconv",
                json!({"network": na.network, "bc": na.bc, "levels": levels, "reference": reference, "solver": format!("{spec:?}")}),
            );
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.level.to_string(),
                        fmt_f64(r.h),
                        r.n_free.to_string(),
                        fmt_f64(r.v_err),
                        fmt_f64(r.l2_err),
                        opt(r.v_rate),
                        opt(r.l2_rate),
                    ]
                })
                .collect();
            out.write(
                "hconv.csv",
                table_to_csv(&["level", "h", "n_free", "v_err", "l2_err", "v_rate", "l2_rate"], &rows),
            )?;
            out.write(
                "hconv_slopes.csv",
                table_to_csv(
                    &["v_slope", "l2_slope", "reference_v_norm", "reference_l2_norm"],
                    &[vec![opt(res.v_slope), opt(res.l2_slope), fmt_f64(res.reference_v_norm), fmt_f64(res.reference_l2_norm)]],
                ),
            )?;
            out.report.set("v_slope", res.v_slope);
            out.report.set("l2_slope", res.l2_slope);
        }
        Command::Wave {
            net: na,
            solver,
            time,
            tau_factor,
            probes,
            growth_limit,
        } => {
            let (net, bc) = load(&na)?;
            let static_net = bc.apply(&net, true);
            let wave_net = bc.apply(&net, false);
            require_dirichlet(&static_net)?;
            require_dirichlet(&wave_net)?;
            let spec = solver_spec(&solver)?;
            let x0 = experiments::released_initial_state(&static_net, &wave_net, &spec, &bc.dirichlet_faces(&net, true))?;
            let sys = assemble(&wave_net);
            let tau = match tau_factor {
                Some(f) => f * cfl_estimate(&wave_net, &sys, 0.0, CflMode::Sharp { tol: 1e-10 })?.tau,
                None => time.tau,
            };
            let faces = bc.dirichlet_faces(&net, false);
            let mut config = ThetaConfig::new(time.theta, tau, time.steps);
            config.solver = experiments::step_solver(&wave_net, &sys, &spec, &faces)?;
            let options = RunOptions {
                probes: probes.clone(),
                growth_limit: Some(growth_limit),
            };
            out.report = RunReport::new(
                "wave",
                json!({"network": na.network, "bc": na.bc, "theta": time.theta, "tau": tau, "steps": time.steps,
                       "probes": probes, "growth_limit": growth_limit, "solver": format!("{spec:?}")}),
            );
            out.write("initial_state.csv", io::state_to_csv(&wave_net, &x0))?;
            let mut cache = SchwarzCache::new();
            match experiments::wave(&wave_net, &x0, &config, &options, &mut cache) {
                Ok((_, run)) => {
                    out.write("energy.csv", io::energy_to_csv(&run.energy))?;
                    for s in &run.probes {
                        let n = (s.time.unwrap_or(0.0) / tau).round() as usize;
                        out.write(&format!("probe_{n}.csv"), io::state_to_csv(&wave_net, s))?;
                    }
                    out.report.set("steps_taken", run.steps_taken);
                    if let (Some(first), Some(last)) = (run.energy.first(), run.energy.last()) {
                        out.report.set("energy_first", first.total);
                        out.report.set("energy_last", last.total);
                        out.report.set("energy_drift", ((last.total - first.total) / first.total).abs());
                    }
                    if !run.solve_iterations.is_empty() {
                        let iters: Vec<Vec<String>> = run
                            .solve_iterations
                            .iter()
                            .enumerate()
                            .map(|(k, i)| vec![k.to_string(), i.to_string()])
                            .collect();
                        out.write("iterations.csv", table_to_csv(&["solve", "iterations"], &iters))?;
                    }
                    out.report.counters = Some(run.counters.into());
                    if let Some(StopReason::EnergyGrowth { step, ratio }) = run.stopped {
                        out.report.set("unstable_at_step", step);
                        out.report.set("energy_ratio", ratio);
                        out.report.notes.push(format!("unstable at step {step}"));
                        code = 4;
                    }
                }
                Err(Error::NonfiniteState { step }) => {
                    out.report.set("unstable_at_step", step);
                    out.report.notes.push(format!("unstable at step {step}: non-finite state"));
                    code = 4;
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Tauconv {
            net: na,
            thetas,
            taus,
            periods,
            eig_tol,
        } => {
            let (net, bc) = load(&na)?;
            let net = bc.apply(&net, false);
            require_dirichlet(&net)?;
            let res = experiments::tauconv(&net, &thetas, &taus, periods, eig_tol)?;
            out.report = RunReport::new(
                "tauconv",
                json!({"network": na.network, "bc": na.bc, "thetas": thetas, "taus": taus, "periods": periods}),
            );
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.theta),
                        fmt_f64(r.tau),
                        r.steps.to_string(),
                        fmt_f64(r.err_l2),
                        fmt_f64(r.err_v),
                        fmt_f64(r.vel_err_l2),
                        fmt_f64(r.vel_err_v),
                    ]
                })
                .collect();
            out.write(
                "tauconv.csv",
                table_to_csv(&["theta", "tau", "steps", "err_l2", "err_v", "vel_err_l2", "vel_err_v"], &rows),
            )?;
            let rows: Vec<Vec<String>> = res
                .slopes
                .iter()
                .map(|s| vec![fmt_f64(s.theta), opt(s.err_l2), opt(s.err_v), opt(s.vel_err_l2), opt(s.vel_err_v)])
                .collect();
            out.write(
                "tauconv_slopes.csv",
                table_to_csv(&["theta", "err_l2", "err_v", "vel_err_l2", "vel_err_v"], &rows),
            )?;
            out.write(
                "eigenmode.csv",
                table_to_csv(
                    &["lambda1", "residual", "period", "final_time"],
                    &[vec![fmt_f64(res.lambda1), fmt_f64(res.eigen_residual), fmt_f64(res.period), fmt_f64(res.final_time)]],
                ),
            )?;
            out.report.set("lambda1", res.lambda1);
            out.report.set("period", res.period);
        }
        Command::Ddstudy {
            net: na,
            grids,
            tol,
            max_iter,
            tau,
            theta,
            seed,
        } => {
            let (net, bc) = load(&na)?;
            let net = bc.apply(&net, false);
            require_dirichlet(&net)?;
            let faces = bc.dirichlet_faces(&net, false);
            let grids: Vec<[usize; 3]> = grids.iter().map(|g| parse_grid(g)).collect::<anyhow::Result<_>>()?;
            let study = experiments::ddstudy(&net, &faces, &grids, tau.map(|t| (theta, t)), tol, max_iter, seed)?;
            out.report = RunReport::new(
                "ddstudy",
                json!({"network": na.network, "bc": na.bc, "grids": grids, "tol": tol, "tau": tau, "theta": theta,
                       "seed": seed, "dirichlet_faces": faces_json(&faces)}),
            );
            out.report
                .notes
                .push("initial guess: zero on free dofs (Dirichlet data enter through the lift)".into());
            let mut rows = Vec::new();
            for (row, rep) in study.rows.iter().zip(&study.reports) {
                let tag = format!("{}x{}x{}", row.cells[0], row.cells[1], row.cells[2]);
                rows.push(vec![
                    tag.clone(),
                    row.n_coarse.to_string(),
                    row.n_subdomains.to_string(),
                    row.max_subdomain_dofs.to_string(),
                    row.iterations.to_string(),
                    row.converged.to_string(),
                    fmt_f64(row.final_relative_residual),
                    fmt_f64(row.final_energy_error),
                    opt(row.mean_factor(3)),
                    opt(row.factor_spread(3)),
                    fmt_f64(row.setup_seconds),
                    fmt_f64(row.solve_seconds),
                ]);
                out.write(&format!("solve_{tag}.csv"), io::solve_report_to_csv(rep))?;
            }
            out.write(
                "ddstudy.csv",
                table_to_csv(
                    &[
                        "grid",
                        "n_coarse",
                        "n_subdomains",
                        "max_subdomain_dofs",
                        "iterations",
                        "converged",
                        "final_relres",
                        "final_energy_err",
                        "mean_factor",
                        "factor_spread",
                        "setup_s",
                        "solve_s",
                    ],
                    &rows,
                ),
            )?;
            out.report.set("n_free", study.rhs.len());
            out.report
                .set("iterations", study.rows.iter().map(|r| r.iterations).collect::<Vec<_>>());
        }
        Command::Eig { net: na, theta, tol, a_max } => {
            let (net, bc) = load(&na)?;
            let net = bc.apply(&net, false);
            require_dirichlet(&net)?;
            let e = experiments::eig(&net, theta, tol, a_max)?;
            out.report = RunReport::new("eig", json!({"network": na.network, "bc": na.bc, "theta": theta, "tol": tol}));
            out.write(
                "eig.csv",
                table_to_csv(
                    &["lambda1", "lambda_max", "tau_sharp", "tau_conservative", "gap", "a_max", "m_min", "h_min"],
                    &[vec![
                        fmt_f64(e.lambda1),
                        fmt_f64(e.lambda_max),
                        fmt_f64(e.tau_sharp),
                        fmt_f64(e.tau_conservative),
                        fmt_f64(e.tau_sharp / e.tau_conservative),
                        fmt_f64(e.a_max),
                        fmt_f64(e.m_min),
                        fmt_f64(e.h_min),
                    ]],
                ),
            )?;
            out.report.set("lambda1", e.lambda1);
            out.report.set("lambda_max", e.lambda_max);
            out.report.set("tau_sharp", e.tau_sharp);
            out.report.set("tau_conservative", e.tau_conservative);
        }
    }
    out.report.wall_seconds = started.elapsed().as_secs_f64();
    out.report.write(out.dir)?;
    Ok(code)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NotPositiveDefinite { .. } | Error::BreakdownIndefinite { .. } | Error::NoConvergence { .. }) => 3,
        Some(Error::NonfiniteState { .. }) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if cli.deterministic {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(1).build_global() {
            eprintln!("error: {}", anyhow!(e));
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
