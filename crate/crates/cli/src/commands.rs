//! Subcommand drivers. Each writes its artifacts plus `config.resolved.toml`
//! into the output directory.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use graph_rbm::control::{self, ControlOptions, ControlProblem};
use graph_rbm::decomposition::{paper_nonoverlap_3, paper_overlap_3, Style};
use graph_rbm::integrate::{midpoint_probes, Forcing, Trajectory};
use graph_rbm::rbm::{bound_control, bound_trajectory, ControlBoundInputs, TrajectoryBoundInputs};
use graph_rbm::verification::{run_convergence_sweep, ManufacturedCase, SweepConfig, PAPER_COEFFICIENTS};
use graph_rbm::{
    paper_graph, run_ensemble, solve_full, Decomposition, EdgeField, EdgeId, EnsembleOptions, FemSystem, GroupPlan,
    Mesh1D, MetricGraph, TimeGrid,
};

use crate::config::{CommandKind, Initial, Resolved, NONOVERLAP, OVERLAP, PAPER_GRAPH, TRIVIAL};
use crate::error::{CliError, CliResult};

pub const DEGENERATE_NOTE: &str = "degenerate law; equals full solve";
const TIMING_NOTE: &str = "# wall time of the solver call only, excluding assembly and i/o";

/// Assembled problem shared by the commands.
struct Setup {
    system: FemSystem,
    case: ManufacturedCase,
    /// Whether the manufactured solution is an exact solution on this graph.
    exact: bool,
}

impl Setup {
    fn new(r: &Resolved) -> CliResult<Self> {
        let graph = if r.graph == PAPER_GRAPH {
            paper_graph(r.length)
        } else {
            MetricGraph::from_toml_file(&r.graph)
                .map_err(|e| CliError::Config(format!("graph file {}: {e}", r.graph)))?
        };
        let edges = graph.edges().len();
        let coefficients = match &r.coefficients {
            Some(c) => c.clone(),
            None if r.graph == PAPER_GRAPH => PAPER_COEFFICIENTS.to_vec(),
            None => vec![1.0; edges],
        };
        if coefficients.len() != edges {
            return Err(CliError::Config(format!("{} coefficients given for {edges} edges", coefficients.len())));
        }
        let case = ManufacturedCase { coefficients, horizon: r.horizon, length: r.length };
        let exact = case.check_compatibility(&graph)?.is_compatible(1e-10);
        let mesh = Mesh1D::for_length(r.length, r.n);
        let system = FemSystem::assemble(graph, mesh)?;
        if system.n_dof() > r.dof_cap {
            return Err(CliError::Config(format!("{} dofs exceed dof_cap = {}", system.n_dof(), r.dof_cap)));
        }
        Ok(Self { system, case, exact })
    }

    fn initial(&self, r: &Resolved) -> Vec<f64> {
        match r.initial {
            Initial::Manufactured => self.system.project_initial(&self.case.initial()),
            Initial::Zero => vec![0.0; self.system.n_dof()],
        }
    }

    fn decomposition(&self, r: &Resolved) -> CliResult<Decomposition> {
        let g = self.system.graph();
        let dec = match r.decomposition.as_str() {
            OVERLAP => paper_overlap_3(g)?.build(&self.system)?,
            NONOVERLAP => paper_nonoverlap_3(g)?.build(&self.system)?,
            TRIVIAL => Decomposition::trivial(self.system.stiffness().clone())?,
            path => GroupPlan::from_toml_file(g, path)
                .map_err(|e| CliError::Config(format!("plan file {path}: {e}")))?
                .build(&self.system)?,
        };
        Ok(dec)
    }

    fn endpoint_probes(&self) -> Vec<(EdgeId, f64)> {
        let g = self.system.graph();
        g.edge_ids().map(|e| (e, g.edge(e).length)).collect()
    }
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_probes(dir: &Path, name: &str, traj: &Trajectory, system: &FemSystem, probes: &[(EdgeId, f64)]) -> CliResult<()> {
    let mut w = create(dir, name)?;
    traj.write_probes_csv(system, probes, &mut w)?;
    w.flush()?;
    Ok(())
}

fn prepare(r: &Resolved) -> CliResult<()> {
    fs::create_dir_all(&r.out)?;
    write_text(&r.out, "config.resolved.toml", &r.to_toml())
}

fn write_timing(dir: &Path, entries: &[(&str, f64)]) -> CliResult<()> {
    let mut s = format!("{TIMING_NOTE}\n");
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v:.6}");
    }
    write_text(dir, "timing.txt", &s)
}

fn delta_of(r: &Resolved) -> f64 {
    r.delta.expect("batch commands resolve delta")
}

fn bound_inputs(setup: &Setup, dec: &Decomposition, r: &Resolved, y0: &[f64]) -> CliResult<TrajectoryBoundInputs> {
    let grid = TimeGrid::uniform(r.horizon, r.zeta)?;
    let forcing = setup.case.forcing(&setup.system);
    let n = setup.system.n_dof();
    let loads: Vec<Vec<f64>> = (0..=grid.steps)
        .map(|k| {
            let mut f = vec![0.0; n];
            forcing.load_into(grid.time(k), &mut f);
            f
        })
        .collect();
    Ok(TrajectoryBoundInputs::from_system(&setup.system, dec, r.horizon, delta_of(r), y0, &loads, grid.dt))
}

pub fn solve(r: &Resolved) -> CliResult<String> {
    let setup = Setup::new(r)?;
    prepare(r)?;
    let s = &setup.system;
    let grid = TimeGrid::uniform(r.horizon, r.zeta)?;
    let y0 = setup.initial(r);
    let forcing = setup.case.forcing(s);
    let start = Instant::now();
    let traj = solve_full(s, &forcing, &y0, &grid)?;
    let elapsed = start.elapsed().as_secs_f64();

    write_probes(&r.out, "probes.csv", &traj, s, &midpoint_probes(s))?;
    let mut report = format!("kind = linf_time_l2_space\nn_dof = {}\nh = {:.17e}\ndt = {:.17e}\n", s.n_dof(), s.mesh().h, grid.dt);
    let summary = if setup.exact && r.initial == Initial::Manufactured {
        let err = traj.max_l2_error(s, &setup.case.exact());
        let _ = writeln!(report, "error = {err:.17e}");
        format!("max L2 error {err:.4e}")
    } else {
        report.push_str("error = none\nnote = manufactured solution is not exact for this graph or initial data\n");
        "no exact solution for this setup".into()
    };
    write_text(&r.out, "error_report.txt", &report)?;
    write_timing(&r.out, &[("solve_full_s", elapsed)])?;
    Ok(format!("solve: {} dofs, {summary}", s.n_dof()))
}

pub fn rbm(r: &Resolved) -> CliResult<String> {
    let setup = Setup::new(r)?;
    let dec = setup.decomposition(r)?;
    prepare(r)?;
    let s = &setup.system;
    let grid = TimeGrid::uniform(r.horizon, r.zeta)?;
    let y0 = setup.initial(r);
    let forcing = setup.case.forcing(s);
    let exact = setup.case.exact();
    let use_exact = setup.exact && r.initial == Initial::Manufactured;
    let delta = delta_of(r);
    let opts = EnsembleOptions {
        realizations: r.realizations,
        seed: r.seed,
        delta,
        jobs: r.jobs,
        exact: use_exact.then_some(&exact as &dyn EdgeField),
    };
    let start = Instant::now();
    let ens = run_ensemble(s, &dec, &forcing, &y0, &grid, &opts)?;
    let elapsed = start.elapsed().as_secs_f64();

    write_probes(&r.out, "mean_probes.csv", &ens.mean, s, &midpoint_probes(s))?;
    let mut w = create(&r.out, "variance.csv")?;
    writeln!(w, "t,state_variance,error_mean,error_variance")?;
    for (k, t) in ens.mean.times.iter().enumerate() {
        let (m, v) = match &ens.errors {
            Some(e) => (format!("{:.17e}", e.mean[k]), format!("{:.17e}", e.variance[k])),
            None => (String::new(), String::new()),
        };
        writeln!(w, "{t},{:.17e},{m},{v}", ens.state_variance[k])?;
    }
    w.flush()?;

    let mut summary = format!(
        "n_dof = {}\ndelta = {delta:.17e}\ndt = {:.17e}\nrealizations = {}\nseed = {}\n",
        s.n_dof(),
        grid.dt,
        r.realizations,
        r.seed
    );
    if dec.is_degenerate() {
        let _ = writeln!(summary, "note = \"{DEGENERATE_NOTE}\"");
    }
    let mut line = format!("rbm: {} realizations", r.realizations);
    if let Some(e) = &ens.errors {
        let mut w = create(&r.out, "realization_errors.csv")?;
        writeln!(w, "realization,seed,error")?;
        for (k, err) in e.per_realization.iter().enumerate() {
            writeln!(w, "{k},{},{err:.17e}", r.seed)?;
        }
        w.flush()?;
        let _ = writeln!(summary, "mean_error = {:.17e}\nerror_of_mean = {:.17e}", e.expected_max, e.error_of_mean);
        let _ = write!(line, ", mean error {:.4e}", e.expected_max);
    } else {
        summary.push_str("mean_error = none\n");
    }
    write_text(&r.out, "summary.txt", &summary)?;
    write_text(&r.out, "decomposition.txt", &dec.summary())?;
    let bounds = bound_trajectory(&bound_inputs(&setup, &dec, r, &y0)?);
    write_text(&r.out, "bounds.txt", &bounds.to_key_values())?;
    write_timing(&r.out, &[("ensemble_s", elapsed), ("per_realization_s", elapsed / r.realizations as f64)])?;
    if dec.is_degenerate() {
        let _ = write!(line, " ({DEGENERATE_NOTE})");
    }
    Ok(line)
}

pub fn sweep(r: &Resolved) -> CliResult<String> {
    if r.graph != PAPER_GRAPH {
        return Err(CliError::Config("sweep runs on the built-in paper graph only".into()));
    }
    let style = match r.decomposition.as_str() {
        OVERLAP => Style::Overlapping,
        NONOVERLAP => Style::NonOverlapping,
        other => return Err(CliError::Config(format!("sweep needs a preset decomposition, got {other}"))),
    };
    let cfg = SweepConfig {
        meshes: r.meshes.clone(),
        epsilon: r.epsilon.unwrap_or(1e-4),
        realizations: r.realizations,
        seed: r.seed,
        zeta: r.zeta,
        horizon: r.horizon,
        length: r.length,
        style,
        jobs: r.jobs,
        dof_cap: r.dof_cap,
    };
    prepare(r)?;
    let table = run_convergence_sweep(&cfg)?;
    let mut w = create(&r.out, "sweep.csv")?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let errs: Vec<f64> = table.rows.iter().map(|row| row.err_rbm).collect();
    let inversions = errs.windows(2).filter(|p| p[1] > p[0]).count();
    let mut summary = String::new();
    match table.order {
        Some(p) => {
            let _ = writeln!(summary, "order = {p:.6}");
        }
        None => summary.push_str("order = none\n"),
    }
    let _ = writeln!(summary, "excluded_coarsest = {}", table.excluded_coarsest);
    let _ = writeln!(summary, "inversions = {inversions}");
    let _ = writeln!(summary, "monotone = {}", inversions <= 1);
    write_text(&r.out, "summary.txt", &summary)?;
    Ok(format!(
        "sweep: {} rows, order {}",
        table.rows.len(),
        table.order.map_or("none".into(), |p| format!("{p:.3}"))
    ))
}

pub fn control(r: &Resolved) -> CliResult<String> {
    let setup = Setup::new(r)?;
    let dec = setup.decomposition(r)?;
    prepare(r)?;
    let s = &setup.system;
    let grid = TimeGrid::uniform(r.horizon, r.zeta)?;
    let y0 = setup.initial(r);
    let target = vec![r.target; s.n_dof()];
    let problem = ControlProblem::constant_target(s, grid, y0, target)?;
    let opts = ControlOptions { tol: r.tol, max_iter: r.max_iter, ..ControlOptions::default() };
    let probes = setup.endpoint_probes();

    let start = Instant::now();
    let det = control::solve_deterministic(&problem, &opts, None)?;
    let det_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let rnd = control::solve_random(&problem, &dec, delta_of(r), r.realizations, r.seed, &opts, r.jobs)?;
    let rnd_s = start.elapsed().as_secs_f64();

    let mut w = create(&r.out, "convergence.csv")?;
    det.write_log_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&r.out, "convergence_rbm.csv")?;
    writeln!(w, "realization,iter,J,grad_norm,step")?;
    for (k, sol) in rnd.realizations.iter().enumerate() {
        for l in &sol.log {
            writeln!(w, "{k},{},{:.17e},{:.17e},{:.17e}", l.iter, l.objective, l.grad_norm, l.step)?;
        }
    }
    w.flush()?;
    write_probes(&r.out, "state_probes.csv", &det.state_trajectory(&grid), s, &probes)?;
    write_probes(&r.out, "control_probes.csv", &det.control_trajectory(&grid), s, &probes)?;
    let times: Vec<f64> = (0..=grid.steps).map(|k| grid.time(k)).collect();
    let mean_state = Trajectory { times: times.clone(), states: rnd.mean_state.clone() };
    let mean_control = Trajectory { times, states: rnd.mean_control.clone() };
    write_probes(&r.out, "rbm_state_probes.csv", &mean_state, s, &probes)?;
    write_probes(&r.out, "rbm_control_probes.csv", &mean_control, s, &probes)?;

    let diff: Vec<Vec<f64>> = rnd
        .mean_control
        .iter()
        .zip(&det.control)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let distance = problem.norm(&diff);
    let converged_rbm = rnd.realizations.iter().filter(|x| x.converged).count();
    let summary = format!(
        "objective = {:.17e}\ngrad_norm = {:.17e}\niterations = {}\nconverged = {}\nrealizations = {}\nconverged_realizations = {converged_rbm}\ndelta = {:.17e}\nmean_control_distance = {distance:.17e}\n",
        det.objective,
        det.grad_norm,
        det.iterations,
        det.converged,
        r.realizations,
        delta_of(r)
    );
    write_text(&r.out, "summary.txt", &summary)?;
    write_timing(&r.out, &[("deterministic_s", det_s), ("random_s", rnd_s)])?;

    if !det.converged || !rnd.all_converged {
        return Err(CliError::NotConverged(format!(
            "deterministic converged: {}, random converged: {converged_rbm}/{}",
            det.converged, r.realizations
        )));
    }
    Ok(format!("control: {} iterations, J = {:.6e}, mean control distance {distance:.3e}", det.iterations, det.objective))
}

pub fn report(r: &Resolved) -> CliResult<String> {
    let setup = Setup::new(r)?;
    let dec = setup.decomposition(r)?;
    prepare(r)?;
    let s = &setup.system;
    let y0 = setup.initial(r);
    write_text(&r.out, "decomposition.txt", &dec.summary())?;
    let traj = bound_inputs(&setup, &dec, r, &y0)?;
    let mass = s.mass_extremes();
    let grid = TimeGrid::uniform(r.horizon, r.zeta)?;
    let target = vec![r.target; s.n_dof()];
    let weights: f64 = ControlProblem::constant_target(s, grid, vec![0.0; s.n_dof()], target.clone())?.weights().iter().sum();
    let norm_yd = (weights * s.mass().inner(&target, &target)).sqrt();
    let ctrl = bound_control(&ControlBoundInputs { trajectory: traj, norm_d: mass.max, lambda_min_d: mass.min, norm_yd });
    let text = format!("{}\n{}", bound_trajectory(&traj).to_key_values(), ctrl.to_key_values());
    write_text(&r.out, "bounds.txt", &text)?;
    let mut line = format!("report: {} parts, variance {:.4e}", dec.parts().len(), traj.variance);
    if dec.is_degenerate() {
        let _ = write!(line, " ({DEGENERATE_NOTE})");
    }
    Ok(line)
}

pub fn run(r: &Resolved) -> CliResult<String> {
    match r.command {
        CommandKind::Solve => solve(r),
        CommandKind::Rbm => rbm(r),
        CommandKind::Sweep => sweep(r),
        CommandKind::Control => control(r),
        CommandKind::Report => report(r),
    }
}
