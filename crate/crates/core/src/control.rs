//! Distributed optimal control of the discrete heat equation.
//!
//! The discrete problem is optimized directly: controls `F_n` live on the
//! collocation points, the state follows implicit Euler with `F_{n+1}` on the
//! right, and the cost uses trapezoid weights in time and the mass matrix in
//! space. Gradients come from the exact discrete adjoint.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::FemSystem;
use crate::integrate::{FullStepper, RbmSolver, Trajectory, TimeGrid, Workspace};
use crate::rbm::{sample_schedule, BatchSchedule, Decomposition};

pub type Control = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
pub struct ControlProblem<'a> {
    pub system: &'a FemSystem,
    pub grid: TimeGrid,
    pub y0: Vec<f64>,
    /// Desired state at each collocation point.
    pub target: Vec<Vec<f64>>,
}

impl<'a> ControlProblem<'a> {
    pub fn new(system: &'a FemSystem, grid: TimeGrid, y0: Vec<f64>, target: Vec<Vec<f64>>) -> Result<Self> {
        let n = system.n_dof();
        if grid.stride != 1 || (grid.step_size(grid.steps - 1) - grid.dt).abs() > 1e-12 * grid.dt {
            return Err(Error::InvalidArgument("control needs a uniform grid with every point recorded".into()));
        }
        if y0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y0.len() });
        }
        if target.len() != grid.steps + 1 {
            return Err(Error::DimensionMismatch { expected: grid.steps + 1, got: target.len() });
        }
        if let Some(bad) = target.iter().find(|y| y.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        Ok(Self { system, grid, y0, target })
    }

    /// Same target vector at every time.
    pub fn constant_target(system: &'a FemSystem, grid: TimeGrid, y0: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        let t = vec![target; grid.steps + 1];
        Self::new(system, grid, y0, t)
    }

    pub fn points(&self) -> usize {
        self.grid.steps + 1
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let z = self.points();
        (0..z).map(|n| if n == 0 || n == z - 1 { 0.5 * self.grid.dt } else { self.grid.dt }).collect()
    }

    pub fn zero_control(&self) -> Control {
        vec![vec![0.0; self.system.n_dof()]; self.points()]
    }

    /// `sum_n w_n u_n^T E v_n`
    pub fn inner(&self, u: &Control, v: &Control) -> f64 {
        let e = self.system.mass();
        self.weights().iter().zip(u.iter().zip(v)).map(|(w, (a, b))| w * e.inner(a, b)).sum()
    }

    pub fn norm(&self, u: &Control) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }
}

/// Solves `(E + dt A_n) x = b` for the step from `t_n` to `t_{n+1}`.
pub trait StepOperator: Sync {
    fn solve(&self, n: usize, b: &[f64], ws: &mut Workspace) -> Vec<f64>;
}

/// The deterministic operator with the full stiffness.
pub struct FullOperator(FullStepper);

impl FullOperator {
    pub fn new(problem: &ControlProblem<'_>) -> Result<Self> {
        Ok(Self(FullStepper::new(problem.system, problem.grid.dt)?))
    }
}

impl StepOperator for FullOperator {
    fn solve(&self, _n: usize, b: &[f64], _ws: &mut Workspace) -> Vec<f64> {
        let mut x = b.to_vec();
        let mut work = Vec::new();
        self.0.solve_in_place(&mut x, &mut work);
        x
    }
}

/// The random batch operator of one realization.
pub struct BatchOperator<'a> {
    solver: &'a RbmSolver,
    schedule: BatchSchedule,
    per_batch: usize,
}

impl<'a> BatchOperator<'a> {
    pub fn new(solver: &'a RbmSolver, grid: &TimeGrid, schedule: BatchSchedule) -> Result<Self> {
        let per_batch = grid.steps_per_batch(schedule.delta)?;
        Ok(Self { solver, schedule, per_batch })
    }
}

impl StepOperator for BatchOperator<'_> {
    fn solve(&self, n: usize, b: &[f64], ws: &mut Workspace) -> Vec<f64> {
        let k = (n / self.per_batch).min(self.schedule.omega.len() - 1);
        self.solver.blocks()[self.schedule.omega[k]].solve(b, ws)
    }
}

/// States `y_0..y_{Z-1}` driven by `control`.
pub fn forward(problem: &ControlProblem<'_>, op: &dyn StepOperator, control: &Control) -> Result<Vec<Vec<f64>>> {
    if control.len() != problem.points() {
        return Err(Error::DimensionMismatch { expected: problem.points(), got: control.len() });
    }
    let dt = problem.grid.dt;
    let mut ws = Workspace::default();
    let mut states = vec![problem.y0.clone()];
    for n in 0..problem.grid.steps {
        let mut b = problem.system.mass().mul_vec(&states[n]);
        b.iter_mut().zip(&control[n + 1]).for_each(|(x, f)| *x += dt * f);
        states.push(op.solve(n, &b, &mut ws));
    }
    Ok(states)
}

fn objective_from_states(problem: &ControlProblem<'_>, control: &Control, states: &[Vec<f64>]) -> f64 {
    let e = problem.system.mass();
    let mut j = 0.0;
    for (n, w) in problem.weights().iter().enumerate() {
        let d: Vec<f64> = states[n].iter().zip(&problem.target[n]).map(|(a, b)| a - b).collect();
        j += w * (e.inner(&control[n], &control[n]) + e.inner(&d, &d));
    }
    0.5 * j
}

pub fn evaluate_functional(problem: &ControlProblem<'_>, op: &dyn StepOperator, control: &Control) -> Result<f64> {
    let states = forward(problem, op, control)?;
    Ok(objective_from_states(problem, control, &states))
}

/// Euclidean gradient of the discrete functional with respect to every entry of `F`.
pub fn gradient(problem: &ControlProblem<'_>, op: &dyn StepOperator, control: &Control) -> Result<Control> {
    let states = forward(problem, op, control)?;
    let (q, _) = adjoint(problem, op, &states);
    let e = problem.system.mass();
    let w = problem.weights();
    let dt = problem.grid.dt;
    Ok((0..problem.points())
        .map(|n| {
            let mut g = e.mul_vec(&control[n]);
            g.iter_mut().for_each(|x| *x *= w[n]);
            if n > 0 {
                g.iter_mut().zip(&q[n]).for_each(|(x, qn)| *x += dt * qn);
            }
            g
        })
        .collect())
}

/// Adjoint variables `q_1..q_{Z-1}` (index 0 unused).
fn adjoint(problem: &ControlProblem<'_>, op: &dyn StepOperator, states: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let e = problem.system.mass();
    let w = problem.weights();
    let z = problem.points();
    let n_dof = problem.system.n_dof();
    let mut ws = Workspace::default();
    let mut q = vec![vec![0.0; n_dof]; z];
    let mut j_state = 0.0;
    for n in (1..z).rev() {
        let d: Vec<f64> = states[n].iter().zip(&problem.target[n]).map(|(a, b)| a - b).collect();
        let mut rhs = e.mul_vec(&d);
        j_state += w[n] * crate::sparse::dot(&rhs, &d);
        rhs.iter_mut().for_each(|x| *x *= w[n]);
        if n + 1 < z {
            let eq = e.mul_vec(&q[n + 1]);
            rhs.iter_mut().zip(&eq).for_each(|(x, y)| *x += y);
        }
        q[n] = op.solve(n - 1, &rhs, &mut ws);
    }
    (q, j_state)
}

/// Riesz representative of the gradient in the weighted `E` inner product:
/// `F_n + (dt / w_n) E^{-1} q_n`.
fn riesz_gradient(problem: &ControlProblem<'_>, control: &Control, q: &[Vec<f64>]) -> Control {
    let w = problem.weights();
    let dt = problem.grid.dt;
    let factor = problem.system.mass_factor();
    (0..problem.points())
        .map(|n| {
            let mut g = control[n].clone();
            if n > 0 {
                let eq = factor.solve(&q[n]);
                g.iter_mut().zip(&eq).for_each(|(x, y)| *x += dt / w[n] * y);
            }
            g
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    /// Stop once `||F^{k+1} - F^k||` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, armijo: 1e-4, max_halvings: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    pub control: Control,
    pub states: Vec<Vec<f64>>,
    pub objective: f64,
    /// Norm of the Riesz gradient at the returned control.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<IterationLog>,
}

impl ControlSolution {
    pub fn state_trajectory(&self, grid: &TimeGrid) -> Trajectory {
        Trajectory { times: (0..=grid.steps).map(|n| grid.time(n)).collect(), states: self.states.clone() }
    }

    pub fn control_trajectory(&self, grid: &TimeGrid) -> Trajectory {
        Trajectory { times: (0..=grid.steps).map(|n| grid.time(n)).collect(), states: self.control.clone() }
    }

    pub fn write_log_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,J,grad_norm,step")?;
        for l in &self.log {
            writeln!(w, "{},{:.17e},{:.17e},{:.17e}", l.iter, l.objective, l.grad_norm, l.step)?;
        }
        Ok(())
    }
}

fn axpy(a: &Control, alpha: f64, d: &Control) -> Control {
    a.iter().zip(d).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + alpha * v).collect()).collect()
}

/// Gradient descent with Armijo backtracking and Barzilai-Borwein step guesses.
pub fn descend(problem: &ControlProblem<'_>, op: &dyn StepOperator, initial: Control, opts: &ControlOptions) -> Result<ControlSolution> {
    let eval = |f: &Control| -> Result<(Vec<Vec<f64>>, f64, Control)> {
        let states = forward(problem, op, f)?;
        let j = objective_from_states(problem, f, &states);
        let (q, _) = adjoint(problem, op, &states);
        let g = riesz_gradient(problem, f, &q);
        Ok((states, j, g))
    };
    let mut f = initial;
    let (mut states, mut j, mut g) = eval(&f)?;
    let mut gn = problem.norm(&g);
    let mut log = vec![IterationLog { iter: 0, objective: j, grad_norm: gn, step: 0.0 }];
    if !j.is_finite() {
        return Err(Error::InvalidArgument("objective is not finite at the initial control".into()));
    }
    if gn == 0.0 {
        return Ok(ControlSolution { control: f, states, objective: j, grad_norm: gn, iterations: 0, converged: true, log });
    }
    let mut alpha = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let mut a = alpha;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = axpy(&f, -a, &g);
            let (cs, cj, cg) = eval(&cand)?;
            let s = axpy(&cand, -1.0, &f);
            // J is quadratic in F, so J(F + s) - J(F) = <g(F) + g(F + s), s> / 2
            // exactly; this avoids cancelling two nearly equal objective values.
            let change = 0.5 * (problem.inner(&g, &s) + problem.inner(&cg, &s));
            if change <= -opts.armijo * a * gn * gn {
                accepted = Some((cand, cs, cj, cg));
                break;
            }
            a *= 0.5;
        }
        let Some((next, ns, nj, ng)) = accepted else {
            // no decrease is possible at working precision
            break;
        };
        let s = axpy(&next, -1.0, &f);
        let y = axpy(&ng, -1.0, &g);
        let step = problem.norm(&s);
        let sy = problem.inner(&s, &y);
        alpha = if sy > 0.0 { problem.inner(&s, &s) / sy } else { 1.0 };
        f = next;
        states = ns;
        j = nj;
        g = ng;
        gn = problem.norm(&g);
        log.push(IterationLog { iter: it, objective: j, grad_norm: gn, step });
        if step < opts.tol || gn == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(ControlSolution { control: f, states, objective: j, grad_norm: gn, iterations, converged, log })
}

pub fn solve_deterministic(problem: &ControlProblem<'_>, opts: &ControlOptions, initial: Option<Control>) -> Result<ControlSolution> {
    let op = FullOperator::new(problem)?;
    descend(problem, &op, initial.unwrap_or_else(|| problem.zero_control()), opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomControlResult {
    pub realizations: Vec<ControlSolution>,
    pub mean_control: Control,
    pub mean_state: Vec<Vec<f64>>,
    pub all_converged: bool,
}

/// Optimal controls of independent random batch systems. Each realization
/// keeps one schedule for all of its iterations; the control itself is not split.
pub fn solve_random(
    problem: &ControlProblem<'_>,
    dec: &Decomposition,
    delta: f64,
    realizations: usize,
    seed: u64,
    opts: &ControlOptions,
    jobs: Option<usize>,
) -> Result<RandomControlResult> {
    if realizations == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    let solver = RbmSolver::new(problem.system, dec, problem.grid.dt)?;
    let run = |r: usize| -> Result<ControlSolution> {
        let schedule = sample_schedule(dec, delta, problem.grid.horizon, seed, r as u64)?;
        let op = BatchOperator::new(&solver, &problem.grid, schedule)?;
        descend(problem, &op, problem.zero_control(), opts)
    };
    let all = || (0..realizations).into_par_iter().map(run).collect::<Vec<_>>();
    let results = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(all),
        None => all(),
    };
    let sols = results.into_iter().collect::<Result<Vec<_>>>()?;
    let k = sols.len() as f64;
    let mean = |pick: &dyn Fn(&ControlSolution) -> &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut acc = pick(&sols[0]).iter().map(|v| vec![0.0; v.len()]).collect::<Vec<_>>();
        for s in &sols {
            for (a, v) in acc.iter_mut().zip(pick(s)) {
                a.iter_mut().zip(v).for_each(|(x, y)| *x += y);
            }
        }
        acc.iter_mut().for_each(|a| a.iter_mut().for_each(|x| *x /= k));
        acc
    };
    let mean_control = mean(&|s| &s.control);
    let mean_state = mean(&|s| &s.states);
    let all_converged = sols.iter().all(|s| s.converged);
    Ok(RandomControlResult { realizations: sols, mean_control, mean_state, all_converged })
}
