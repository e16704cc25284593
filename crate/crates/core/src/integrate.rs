//! Implicit Euler for `E y' + R y = F`, with either the full stiffness or a
//! random batch stiffness solved on its active dofs only.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{EdgeField, FemSystem};
use crate::graph::EdgeId;
use crate::rbm::{sample_schedule, BatchSchedule, Decomposition};
use crate::sparse::{CsrMatrix, LdlFactor};

/// Time grid `t_n = n dt` for `n < steps` and `t_steps = T`. States are
/// recorded every `stride` steps and at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub stride: usize,
}

impl TimeGrid {
    /// `zeta` equispaced collocation points on `[0, T]`, every one recorded.
    pub fn uniform(horizon: f64, zeta: usize) -> Result<Self> {
        if zeta < 2 || !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("time grid needs zeta >= 2 and T > 0 (zeta = {zeta}, T = {horizon})")));
        }
        Ok(Self { horizon, dt: horizon / (zeta - 1) as f64, steps: zeta - 1, stride: 1 })
    }

    /// Steps of size `dt`; the last one is shortened to land on `T`.
    pub fn with_step(horizon: f64, dt: f64, stride: usize) -> Result<Self> {
        if !(dt > 0.0 && horizon > 0.0) || stride == 0 {
            return Err(Error::InvalidArgument(format!("bad time grid (T = {horizon}, dt = {dt}, stride = {stride})")));
        }
        let steps = crate::rbm::subinterval_count(horizon, dt);
        Ok(Self { horizon, dt, steps, stride })
    }

    pub fn time(&self, n: usize) -> f64 {
        if n >= self.steps {
            self.horizon
        } else {
            n as f64 * self.dt
        }
    }

    pub fn step_size(&self, n: usize) -> f64 {
        self.time(n + 1) - self.time(n)
    }

    pub fn is_recorded(&self, n: usize) -> bool {
        n.is_multiple_of(self.stride) || n == self.steps
    }

    /// `delta / dt` when `delta` is an integer multiple of the step.
    pub fn steps_per_batch(&self, delta: f64) -> Result<usize> {
        let s = (delta / self.dt).round();
        if s < 1.0 || (s * self.dt - delta).abs() > 1e-9 * delta {
            return Err(Error::MisalignedDelta { delta, dt: self.dt });
        }
        Ok(s as usize)
    }

    fn last_step_is_short(&self) -> bool {
        (self.step_size(self.steps - 1) - self.dt).abs() > 1e-12 * self.dt
    }
}

/// Assembled right-hand side `F(t)`.
pub trait Forcing: Sync {
    fn load_into(&self, t: f64, out: &mut [f64]);
}

/// Quadrature of a source field at each time.
pub struct FieldForcing<'a> {
    pub system: &'a FemSystem,
    pub field: &'a dyn EdgeField,
}

impl Forcing for FieldForcing<'_> {
    fn load_into(&self, t: f64, out: &mut [f64]) {
        self.system.assemble_load_into(self.field, t, out);
    }
}

/// `F(t) = g(t) F_0` for a fixed vector `F_0`.
pub struct SeparableForcing<G: Fn(f64) -> f64 + Sync> {
    pub base: Vec<f64>,
    pub factor: G,
}

impl<G: Fn(f64) -> f64 + Sync> Forcing for SeparableForcing<G> {
    fn load_into(&self, t: f64, out: &mut [f64]) {
        let g = (self.factor)(t);
        for (o, b) in out.iter_mut().zip(&self.base) {
            *o = g * b;
        }
    }
}

pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn load_into(&self, _t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Writes `t,dof_0,...` rows.
    pub fn write_states_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        write!(w, "t")?;
        for d in 0..n {
            write!(w, ",dof_{d}")?;
        }
        writeln!(w)?;
        for (t, y) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in y {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Writes `t,edge,x,value` rows for each probe `(edge, x)`.
    pub fn write_probes_csv<W: Write>(&self, system: &FemSystem, probes: &[(EdgeId, f64)], mut w: W) -> Result<()> {
        writeln!(w, "t,edge,x,value")?;
        for (t, y) in self.times.iter().zip(&self.states) {
            for &(e, x) in probes {
                let v = system.reconstruct(y, e, x)?;
                writeln!(w, "{t},{},{x},{v}", system.graph().edge(e).label)?;
            }
        }
        Ok(())
    }

    /// `max_t ||y_h(t) - y(t)||_{L2}` over the recorded times.
    pub fn max_l2_error(&self, system: &FemSystem, exact: &dyn EdgeField) -> f64 {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, y)| system.l2_distance(y, exact, t))
            .fold(0.0, f64::max)
    }
}

/// Midpoint probes on every edge.
pub fn midpoint_probes(system: &FemSystem) -> Vec<(EdgeId, f64)> {
    system.graph().edge_ids().map(|e| (e, 0.5 * system.graph().edge(e).length)).collect()
}

/// Factorization of `E + dt R` for the full implicit Euler step.
#[derive(Debug)]
pub struct FullStepper {
    mass: CsrMatrix,
    dt: f64,
    factor: LdlFactor,
}

impl FullStepper {
    pub fn new(system: &FemSystem, dt: f64) -> Result<Self> {
        let k = system.mass().add_scaled(system.stiffness(), dt);
        Ok(Self { mass: system.mass().clone(), dt, factor: LdlFactor::new(&k)? })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Solves `(E + dt R) x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        self.factor.solve_in_place(b, work);
    }

    /// `y <- (E + dt R)^{-1} (E y + dt F)`
    pub fn step(&self, y: &mut [f64], load: &[f64], rhs: &mut [f64], work: &mut Vec<f64>) {
        self.mass.mul_vec_into(y, rhs);
        for (r, f) in rhs.iter_mut().zip(load) {
            *r += self.dt * f;
        }
        self.factor.solve_in_place(rhs, work);
        y.copy_from_slice(rhs);
    }
}

/// Solver for `(E + dt B) x = b` where `B` lives on the active dofs `A` of
/// one batch. The complement `C` is eliminated once; the coupling through
/// the mass matrix reduces to a correction on the interface dofs of `A`.
#[derive(Debug)]
pub struct ReducedBlock {
    active: Vec<usize>,
    complement: Vec<usize>,
    /// `(a, W_a)` with `W_a = E_CC^{-1} E_{C,a}` for each interface dof.
    interface: Vec<(usize, Vec<f64>)>,
    schur: CsrMatrix,
    k_factor: LdlFactor,
    cc_factor: Option<LdlFactor>,
    e_ac: CsrMatrix,
    weights: Vec<f64>,
    dt: f64,
}

impl ReducedBlock {
    pub fn new(system: &FemSystem, batch: &CsrMatrix, active: Vec<usize>, force_weights: &[f64], dt: f64) -> Result<Self> {
        let n = system.n_dof();
        let mut is_active = vec![false; n];
        for &a in &active {
            is_active[a] = true;
        }
        let complement: Vec<usize> = (0..n).filter(|&d| !is_active[d]).collect();
        let mass = system.mass();
        let e_aa = mass.submatrix(&active, &active);
        let e_ac = mass.submatrix(&active, &complement);
        let b_aa = batch.submatrix(&active, &active);

        let (schur, interface, cc_factor) = if complement.is_empty() {
            (e_aa, Vec::new(), None)
        } else {
            let e_cc = mass.submatrix(&complement, &complement);
            let cc = LdlFactor::new(&e_cc)?;
            let mut interface = Vec::new();
            for a in 0..active.len() {
                if e_ac.row_is_empty(a) {
                    continue;
                }
                let mut col = vec![0.0; complement.len()];
                for (c, v) in e_ac.row(a) {
                    col[c] = v;
                }
                interface.push((a, cc.solve(&col)));
            }
            let mut t: Vec<(usize, usize, f64)> = e_aa.triplets().collect();
            for &(a, _) in &interface {
                for (b, w) in &interface {
                    let corr: f64 = e_ac.row(a).map(|(c, v)| v * w[c]).sum();
                    t.push((a, *b, -corr));
                }
            }
            let k = active.len();
            (CsrMatrix::from_triplets(k, k, &t), interface, Some(cc))
        };
        let k_mat = schur.add_scaled(&b_aa, dt);
        let k_factor = LdlFactor::new(&k_mat)?;
        let weights = active.iter().map(|&a| force_weights[a]).collect();
        Ok(Self { active, complement, interface, schur, k_factor, cc_factor, e_ac, weights, dt })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn interface_len(&self) -> usize {
        self.interface.len()
    }

    /// Schur complement `E_AA - E_AC E_CC^{-1} E_CA`.
    pub fn schur(&self) -> &CsrMatrix {
        &self.schur
    }

    /// One step with a load that is split by the batch force weights.
    pub fn step(&self, y: &mut [f64], load: &[f64], ws: &mut Workspace) {
        let k = self.active.len();
        ws.ya.clear();
        ws.ya.extend(self.active.iter().map(|&a| y[a]));
        ws.rhs.resize(k, 0.0);
        self.schur.mul_vec_into(&ws.ya, &mut ws.rhs);
        for ((r, &a), w) in ws.rhs.iter_mut().zip(&self.active).zip(&self.weights) {
            *r += self.dt * (w * load[a]);
        }
        self.k_factor.solve_in_place(&mut ws.rhs, &mut ws.work);
        for (a, wa) in &self.interface {
            let d = ws.rhs[*a] - ws.ya[*a];
            for (&c, w) in self.complement.iter().zip(wa) {
                y[c] -= w * d;
            }
        }
        for (&a, &v) in self.active.iter().zip(&ws.rhs) {
            y[a] = v;
        }
    }

    /// Solves `(E + dt B) x = b` for a general right-hand side.
    pub fn solve(&self, b: &[f64], ws: &mut Workspace) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        ws.rhs.clear();
        ws.rhs.extend(self.active.iter().map(|&a| b[a]));
        if let Some(cc) = &self.cc_factor {
            let mut z: Vec<f64> = self.complement.iter().map(|&c| b[c]).collect();
            cc.solve_in_place(&mut z, &mut ws.work);
            for (a, r) in ws.rhs.iter_mut().enumerate() {
                *r -= self.e_ac.row(a).map(|(c, v)| v * z[c]).sum::<f64>();
            }
            self.k_factor.solve_in_place(&mut ws.rhs, &mut ws.work);
            for (a, wa) in &self.interface {
                let xa = ws.rhs[*a];
                z.iter_mut().zip(wa).for_each(|(zc, w)| *zc -= w * xa);
            }
            for (&c, v) in self.complement.iter().zip(z) {
                x[c] = v;
            }
        } else {
            self.k_factor.solve_in_place(&mut ws.rhs, &mut ws.work);
        }
        for (&a, &v) in self.active.iter().zip(&ws.rhs) {
            x[a] = v;
        }
        x
    }
}

#[derive(Debug, Default)]
pub struct Workspace {
    ya: Vec<f64>,
    rhs: Vec<f64>,
    work: Vec<f64>,
}

/// One [`ReducedBlock`] per subset of a law, for a fixed step size.
#[derive(Debug)]
pub struct RbmSolver {
    blocks: Vec<ReducedBlock>,
    dt: f64,
}

impl RbmSolver {
    pub fn new(system: &FemSystem, dec: &Decomposition, dt: f64) -> Result<Self> {
        if dec.dim() != system.n_dof() {
            return Err(Error::DimensionMismatch { expected: system.n_dof(), got: dec.dim() });
        }
        let blocks = (0..dec.subsets().len())
            .map(|i| {
                ReducedBlock::new(system, dec.subset_matrix(i), dec.subset_support(i), dec.subset_force_weights(i), dt)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn blocks(&self) -> &[ReducedBlock] {
        &self.blocks
    }

    pub fn max_active(&self) -> usize {
        self.blocks.iter().map(|b| b.active.len()).max().unwrap_or(0)
    }
}

fn check_inputs(system: &FemSystem, y0: &[f64], grid: &TimeGrid) -> Result<()> {
    if y0.len() != system.n_dof() {
        return Err(Error::DimensionMismatch { expected: system.n_dof(), got: y0.len() });
    }
    if grid.steps == 0 {
        return Err(Error::InvalidArgument("time grid has no steps".into()));
    }
    Ok(())
}

/// Full implicit Euler with the load evaluated at `t_{n+1}`.
pub fn solve_full(system: &FemSystem, forcing: &dyn Forcing, y0: &[f64], grid: &TimeGrid) -> Result<Trajectory> {
    check_inputs(system, y0, grid)?;
    let main = FullStepper::new(system, grid.dt)?;
    let last = if grid.last_step_is_short() {
        Some(FullStepper::new(system, grid.step_size(grid.steps - 1))?)
    } else {
        None
    };
    let n = system.n_dof();
    let mut y = y0.to_vec();
    let (mut load, mut rhs, mut work) = (vec![0.0; n], vec![0.0; n], Vec::new());
    let mut traj = Trajectory { times: vec![0.0], states: vec![y.clone()] };
    for step in 0..grid.steps {
        let t1 = grid.time(step + 1);
        forcing.load_into(t1, &mut load);
        let stepper = if step + 1 == grid.steps { last.as_ref().unwrap_or(&main) } else { &main };
        stepper.step(&mut y, &load, &mut rhs, &mut work);
        if grid.is_recorded(step + 1) {
            traj.times.push(t1);
            traj.states.push(y.clone());
        }
    }
    Ok(traj)
}

/// Random batch implicit Euler with reduced solves on the active dofs.
///
/// `solver` must be built for `grid.dt`; a shortened final step gets its own
/// blocks.
pub fn solve_rbm(
    system: &FemSystem,
    dec: &Decomposition,
    solver: &RbmSolver,
    schedule: &BatchSchedule,
    forcing: &dyn Forcing,
    y0: &[f64],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_inputs(system, y0, grid)?;
    if (solver.dt - grid.dt).abs() > 1e-15 * grid.dt {
        return Err(Error::InvalidArgument(format!("solver built for dt = {}, grid has {}", solver.dt, grid.dt)));
    }
    let per_batch = grid.steps_per_batch(schedule.delta)?;
    let last = if grid.last_step_is_short() {
        Some(RbmSolver::new(system, dec, grid.step_size(grid.steps - 1))?)
    } else {
        None
    };
    let n = system.n_dof();
    let mut y = y0.to_vec();
    let mut load = vec![0.0; n];
    let mut ws = Workspace::default();
    let mut traj = Trajectory { times: vec![0.0], states: vec![y.clone()] };
    for step in 0..grid.steps {
        let k = (step / per_batch).min(schedule.omega.len() - 1);
        let subset = schedule.omega[k];
        let t1 = grid.time(step + 1);
        forcing.load_into(t1, &mut load);
        let s = if step + 1 == grid.steps { last.as_ref().unwrap_or(solver) } else { solver };
        s.blocks[subset].step(&mut y, &load, &mut ws);
        if grid.is_recorded(step + 1) {
            traj.times.push(t1);
            traj.states.push(y.clone());
        }
    }
    Ok(traj)
}

/// Random batch implicit Euler factoring `E + dt B` in full dimension.
/// Slower than [`solve_rbm`]; kept as an independent route for checks.
pub fn solve_rbm_full_size(
    system: &FemSystem,
    dec: &Decomposition,
    schedule: &BatchSchedule,
    forcing: &dyn Forcing,
    y0: &[f64],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_inputs(system, y0, grid)?;
    let per_batch = grid.steps_per_batch(schedule.delta)?;
    let factor = |i: usize, dt: f64| LdlFactor::new(&system.mass().add_scaled(dec.subset_matrix(i), dt));
    let main = (0..dec.subsets().len()).map(|i| factor(i, grid.dt)).collect::<Result<Vec<_>>>()?;
    let n = system.n_dof();
    let mut y = y0.to_vec();
    let (mut load, mut rhs, mut work) = (vec![0.0; n], vec![0.0; n], Vec::new());
    let mut traj = Trajectory { times: vec![0.0], states: vec![y.clone()] };
    for step in 0..grid.steps {
        let subset = schedule.omega[(step / per_batch).min(schedule.omega.len() - 1)];
        let t1 = grid.time(step + 1);
        let dt = grid.step_size(step);
        forcing.load_into(t1, &mut load);
        system.mass().mul_vec_into(&y, &mut rhs);
        let w = dec.subset_force_weights(subset);
        for ((r, f), wi) in rhs.iter_mut().zip(&load).zip(w) {
            *r += dt * (wi * f);
        }
        if (dt - grid.dt).abs() > 1e-12 * grid.dt {
            factor(subset, dt)?.solve_in_place(&mut rhs, &mut work);
        } else {
            main[subset].solve_in_place(&mut rhs, &mut work);
        }
        y.copy_from_slice(&rhs);
        if grid.is_recorded(step + 1) {
            traj.times.push(t1);
            traj.states.push(y.clone());
        }
    }
    Ok(traj)
}

#[derive(Clone, Copy)]
pub struct EnsembleOptions<'a> {
    pub realizations: usize,
    pub seed: u64,
    pub delta: f64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Exact solution for error statistics.
    pub exact: Option<&'a dyn EdgeField>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    /// Mean over realizations of `||Y_r(t) - y(t)||`, per recorded time.
    pub mean: Vec<f64>,
    /// Sample variance of the same quantity, per recorded time.
    pub variance: Vec<f64>,
    /// `max_t ||Y_r(t) - y(t)||` for each realization.
    pub per_realization: Vec<f64>,
    /// `max_t` of the mean error.
    pub expected_max: f64,
    /// `max_t ||mean_r Y_r(t) - y(t)||`.
    pub error_of_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub realizations: usize,
    pub seed: u64,
    pub mean: Trajectory,
    /// Sample variance `(1/(n-1)) sum_r ||Y_r(t) - mean(t)||_E^2`.
    pub state_variance: Vec<f64>,
    pub errors: Option<ErrorStats>,
}

/// Runs independent realizations in parallel. Results are reduced in
/// realization order, so they do not depend on the thread count.
pub fn run_ensemble(
    system: &FemSystem,
    dec: &Decomposition,
    forcing: &dyn Forcing,
    y0: &[f64],
    grid: &TimeGrid,
    opts: &EnsembleOptions<'_>,
) -> Result<EnsembleResult> {
    if opts.realizations == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one realization".into()));
    }
    let solver = RbmSolver::new(system, dec, grid.dt)?;
    let pool = match opts.jobs {
        Some(j) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        ),
        None => None,
    };
    let run_one = |r: usize| -> Result<(Trajectory, Vec<f64>)> {
        let schedule = sample_schedule(dec, opts.delta, grid.horizon, opts.seed, r as u64)?;
        let traj = solve_rbm(system, dec, &solver, &schedule, forcing, y0, grid)?;
        let errs = match opts.exact {
            Some(ex) => traj.times.iter().zip(&traj.states).map(|(&t, y)| system.l2_distance(y, ex, t)).collect(),
            None => Vec::new(),
        };
        Ok((traj, errs))
    };

    let chunk = opts.jobs.unwrap_or_else(rayon::current_num_threads).max(1) * 2;
    let mut reference: Option<Trajectory> = None;
    let mut sum: Vec<Vec<f64>> = Vec::new();
    let mut shift_sum: Vec<Vec<f64>> = Vec::new();
    let mut shift_sq: Vec<f64> = Vec::new();
    let mut err_series: Vec<Vec<f64>> = Vec::new();
    let mut start = 0;
    while start < opts.realizations {
        let end = (start + chunk).min(opts.realizations);
        let batch = || (start..end).into_par_iter().map(run_one).collect::<Vec<_>>();
        let results = match &pool {
            Some(p) => p.install(batch),
            None => batch(),
        };
        for res in results {
            let (traj, errs) = res?;
            let base = reference.get_or_insert_with(|| traj.clone());
            if sum.is_empty() {
                sum = vec![vec![0.0; y0.len()]; traj.states.len()];
                shift_sum = sum.clone();
                shift_sq = vec![0.0; traj.states.len()];
            }
            for (k, y) in traj.states.iter().enumerate() {
                let d: Vec<f64> = y.iter().zip(&base.states[k]).map(|(a, b)| a - b).collect();
                shift_sq[k] += system.mass().inner(&d, &d);
                sum[k].iter_mut().zip(y).for_each(|(s, v)| *s += v);
                shift_sum[k].iter_mut().zip(&d).for_each(|(s, v)| *s += v);
            }
            err_series.push(errs);
        }
        start = end;
    }
    let n = opts.realizations as f64;
    let reference = reference.expect("at least one realization");
    let mean = Trajectory {
        times: reference.times.clone(),
        states: sum.iter().map(|s| s.iter().map(|v| v / n).collect()).collect(),
    };
    let state_variance = if opts.realizations < 2 {
        vec![0.0; mean.times.len()]
    } else {
        shift_sum
            .iter()
            .zip(&shift_sq)
            .map(|(s, &sq)| {
                let m: Vec<f64> = s.iter().map(|v| v / n).collect();
                ((sq - n * system.mass().inner(&m, &m)) / (n - 1.0)).max(0.0)
            })
            .collect()
    };
    let errors = opts.exact.map(|ex| {
        let len = mean.times.len();
        let mut m = vec![0.0; len];
        for e in &err_series {
            m.iter_mut().zip(e).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= n);
        let variance = (0..len)
            .map(|k| {
                if opts.realizations < 2 {
                    0.0
                } else {
                    err_series.iter().map(|e| (e[k] - m[k]).powi(2)).sum::<f64>() / (n - 1.0)
                }
            })
            .collect();
        let per_realization = err_series.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).collect();
        ErrorStats {
            expected_max: m.iter().copied().fold(0.0, f64::max),
            error_of_mean: mean.max_l2_error(system, ex),
            mean: m,
            variance,
            per_realization,
        }
    });
    Ok(EnsembleResult { realizations: opts.realizations, seed: opts.seed, mean, state_variance, errors })
}
