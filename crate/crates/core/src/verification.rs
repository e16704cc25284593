//! Manufactured solutions, error metrics, order fits and convergence sweeps.

use std::io::Write;
use std::time::Instant;

use crate::decomposition::{paper_nonoverlap_3, paper_overlap_3, Style};
use crate::error::{Error, Result};
use crate::fem::{EdgeField, FemSystem, Mesh1D};
use crate::graph::{paper_graph, EdgeId, MetricGraph};
use crate::integrate::{run_ensemble, solve_full, solve_rbm, EnsembleOptions, RbmSolver, SeparableForcing, TimeGrid};
use crate::rbm::sample_schedule;

/// `y = p_e x (L - x) e^{-t}` on each edge, with source `p_e (2 - x (L - x)) e^{-t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub coefficients: Vec<f64>,
    pub horizon: f64,
    pub length: f64,
}

pub const PAPER_COEFFICIENTS: [f64; 10] = [1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0];

impl ManufacturedCase {
    /// The coefficient set that balances fluxes at the three junctions of
    /// [`paper_graph`].
    pub fn paper(horizon: f64, length: f64) -> Self {
        Self { coefficients: PAPER_COEFFICIENTS.to_vec(), horizon, length }
    }

    pub fn exact(&self) -> impl EdgeField + '_ {
        move |e: EdgeId, x: f64, t: f64| self.coefficients[e.0] * x * (self.length - x) * (-t).exp()
    }

    pub fn source(&self) -> impl EdgeField + '_ {
        move |e: EdgeId, x: f64, t: f64| self.coefficients[e.0] * (2.0 - x * (self.length - x)) * (-t).exp()
    }

    pub fn initial(&self) -> impl EdgeField + '_ {
        move |e: EdgeId, x: f64, _t: f64| self.coefficients[e.0] * x * (self.length - x)
    }

    /// The source separates as `e^{-t} F_0`, so the load is assembled once.
    pub fn forcing(&self, system: &FemSystem) -> SeparableForcing<fn(f64) -> f64> {
        let base = system.assemble_load(&self.source(), 0.0);
        SeparableForcing { base, factor: |t: f64| (-t).exp() }
    }

    /// Flux balance and continuity of the exact solution at interior vertices.
    pub fn check_compatibility(&self, graph: &MetricGraph) -> Result<CompatibilityReport> {
        if self.coefficients.len() != graph.edges().len() {
            return Err(Error::DimensionMismatch { expected: graph.edges().len(), got: self.coefficients.len() });
        }
        let mut report = CompatibilityReport::default();
        for v in graph.interior_vertices() {
            let mut flux = 0.0;
            let mut values = Vec::new();
            for e in graph.incident_edges(v) {
                let edge = graph.edge(e);
                let p = self.coefficients[e.0];
                // the same edge can reach v through both ends
                for (end, x, sign) in [(edge.tail, 0.0, -1.0), (edge.head, edge.length, 1.0)] {
                    if end == v {
                        flux += sign * p * (self.length - 2.0 * x);
                        values.push(p * x * (self.length - x));
                    }
                }
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            report.vertices.push(VertexCheck { vertex: graph.vertex(v).label, flux_sum: flux, jump: hi - lo });
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCheck {
    pub vertex: u32,
    /// `sum_e n_e(v) d_x y^e(v)` at `t = 0`.
    pub flux_sum: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompatibilityReport {
    pub vertices: Vec<VertexCheck>,
}

impl CompatibilityReport {
    pub fn is_compatible(&self, tol: f64) -> bool {
        self.vertices.iter().all(|c| c.flux_sum.abs() <= tol && c.jump.abs() <= tol)
    }
}

/// Least-squares slope of `log e` against `log x`.
pub fn fit_observed_order(x: &[f64], errors: &[f64]) -> Result<f64> {
    if x.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: errors.len() });
    }
    if x.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(errors).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("values must be positive and finite".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-24 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// `delta = h^{7 / (1 - epsilon)}`
pub fn delta_from_h(h: f64, epsilon: f64) -> f64 {
    h.powf(7.0 / (1.0 - epsilon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Interior nodes per edge for each row.
    pub meshes: Vec<usize>,
    pub epsilon: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Collocation points of the output grid; the step never exceeds its spacing.
    pub zeta: usize,
    pub horizon: f64,
    pub length: f64,
    pub style: Style,
    pub jobs: Option<usize>,
    pub dof_cap: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            meshes: vec![1, 2, 3, 4, 6],
            epsilon: 1e-4,
            realizations: 30,
            seed: 0,
            zeta: 201,
            horizon: 1.0,
            length: 1.0,
            style: Style::Overlapping,
            jobs: None,
            dof_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub delta: f64,
    pub dt: f64,
    pub err_rbm: f64,
    pub err_full: f64,
    pub time_rbm_s: f64,
    pub time_full_s: f64,
    pub speedup: f64,
    pub realizations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Observed order of `err_rbm` in `delta`.
    pub order: Option<f64>,
    pub excluded_coarsest: bool,
}

pub const SWEEP_HEADER: &str = "h,delta,err_rbm,err_full,time_rbm_s,time_full_s,speedup,realizations,seed";

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SWEEP_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.6},{:.6},{:.4},{},{}",
                r.h, r.delta, r.err_rbm, r.err_full, r.time_rbm_s, r.time_full_s, r.speedup, r.realizations, r.seed
            )?;
        }
        Ok(())
    }
}

/// Step size for a row: the largest `delta / k` not above the output spacing.
pub fn sweep_step(delta: f64, target_dt: f64) -> f64 {
    delta / (delta / target_dt).ceil()
}

pub fn run_convergence_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.meshes.is_empty() {
        return Err(Error::InvalidArgument("sweep has no meshes".into()));
    }
    if !(0.0..1.0).contains(&cfg.epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon = {} must lie in [0, 1)", cfg.epsilon)));
    }
    let mut rows = Vec::new();
    for &n in &cfg.meshes {
        let system = FemSystem::assemble(paper_graph(cfg.length), Mesh1D::for_length(cfg.length, n))?;
        if system.n_dof() > cfg.dof_cap {
            return Err(Error::ResourceLimit { dofs: system.n_dof(), cap: cfg.dof_cap });
        }
        let plan = match cfg.style {
            Style::Overlapping => paper_overlap_3(system.graph())?,
            Style::NonOverlapping => paper_nonoverlap_3(system.graph())?,
        };
        let dec = plan.build(&system)?;
        let case = ManufacturedCase::paper(cfg.horizon, cfg.length);
        let forcing = case.forcing(&system);
        let y0 = system.project_initial(&case.initial());
        let exact = case.exact();

        let h = system.mesh().h;
        let delta = delta_from_h(h, cfg.epsilon);
        let target = cfg.horizon / (cfg.zeta.max(2) - 1) as f64;
        let dt = sweep_step(delta, target);
        let stride = ((target / dt).round() as usize).max(1);
        let grid = TimeGrid::with_step(cfg.horizon, dt, stride)?;

        let start = Instant::now();
        let full = solve_full(&system, &forcing, &y0, &grid)?;
        let time_full_s = start.elapsed().as_secs_f64();
        let err_full = full.max_l2_error(&system, &exact);

        // one serial realization for timing
        let start = Instant::now();
        let solver = RbmSolver::new(&system, &dec, grid.dt)?;
        let schedule = sample_schedule(&dec, delta, cfg.horizon, cfg.seed, 0)?;
        solve_rbm(&system, &dec, &solver, &schedule, &forcing, &y0, &grid)?;
        let time_rbm_s = start.elapsed().as_secs_f64();

        let ens = run_ensemble(
            &system,
            &dec,
            &forcing,
            &y0,
            &grid,
            &EnsembleOptions { realizations: cfg.realizations, seed: cfg.seed, delta, jobs: cfg.jobs, exact: Some(&exact) },
        )?;
        let err_rbm = ens.errors.as_ref().map_or(f64::NAN, |e| e.expected_max);
        rows.push(SweepRow {
            h,
            delta,
            dt,
            err_rbm,
            err_full,
            time_rbm_s,
            time_full_s,
            speedup: time_full_s / time_rbm_s.max(1e-12),
            realizations: cfg.realizations,
            seed: cfg.seed,
        });
    }
    let (order, excluded_coarsest) = fit_sweep(&rows);
    Ok(SweepTable { rows, order, excluded_coarsest })
}

/// Fits `err_rbm ~ delta^p`, dropping the coarsest row when the sweep spans
/// more than three decades in `delta`.
pub fn fit_sweep(rows: &[SweepRow]) -> (Option<f64>, bool) {
    let dmax = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    let dmin = rows.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
    let exclude = rows.len() >= 4 && dmax / dmin > 1e3;
    let kept: Vec<&SweepRow> = rows.iter().filter(|r| !(exclude && r.delta == dmax)).collect();
    let x: Vec<f64> = kept.iter().map(|r| r.delta).collect();
    let y: Vec<f64> = kept.iter().map(|r| r.err_rbm).collect();
    (fit_observed_order(&x, &y).ok(), exclude)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_case_is_compatible() {
        let case = ManufacturedCase::paper(1.0, 1.0);
        let rep = case.check_compatibility(&paper_graph(1.0)).unwrap();
        assert_eq!(rep.vertices.len(), 3);
        assert!(rep.is_compatible(1e-14), "{rep:?}");
    }

    #[test]
    fn perturbed_case_is_flagged() {
        let mut case = ManufacturedCase::paper(1.0, 1.0);
        case.coefficients[7] = 3.0;
        let rep = case.check_compatibility(&paper_graph(1.0)).unwrap();
        assert!(!rep.is_compatible(1e-14));
        let bad: Vec<u32> = rep.vertices.iter().filter(|c| c.flux_sum.abs() > 0.5).map(|c| c.vertex).collect();
        assert_eq!(bad, vec![2, 3]);
    }

    #[test]
    fn source_matches_pde() {
        let case = ManufacturedCase::paper(1.0, 1.0);
        let (y, f) = (case.exact(), case.source());
        let e = EdgeId(7);
        let (x, t, eps) = (0.3, 0.4, 1e-4);
        let yt = (y.value(e, x, t + eps) - y.value(e, x, t - eps)) / (2.0 * eps);
        let yxx = (y.value(e, x + eps, t) - 2.0 * y.value(e, x, t) + y.value(e, x - eps, t)) / (eps * eps);
        assert!((yt - yxx - f.value(e, x, t)).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_slope() {
        let x = [1e-1, 1e-2, 1e-3, 1e-4];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        assert!((fit_observed_order(&x, &y).unwrap() - 0.7).abs() < 1e-12);
        assert!(fit_observed_order(&x[..2], &y[..2]).is_err());
        assert!(fit_observed_order(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_observed_order(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_err());
    }

    #[test]
    fn delta_formula() {
        assert!((delta_from_h(0.5, 0.0) - 0.5f64.powi(7)).abs() < 1e-18);
        let dt = sweep_step(0.012, 0.005);
        assert!((dt - 0.004).abs() < 1e-15);
    }
}
