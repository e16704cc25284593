//! Shared fixtures for the benchmarks: the manufactured case on the ten-edge graph.

use graph_rbm::decomposition::{paper_nonoverlap_3, paper_overlap_3, Style};
use graph_rbm::integrate::SeparableForcing;
use graph_rbm::{paper_graph, Decomposition, FemSystem, ManufacturedCase, Mesh1D, Result};

pub struct Fixture {
    pub system: FemSystem,
    pub dec: Decomposition,
    pub forcing: SeparableForcing<fn(f64) -> f64>,
    pub y0: Vec<f64>,
}

pub fn assemble(n: usize) -> Result<FemSystem> {
    FemSystem::assemble(paper_graph(1.0), Mesh1D::for_length(1.0, n))
}

pub fn fixture(n: usize, style: Style) -> Result<Fixture> {
    let system = assemble(n)?;
    let plan = match style {
        Style::Overlapping => paper_overlap_3(system.graph())?,
        Style::NonOverlapping => paper_nonoverlap_3(system.graph())?,
    };
    let dec = plan.build(&system)?;
    let case = ManufacturedCase::paper(1.0, 1.0);
    let forcing = case.forcing(&system);
    let y0 = system.project_initial(&case.initial());
    Ok(Fixture { system, dec, forcing, y0 })
}
