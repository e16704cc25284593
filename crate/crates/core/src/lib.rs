//! Finite elements for the heat equation on metric graphs, random batch time
//! stepping with reduced solves, and optimal control on top of both.

pub mod control;
pub mod decomposition;
pub mod error;
pub mod fem;
pub mod graph;
pub mod integrate;
pub mod rbm;
pub mod sparse;
pub mod spectral;
pub mod verification;

pub use control::{solve_deterministic, solve_random, ControlOptions, ControlProblem, ControlSolution};
pub use decomposition::{paper_nonoverlap_3, paper_overlap_3, GroupPlan, Style};
pub use error::{Error, Result};
pub use fem::{EdgeField, FemSystem, Mesh1D};
pub use graph::{paper_graph, Edge, EdgeGroup, EdgeId, GroupMember, MetricGraph, Portion, Vertex, VertexId};
pub use integrate::{run_ensemble, solve_full, solve_rbm, EnsembleOptions, EnsembleResult, Forcing, RbmSolver, TimeGrid, Trajectory};
pub use rbm::{sample_schedule, BatchSchedule, Decomposition, Subset};
pub use sparse::{CsrMatrix, LdlFactor};
pub use verification::{run_convergence_sweep, ManufacturedCase, SweepConfig};
