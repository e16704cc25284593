//! Piecewise linear finite elements on a metric graph.
//!
//! Each edge carries `N` interior nodes at spacing `h = l_e / (N + 1)`.
//! Interior vertices carry one shared dof; boundary vertices are Dirichlet and
//! have no dof at all.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, MetricGraph, VertexId};
use crate::sparse::{CsrMatrix, LdlFactor};
use crate::spectral::{matrix_extremes, pencil_extremes, Extremes, LanczosOptions};

/// Uniform mesh with `n` interior nodes per edge and spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    pub n: usize,
    pub h: f64,
}

impl Mesh1D {
    pub fn for_length(length: f64, n: usize) -> Self {
        Self { n, h: length / (n as f64 + 1.0) }
    }

    pub fn elements(&self) -> usize {
        self.n + 1
    }
}

/// Scalar field on the edges of a graph, evaluated in local edge coordinates.
pub trait EdgeField: Sync {
    fn value(&self, edge: EdgeId, x: f64, t: f64) -> f64;
}

impl<F> EdgeField for F
where
    F: Fn(EdgeId, f64, f64) -> f64 + Sync,
{
    fn value(&self, edge: EdgeId, x: f64, t: f64) -> f64 {
        self(edge, x, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    /// Interior node `node` (1-based) of an edge.
    EdgeNode { edge: EdgeId, node: usize },
    Vertex(VertexId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    n: usize,
    edge_offset: Vec<usize>,
    vertex_dof: Vec<Option<usize>>,
    kinds: Vec<DofKind>,
}

impl DofMap {
    pub fn new(graph: &MetricGraph, n: usize) -> Self {
        let mut edge_offset = vec![0; graph.edges().len()];
        let mut vertex_dof = vec![None; graph.vertices().len()];
        let mut kinds = Vec::new();
        let interior = graph.interior_vertices();
        for e in graph.edge_ids() {
            for &v in &interior {
                if graph.host_edge(v) == Some(e) {
                    vertex_dof[v.0] = Some(kinds.len());
                    kinds.push(DofKind::Vertex(v));
                }
            }
            edge_offset[e.0] = kinds.len();
            for node in 1..=n {
                kinds.push(DofKind::EdgeNode { edge: e, node });
            }
        }
        Self { n, edge_offset, vertex_dof, kinds }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, dof: usize) -> DofKind {
        self.kinds[dof]
    }

    pub fn vertex_dof(&self, v: VertexId) -> Option<usize> {
        self.vertex_dof[v.0]
    }

    /// Dofs of the interior nodes of edge `e`, in order along the edge.
    pub fn edge_dofs(&self, e: EdgeId) -> std::ops::Range<usize> {
        self.edge_offset[e.0]..self.edge_offset[e.0] + self.n
    }

    /// Dof of node `j` (0..=N+1) of edge `e`; `None` at Dirichlet vertices.
    pub fn node_dof(&self, graph: &MetricGraph, e: EdgeId, j: usize) -> Option<usize> {
        if j == 0 {
            self.vertex_dof[graph.edge(e).tail.0]
        } else if j == self.n + 1 {
            self.vertex_dof[graph.edge(e).head.0]
        } else {
            Some(self.edge_offset[e.0] + j - 1)
        }
    }
}

/// Assembled mass `E` and stiffness `R` on a graph.
#[derive(Debug)]
pub struct FemSystem {
    graph: MetricGraph,
    mesh: Mesh1D,
    dofs: DofMap,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    mass_factor: OnceLock<LdlFactor>,
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Five-point Gauss-Legendre rule on [-1, 1].
pub const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

impl FemSystem {
    pub fn assemble(graph: MetricGraph, mesh: Mesh1D) -> Result<Self> {
        graph.validate().into_result()?;
        if mesh.n == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one interior node per edge".into()));
        }
        for e in graph.edges() {
            let expected = mesh.h * (mesh.n as f64 + 1.0);
            if (e.length - expected).abs() > 1e-12 * e.length.max(expected) {
                return Err(Error::LengthMismatch { edge: e.label, length: e.length, expected });
            }
        }
        let dofs = DofMap::new(&graph, mesh.n);
        let h = mesh.h;
        let m_diag = h / 6.0 * 2.0;
        let m_off = h / 6.0;
        let k = 1.0 / h;
        let mut mt = Vec::new();
        let mut kt = Vec::new();
        for e in graph.edge_ids() {
            for el in 0..mesh.elements() {
                let a = dofs.node_dof(&graph, e, el);
                let b = dofs.node_dof(&graph, e, el + 1);
                for (i, j, mv, kv) in [
                    (a, a, m_diag, k),
                    (a, b, m_off, -k),
                    (b, a, m_off, -k),
                    (b, b, m_diag, k),
                ] {
                    if let (Some(i), Some(j)) = (i, j) {
                        mt.push((i, j, mv));
                        kt.push((i, j, kv));
                    }
                }
            }
        }
        let n = dofs.len();
        Ok(Self {
            mass: CsrMatrix::from_triplets(n, n, &mt),
            stiffness: CsrMatrix::from_triplets(n, n, &kt),
            graph,
            mesh,
            dofs,
            mass_factor: OnceLock::new(),
        })
    }

    /// The interval `[0, length]` with homogeneous Dirichlet ends.
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::assemble(MetricGraph::interval(length), Mesh1D::for_length(length, n))
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn mesh(&self) -> Mesh1D {
        self.mesh
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_dof(&self) -> usize {
        self.dofs.len()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass_factor(&self) -> &LdlFactor {
        self.mass_factor
            .get_or_init(|| LdlFactor::new(&self.mass).expect("mass matrix is SPD"))
    }

    /// Load vector `(f(t), phi_j)` by three-point Gauss quadrature per element.
    pub fn assemble_load(&self, f: &dyn EdgeField, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dof()];
        self.assemble_load_into(f, t, &mut out);
        out
    }

    pub fn assemble_load_into(&self, f: &dyn EdgeField, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let h = self.mesh.h;
        for e in self.graph.edge_ids() {
            for el in 0..self.mesh.elements() {
                let x0 = el as f64 * h;
                let (mut ia, mut ib) = (0.0, 0.0);
                for &(xi, w) in &GAUSS3 {
                    let s = 0.5 * (xi + 1.0);
                    let fv = f.value(e, x0 + s * h, t) * w * 0.5 * h;
                    ia += fv * (1.0 - s);
                    ib += fv * s;
                }
                if let Some(a) = self.dofs.node_dof(&self.graph, e, el) {
                    out[a] += ia;
                }
                if let Some(b) = self.dofs.node_dof(&self.graph, e, el + 1) {
                    out[b] += ib;
                }
            }
        }
    }

    /// L2 projection of an initial field: solves `E c = (y0, phi)`.
    pub fn project_initial(&self, y0: &dyn EdgeField) -> Vec<f64> {
        let b = self.assemble_load(y0, 0.0);
        self.mass_factor().solve(&b)
    }

    /// Nodal interpolation of a field at time `t`.
    pub fn interpolate(&self, y: &dyn EdgeField, t: f64) -> Vec<f64> {
        (0..self.n_dof())
            .map(|d| {
                let (e, x) = self.dof_position(d);
                y.value(e, x, t)
            })
            .collect()
    }

    /// An edge and local coordinate where dof `d` sits.
    pub fn dof_position(&self, d: usize) -> (EdgeId, f64) {
        match self.dofs.kind(d) {
            DofKind::EdgeNode { edge, node } => (edge, node as f64 * self.mesh.h),
            DofKind::Vertex(v) => {
                let e = self.graph.host_edge(v).expect("interior vertex has an edge");
                let x = if self.graph.edge(e).tail == v { 0.0 } else { self.graph.edge(e).length };
                (e, x)
            }
        }
    }

    /// `sqrt(v^T E v)`
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.mass.inner(v, v).max(0.0).sqrt()
    }

    /// Evaluates the finite element function at local coordinate `x` of `edge`.
    pub fn reconstruct(&self, coeffs: &[f64], edge: EdgeId, x: f64) -> Result<f64> {
        if edge.0 >= self.graph.edges().len() {
            return Err(Error::UnknownEdge(edge.0 as u32));
        }
        if coeffs.len() != self.n_dof() {
            return Err(Error::DimensionMismatch { expected: self.n_dof(), got: coeffs.len() });
        }
        let len = self.graph.edge(edge).length;
        if !(0.0..=len).contains(&x) {
            return Err(Error::InvalidArgument(format!("x = {x} outside [0, {len}]")));
        }
        let h = self.mesh.h;
        let el = ((x / h).floor() as usize).min(self.mesh.n);
        let s = (x - el as f64 * h) / h;
        let val = |j| self.dofs.node_dof(&self.graph, edge, j).map_or(0.0, |d| coeffs[d]);
        Ok(val(el) * (1.0 - s) + val(el + 1) * s)
    }

    /// `||u_h - u(t)||_{L2}` over the whole graph with five-point Gauss per element.
    pub fn l2_distance(&self, coeffs: &[f64], exact: &dyn EdgeField, t: f64) -> f64 {
        let h = self.mesh.h;
        let mut sum = 0.0;
        for e in self.graph.edge_ids() {
            for el in 0..self.mesh.elements() {
                let x0 = el as f64 * h;
                let ua = self.dofs.node_dof(&self.graph, e, el).map_or(0.0, |d| coeffs[d]);
                let ub = self.dofs.node_dof(&self.graph, e, el + 1).map_or(0.0, |d| coeffs[d]);
                for &(xi, w) in &GAUSS5 {
                    let s = 0.5 * (xi + 1.0);
                    let diff = ua * (1.0 - s) + ub * s - exact.value(e, x0 + s * h, t);
                    sum += w * 0.5 * h * diff * diff;
                }
            }
        }
        sum.sqrt()
    }

    /// Extreme eigenvalues of `E` by Lanczos.
    pub fn mass_extremes(&self) -> Extremes {
        matrix_extremes(&self.mass, LanczosOptions::default())
    }

    /// Extreme generalized eigenvalues of `(a, E)`.
    pub fn pencil_extremes(&self, a: &CsrMatrix) -> Extremes {
        pencil_extremes(a, &self.mass, self.mass_factor(), LanczosOptions::default())
    }
}

/// Smallest eigenvalue of the interval mass matrix with `n` interior nodes.
pub fn lambda_min_mass(n: usize, h: f64) -> f64 {
    let theta = n as f64 * std::f64::consts::PI / (n as f64 + 1.0);
    h * (2.0 / 3.0 + theta.cos() / 3.0)
}
