//! Builders that turn edge groups into stiffness splittings.
//!
//! Overlapping plans share whole edges between two groups and halve their
//! interior blocks. Non-overlapping plans hand every element to one group and
//! may cut an edge in two.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DofKind, FemSystem};
use crate::graph::{group_entry, EdgeGroup, EdgeId, GroupEntry, GroupMember, MetricGraph, Portion, VertexId};
use crate::rbm::{Decomposition, Subset};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Overlapping,
    NonOverlapping,
}

/// Edge groups plus the group that owns each interior vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlan {
    pub style: Style,
    pub groups: Vec<EdgeGroup>,
    pub owners: BTreeMap<VertexId, usize>,
}

impl GroupPlan {
    pub fn build(&self, system: &FemSystem) -> Result<Decomposition> {
        let m = self.groups.len();
        self.build_with_law(system, Decomposition::uniform_singletons(m))
    }

    pub fn build_with_law(&self, system: &FemSystem, subsets: Vec<Subset>) -> Result<Decomposition> {
        let (parts, weights) = match self.style {
            Style::Overlapping => overlapping_parts(system, self)?,
            Style::NonOverlapping => nonoverlapping_parts(system, self)?,
        };
        let labels = self.groups.iter().map(|g| g.label.clone()).collect();
        Decomposition::new(system.stiffness().clone(), parts, weights, labels, subsets)
    }

    fn owner(&self, graph: &MetricGraph, v: VertexId) -> Result<usize> {
        self.owners
            .get(&v)
            .copied()
            .ok_or_else(|| Error::InvalidPlan(format!("interior vertex {} has no owner", graph.vertex(v).label)))
    }

    fn check_owners(&self, graph: &MetricGraph) -> Result<()> {
        for (&v, &g) in &self.owners {
            if v.0 >= graph.vertices().len() || graph.vertex(v).boundary {
                return Err(Error::InvalidPlan(format!("owner given for a non-interior vertex #{}", v.0)));
            }
            if g >= self.groups.len() {
                return Err(Error::InvalidPlan(format!("owner of vertex {} is an unknown group", graph.vertex(v).label)));
            }
        }
        for v in graph.interior_vertices() {
            self.owner(graph, v)?;
        }
        Ok(())
    }

    /// Groups containing edge `e`, with the portion each one holds.
    fn memberships(&self, e: EdgeId) -> Vec<(usize, Portion)> {
        let mut out = Vec::new();
        for (g, group) in self.groups.iter().enumerate() {
            for m in &group.members {
                if m.edge == e {
                    out.push((g, m.portion));
                }
            }
        }
        out
    }

    pub fn from_toml_file(graph: &MetricGraph, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(graph, &std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(graph: &MetricGraph, text: &str) -> Result<Self> {
        let file: PlanFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let groups = file.groups.iter().map(|g| g.resolve(graph)).collect::<Result<Vec<_>>>()?;
        let mut owners = BTreeMap::new();
        for o in &file.owners {
            let v = graph.vertex_by_label(o.vertex)?;
            let g = groups
                .iter()
                .position(|g| g.label == o.group)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown group {}", o.group)))?;
            owners.insert(v, g);
        }
        Ok(Self { style: file.style, groups, owners })
    }

    pub fn to_toml_string(&self, graph: &MetricGraph) -> String {
        let file = PlanFile {
            style: self.style,
            groups: self.groups.iter().map(|g| group_entry(graph, g)).collect(),
            owners: self
                .owners
                .iter()
                .map(|(&v, &g)| OwnerEntry { vertex: graph.vertex(v).label, group: self.groups[g].label.clone() })
                .collect(),
        };
        toml::to_string(&file).expect("plan serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    style: Style,
    groups: Vec<GroupEntry>,
    owners: Vec<OwnerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OwnerEntry {
    vertex: u32,
    group: String,
}

type Parts = (Vec<CsrMatrix>, Vec<Vec<f64>>);

fn overlapping_parts(system: &FemSystem, plan: &GroupPlan) -> Result<Parts> {
    let graph = system.graph();
    plan.check_owners(graph)?;
    // share[e] = groups holding edge e and the fraction each takes
    let mut share: Vec<Vec<(usize, f64)>> = Vec::new();
    for e in graph.edge_ids() {
        let mem = plan.memberships(e);
        let label = graph.edge(e).label;
        if mem.iter().any(|&(_, p)| !matches!(p, Portion::Whole | Portion::Shared)) {
            return Err(Error::InvalidPlan(format!("edge {label}: overlapping plans use whole or shared portions")));
        }
        let whole = mem.iter().filter(|m| m.1 == Portion::Whole).count();
        let shared = mem.len() - whole;
        let entry = match (whole, shared) {
            (1, 0) => vec![(mem[0].0, 1.0)],
            (0, 2) => vec![(mem[0].0, 0.5), (mem[1].0, 0.5)],
            _ => {
                return Err(Error::InvalidPlan(format!(
                    "edge {label} must be whole in one group or shared by exactly two"
                )))
            }
        };
        share.push(entry);
    }
    for v in graph.interior_vertices() {
        let g = plan.owner(graph, v)?;
        for e in graph.incident_edges(v) {
            if !share[e.0].iter().any(|&(h, _)| h == g) {
                return Err(Error::InvalidPlan(format!(
                    "vertex {} is owned by {} which does not contain edge {}",
                    graph.vertex(v).label,
                    plan.groups[g].label,
                    graph.edge(e).label
                )));
            }
        }
    }

    let dofs = system.dofs();
    let m = plan.groups.len();
    let n = system.n_dof();
    let vertex_owner = |d: usize| match dofs.kind(d) {
        DofKind::Vertex(v) => Some(plan.owners[&v]),
        DofKind::EdgeNode { .. } => None,
    };
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m];
    for (r, c, v) in system.stiffness().triplets() {
        match (vertex_owner(r), vertex_owner(c)) {
            (Some(g), None) | (None, Some(g)) => triplets[g].push((r, c, v)),
            (Some(g), Some(h)) if g == h => triplets[g].push((r, c, v)),
            (Some(_), Some(_)) => {
                return Err(Error::InvalidPlan("adjacent junctions with different owners".into()));
            }
            (None, None) => {
                let DofKind::EdgeNode { edge, .. } = dofs.kind(r) else { unreachable!() };
                for &(g, w) in &share[edge.0] {
                    triplets[g].push((r, c, w * v));
                }
            }
        }
    }
    let mut weights = vec![vec![0.0; n]; m];
    for d in 0..n {
        match dofs.kind(d) {
            DofKind::Vertex(v) => weights[plan.owners[&v]][d] = 1.0,
            DofKind::EdgeNode { edge, .. } => {
                for &(g, w) in &share[edge.0] {
                    weights[g][d] = w;
                }
            }
        }
    }
    let parts = triplets.iter().map(|t| CsrMatrix::from_triplets(n, n, t)).collect();
    Ok((parts, weights))
}

/// Last element (1-based) of the first half of a split edge with `n` interior nodes.
pub fn split_index(n: usize) -> Result<usize> {
    let s = (n / 2).saturating_sub(1);
    if s == 0 {
        return Err(Error::InvalidPlan(format!("cannot split an edge with {n} interior nodes; need at least 4")));
    }
    Ok(s)
}

fn nonoverlapping_parts(system: &FemSystem, plan: &GroupPlan) -> Result<Parts> {
    let graph = system.graph();
    plan.check_owners(graph)?;
    let mesh = system.mesh();
    let n_el = mesh.elements();
    // element_owner[e][el] for el in 0..=N
    let mut element_owner: Vec<Vec<usize>> = Vec::new();
    for e in graph.edge_ids() {
        let mem = plan.memberships(e);
        let label = graph.edge(e).label;
        let find = |p| mem.iter().filter(|m| m.1 == p).map(|m| m.0).collect::<Vec<_>>();
        let (whole, first, second) = (find(Portion::Whole), find(Portion::FirstHalf), find(Portion::SecondHalf));
        if mem.iter().any(|m| m.1 == Portion::Shared) {
            return Err(Error::InvalidPlan(format!("edge {label}: non-overlapping plans cannot share edges")));
        }
        let owners = match (whole.len(), first.len(), second.len()) {
            (1, 0, 0) => vec![whole[0]; n_el],
            (0, 1, 1) => {
                let s = split_index(mesh.n)?;
                (0..n_el).map(|el| if el < s { first[0] } else { second[0] }).collect()
            }
            _ => {
                return Err(Error::InvalidPlan(format!(
                    "edge {label} must be whole in one group or split into one first and one second half"
                )))
            }
        };
        element_owner.push(owners);
    }
    for v in graph.interior_vertices() {
        let g = plan.owner(graph, v)?;
        for e in graph.edge_ids() {
            let edge = graph.edge(e);
            let ends = [(edge.tail, 0), (edge.head, n_el - 1)];
            for (end, el) in ends {
                if end == v && element_owner[e.0][el] != g {
                    return Err(Error::InvalidPlan(format!(
                        "vertex {} is owned by {} but its element on edge {} is not",
                        graph.vertex(v).label,
                        plan.groups[g].label,
                        edge.label
                    )));
                }
            }
        }
    }

    let dofs = system.dofs();
    let m = plan.groups.len();
    let n = system.n_dof();
    let k = 1.0 / mesh.h;
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m];
    // adjacent element counts per dof and group
    let mut touch = vec![vec![0u32; n]; m];
    for e in graph.edge_ids() {
        for el in 0..n_el {
            let g = element_owner[e.0][el];
            let a = dofs.node_dof(graph, e, el);
            let b = dofs.node_dof(graph, e, el + 1);
            for (i, j, v) in [(a, a, k), (a, b, -k), (b, a, -k), (b, b, k)] {
                if let (Some(i), Some(j)) = (i, j) {
                    triplets[g].push((i, j, v));
                }
            }
            for d in [a, b].into_iter().flatten() {
                touch[g][d] += 1;
            }
        }
    }
    let mut weights = vec![vec![0.0; n]; m];
    for d in 0..n {
        let total: u32 = (0..m).map(|g| touch[g][d]).sum();
        for g in 0..m {
            weights[g][d] = touch[g][d] as f64 / total as f64;
        }
    }
    let parts = triplets.iter().map(|t| CsrMatrix::from_triplets(n, n, t)).collect();
    Ok((parts, weights))
}

pub fn build_overlapping(system: &FemSystem, plan: &GroupPlan) -> Result<Decomposition> {
    if plan.style != Style::Overlapping {
        return Err(Error::InvalidPlan("plan is not overlapping".into()));
    }
    plan.build(system)
}

pub fn build_nonoverlapping(system: &FemSystem, plan: &GroupPlan) -> Result<Decomposition> {
    if plan.style != Style::NonOverlapping {
        return Err(Error::InvalidPlan("plan is not non-overlapping".into()));
    }
    plan.build(system)
}

fn preset(graph: &MetricGraph, style: Style, spec: &[(&str, &[(u32, Portion)])]) -> Result<GroupPlan> {
    let mut groups = Vec::new();
    for &(label, members) in spec {
        let members = members
            .iter()
            .map(|&(e, portion)| Ok(GroupMember { edge: graph.edge_by_label(e)?, portion }))
            .collect::<Result<Vec<_>>>()?;
        groups.push(EdgeGroup { label: label.to_string(), members });
    }
    let mut owners = BTreeMap::new();
    for (g, v) in [1u32, 2, 3].into_iter().enumerate() {
        owners.insert(graph.vertex_by_label(v)?, g);
    }
    Ok(GroupPlan { style, groups, owners })
}

/// Three overlapping groups around the three junctions of [`crate::paper_graph`].
pub fn paper_overlap_3(graph: &MetricGraph) -> Result<GroupPlan> {
    use Portion::{Shared as S, Whole as W};
    preset(
        graph,
        Style::Overlapping,
        &[
            ("B1", &[(1, W), (2, W), (3, W), (4, S)]),
            ("B2", &[(4, S), (5, W), (6, W), (7, W), (8, S)]),
            ("B3", &[(8, S), (9, W), (10, W)]),
        ],
    )
}

/// Three non-overlapping groups; edges 4 and 8 are cut in two.
pub fn paper_nonoverlap_3(graph: &MetricGraph) -> Result<GroupPlan> {
    use Portion::{FirstHalf as F, SecondHalf as H, Whole as W};
    preset(
        graph,
        Style::NonOverlapping,
        &[
            ("G1", &[(1, W), (2, W), (3, W), (4, F)]),
            ("G2", &[(4, H), (5, W), (6, W), (7, W), (8, H)]),
            ("G3", &[(8, F), (9, W), (10, W)]),
        ],
    )
}
