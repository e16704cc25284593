//! Metric graphs: oriented edges with lengths, boundary flags and edge groups.
//!
//! Vertices and edges are addressed by their position (`VertexId`, `EdgeId`);
//! each also carries a user-facing integer label taken from the input.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub label: u32,
    pub boundary: bool,
    /// Edge in front of whose interior block this vertex's dof is stored.
    pub host: Option<EdgeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub label: u32,
    pub tail: VertexId,
    pub head: VertexId,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Portion {
    Whole,
    FirstHalf,
    SecondHalf,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupMember {
    pub edge: EdgeId,
    pub portion: Portion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGroup {
    pub label: String,
    pub members: Vec<GroupMember>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    groups: Vec<EdgeGroup>,
    incidence: BTreeMap<(EdgeId, VertexId), i8>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    UnknownVertex { edge: u32, vertex: u32 },
    NonPositiveLength { edge: u32, length: f64 },
    DuplicateLabel(String),
    BoundaryDegree { vertex: u32, degree: usize },
    InteriorDegree { vertex: u32, degree: usize },
    Disconnected { components: usize },
    BadHost { vertex: u32 },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::UnknownVertex { edge, vertex } => {
                write!(f, "edge {edge} references unknown vertex {vertex}")
            }
            Issue::NonPositiveLength { edge, length } => {
                write!(f, "edge {edge} has nonpositive length {length}")
            }
            Issue::DuplicateLabel(s) => write!(f, "duplicate label {s}"),
            Issue::BoundaryDegree { vertex, degree } => {
                write!(f, "boundary vertex {vertex} has degree {degree}, expected 1")
            }
            Issue::InteriorDegree { vertex, degree } => {
                write!(f, "interior vertex {vertex} has degree {degree}, expected at least 2")
            }
            Issue::Disconnected { components } => {
                write!(f, "graph is not connected ({components} components)")
            }
            Issue::BadHost { vertex } => {
                write!(f, "host edge of vertex {vertex} is not incident to it")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl MetricGraph {
    /// Builds a graph without validating it. Edges whose endpoints are out of
    /// range are kept so that `validate` can report them.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Self {
        let mut incidence = BTreeMap::new();
        for (k, e) in edges.iter().enumerate() {
            // a loop edge keeps the head sign
            incidence.insert((EdgeId(k), e.tail), -1);
            incidence.insert((EdgeId(k), e.head), 1);
        }
        Self {
            vertices,
            edges,
            groups: Vec::new(),
            incidence,
        }
    }

    /// Builds and validates a graph.
    pub fn checked(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        let g = Self::new(vertices, edges);
        g.validate().into_result()?;
        Ok(g)
    }

    pub fn with_groups(mut self, groups: Vec<EdgeGroup>) -> Self {
        self.groups = groups;
        self
    }

    /// The unit-free interval `[0, length]` as a one-edge graph.
    pub fn interval(length: f64) -> Self {
        let v = |label| Vertex { label, boundary: true, host: None };
        Self::new(
            vec![v(1), v(2)],
            vec![Edge { label: 1, tail: VertexId(0), head: VertexId(1), length }],
        )
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn groups(&self) -> &[EdgeGroup] {
        &self.groups
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len()).map(VertexId)
    }

    pub fn edge_by_label(&self, label: u32) -> Result<EdgeId> {
        self.edges
            .iter()
            .position(|e| e.label == label)
            .map(EdgeId)
            .ok_or(Error::UnknownEdge(label))
    }

    pub fn vertex_by_label(&self, label: u32) -> Result<VertexId> {
        self.vertices
            .iter()
            .position(|v| v.label == label)
            .map(VertexId)
            .ok_or(Error::UnknownVertex(label))
    }

    /// Incident edges in edge order. A loop edge appears twice.
    pub fn incident_edges(&self, v: VertexId) -> Vec<EdgeId> {
        let mut out = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            if e.tail == v {
                out.push(EdgeId(k));
            }
            if e.head == v {
                out.push(EdgeId(k));
            }
        }
        out
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident_edges(v).len()
    }

    /// Outward sign of edge `e` at vertex `v`: `+1` at the head (`x = l_e`),
    /// `-1` at the tail (`x = 0`).
    pub fn incidence(&self, e: EdgeId, v: VertexId) -> Option<i8> {
        self.incidence.get(&(e, v)).copied()
    }

    pub fn interior_vertices(&self) -> Vec<VertexId> {
        self.vertex_ids().filter(|&v| !self.vertex(v).boundary).collect()
    }

    /// Host edge of an interior vertex: the explicit `host`, else the first
    /// outgoing edge, else the first incident edge.
    pub fn host_edge(&self, v: VertexId) -> Option<EdgeId> {
        if let Some(h) = self.vertex(v).host {
            return Some(h);
        }
        let outgoing = self.edge_ids().find(|&e| self.edge(e).tail == v);
        outgoing.or_else(|| self.incident_edges(v).first().copied())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let nv = self.vertices.len();

        let mut seen = BTreeSet::new();
        for v in &self.vertices {
            if !seen.insert(v.label) {
                issues.push(Issue::DuplicateLabel(format!("vertex {}", v.label)));
            }
        }
        let mut seen = BTreeSet::new();
        let mut endpoints_ok = true;
        for e in &self.edges {
            if !seen.insert(e.label) {
                issues.push(Issue::DuplicateLabel(format!("edge {}", e.label)));
            }
            for end in [e.tail, e.head] {
                if end.0 >= nv {
                    endpoints_ok = false;
                    issues.push(Issue::UnknownVertex { edge: e.label, vertex: end.0 as u32 });
                }
            }
            if !(e.length > 0.0 && e.length.is_finite()) {
                issues.push(Issue::NonPositiveLength { edge: e.label, length: e.length });
            }
        }
        if !endpoints_ok {
            return ValidationReport { issues };
        }

        for v in self.vertex_ids() {
            let vert = self.vertex(v);
            let degree = self.degree(v);
            if vert.boundary && degree != 1 {
                issues.push(Issue::BoundaryDegree { vertex: vert.label, degree });
            }
            if !vert.boundary && degree < 2 {
                issues.push(Issue::InteriorDegree { vertex: vert.label, degree });
            }
            if let Some(h) = vert.host {
                if h.0 >= self.edges.len() || self.incidence(h, v).is_none() || vert.boundary {
                    issues.push(Issue::BadHost { vertex: vert.label });
                }
            }
        }

        let components = self.components();
        if components > 1 {
            issues.push(Issue::Disconnected { components });
        }
        ValidationReport { issues }
    }

    fn components(&self) -> usize {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.tail.0].push(e.head.0);
            adj[e.head.0].push(e.tail.0);
        }
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    /// Reads a graph from a TOML file.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: GraphFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_graph()
    }

    pub fn to_toml_string(&self) -> String {
        let file = GraphFile {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexEntry {
                    id: v.label,
                    boundary: v.boundary,
                    host: v.host.map(|h| self.edge(h).label),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeEntry {
                    id: e.label,
                    tail: self.vertex(e.tail).label,
                    head: self.vertex(e.head).label,
                    length: e.length,
                })
                .collect(),
            groups: self.groups.iter().map(|g| group_entry(self, g)).collect(),
        };
        toml::to_string(&file).expect("graph serializes")
    }
}

pub(crate) fn group_entry(g: &MetricGraph, group: &EdgeGroup) -> GroupEntry {
    GroupEntry {
        label: group.label.clone(),
        members: group
            .members
            .iter()
            .map(|m| MemberEntry { edge: g.edge(m.edge).label, portion: m.portion })
            .collect(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<VertexEntry>,
    edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    groups: Vec<GroupEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexEntry {
    id: u32,
    boundary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    host: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    id: u32,
    tail: u32,
    head: u32,
    length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GroupEntry {
    pub(crate) label: String,
    pub(crate) members: Vec<MemberEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct MemberEntry {
    pub(crate) edge: u32,
    pub(crate) portion: Portion,
}

impl GroupEntry {
    pub(crate) fn resolve(&self, g: &MetricGraph) -> Result<EdgeGroup> {
        let members = self
            .members
            .iter()
            .map(|m| Ok(GroupMember { edge: g.edge_by_label(m.edge)?, portion: m.portion }))
            .collect::<Result<Vec<_>>>()?;
        Ok(EdgeGroup { label: self.label.clone(), members })
    }
}

impl GraphFile {
    fn into_graph(self) -> Result<MetricGraph> {
        let mut index = BTreeMap::new();
        for (k, v) in self.vertices.iter().enumerate() {
            index.insert(v.id, k);
        }
        let mut edges = Vec::new();
        let mut issues = Vec::new();
        for e in &self.edges {
            let mut lookup = |label: u32| match index.get(&label) {
                Some(&k) => VertexId(k),
                None => {
                    issues.push(Issue::UnknownVertex { edge: e.id, vertex: label });
                    VertexId(usize::MAX)
                }
            };
            let tail = lookup(e.tail);
            let head = lookup(e.head);
            edges.push(Edge { label: e.id, tail, head, length: e.length });
        }
        if !issues.is_empty() {
            return Err(Error::InvalidGraph(ValidationReport { issues }.to_string()));
        }
        let mut vertices = Vec::new();
        for v in &self.vertices {
            let host = match v.host {
                Some(label) => Some(
                    edges
                        .iter()
                        .position(|e| e.label == label)
                        .map(EdgeId)
                        .ok_or(Error::UnknownEdge(label))?,
                ),
                None => None,
            };
            vertices.push(Vertex { label: v.id, boundary: v.boundary, host });
        }
        let graph = MetricGraph::new(vertices, edges);
        graph.validate().into_result()?;
        let groups = self
            .groups
            .iter()
            .map(|g| g.resolve(&graph))
            .collect::<Result<Vec<_>>>()?;
        Ok(graph.with_groups(groups))
    }
}

/// The ten-edge network with three junctions used throughout the examples.
///
/// Labels: edges 1..=10, vertices 1..=11 with 1..=3 interior. All edges have
/// length `length`. Junction dofs are stored in front of edges 4, 6 and 10.
pub fn paper_graph(length: f64) -> MetricGraph {
    // (tail, head) by vertex label
    const EDGES: [(u32, u32); 10] = [
        (4, 1),
        (1, 5),
        (1, 6),
        (1, 2),
        (2, 7),
        (2, 8),
        (2, 9),
        (3, 2),
        (10, 3),
        (3, 11),
    ];
    const HOSTS: [usize; 3] = [3, 5, 9];
    let vertices = (1..=11u32)
        .map(|label| Vertex {
            label,
            boundary: label > 3,
            host: if label <= 3 { Some(EdgeId(HOSTS[label as usize - 1])) } else { None },
        })
        .collect();
    let edges = EDGES
        .iter()
        .enumerate()
        .map(|(k, &(t, h))| Edge {
            label: k as u32 + 1,
            tail: VertexId(t as usize - 1),
            head: VertexId(h as usize - 1),
            length,
        })
        .collect();
    MetricGraph::new(vertices, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_graph_is_valid() {
        let g = paper_graph(1.0);
        assert!(g.validate().is_valid(), "{}", g.validate());
        let deg: Vec<usize> = (0..3).map(|k| g.degree(VertexId(k))).collect();
        assert_eq!(deg, vec![4, 5, 3]);
        for v in 3..11 {
            assert_eq!(g.degree(VertexId(v)), 1);
        }
    }

    #[test]
    fn incidence_signs() {
        let g = paper_graph(1.0);
        let e1 = g.edge_by_label(1).unwrap();
        let v1 = g.vertex_by_label(1).unwrap();
        let v4 = g.vertex_by_label(4).unwrap();
        assert_eq!(g.incidence(e1, v1), Some(1));
        assert_eq!(g.incidence(e1, v4), Some(-1));
        assert_eq!(g.incidence(e1, VertexId(1)), None);
    }

    #[test]
    fn default_host_is_first_outgoing_edge() {
        let mut g = paper_graph(1.0);
        g.vertices[0].host = None;
        assert_eq!(g.host_edge(VertexId(0)), Some(EdgeId(1)));
    }

    #[test]
    fn unknown_vertex_is_reported() {
        let text = r#"
            [[vertices]]
            id = 1
            boundary = true
            [[edges]]
            id = 1
            tail = 1
            head = 7
            length = 1.0
        "#;
        let err = MetricGraph::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("unknown vertex"), "{err}");
    }

    #[test]
    fn disconnected_graph_is_reported() {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for c in 0..2 {
            for k in 0..3 {
                vertices.push(Vertex { label: (3 * c + k + 1) as u32, boundary: false, host: None });
            }
            for k in 0..3 {
                edges.push(Edge {
                    label: (3 * c + k + 1) as u32,
                    tail: VertexId(3 * c + k),
                    head: VertexId(3 * c + (k + 1) % 3),
                    length: 1.0,
                });
            }
        }
        let report = MetricGraph::new(vertices, edges).validate();
        assert!(report.to_string().contains("not connected"), "{report}");
    }

    #[test]
    fn toml_round_trip() {
        let g = paper_graph(1.0);
        let text = g.to_toml_string();
        let h = MetricGraph::from_toml_str(&text).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = "[[vertices]]\nid = 1\nboundary = true\ncolour = 3\n";
        assert!(MetricGraph::from_toml_str(text).is_err());
    }
}
