//! Metric graphs with exact rational edge lengths.
//!
//! A [`MetricGraph`] is a finite connected model: a vertex set and a list of
//! edges, each with two *distinct* end vertices and a positive rational (or
//! infinite) length. Infinite edges end at designated leaf vertices; an edge
//! has infinite length exactly when one of its ends is such a leaf. Points of
//! the graph are vertices or interior edge positions at rational offsets, and
//! are kept in canonical form so equality of points is structural.
//!
//! Graphs are immutable after construction. Operations that change the model
//! ([`refine`](MetricGraph::refine), retraction, attachment) build new values
//! and return relabeling maps.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::{format_rat, Rat};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("graph is not connected")]
    NotConnected,
    #[error("edge `{0}` has equal end vertices; every edge needs two distinct ends")]
    EqualEnds(String),
    #[error("edge `{0}` has non-positive length")]
    NonPositiveLength(String),
    #[error("edge `{edge}` is finite but touches infinite leaf `{leaf}`")]
    FiniteEdgeAtLeaf { edge: String, leaf: String },
    #[error("edge `{0}` has infinite length but neither end is an infinite leaf")]
    InfiniteEdgeNoLeaf(String),
    #[error("infinite leaf `{0}` must have exactly one incident edge")]
    LeafValence(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("point is not on the graph: {0}")]
    PointOffGraph(String),
    #[error("point lies on an infinite edge: {0}")]
    PointOnInfiniteEdge(String),
    #[error("operation needs a graph without infinite edges (retract them first)")]
    HasInfiniteEdges,
    #[error("subgraph is not closed: edge `{0}` has an end outside the vertex set")]
    SubgraphNotClosed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Finite positive length or the infinity token. Infinity is a distinguished
/// value, never a large number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLength {
    Finite(Rat),
    Infinite,
}

impl EdgeLength {
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            EdgeLength::Finite(r) => Some(r),
            EdgeLength::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, EdgeLength::Infinite)
    }
}

impl fmt::Display for EdgeLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLength::Finite(r) => write!(f, "{}", format_rat(r)),
            EdgeLength::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub name: String,
    pub infinite_leaf: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub name: String,
    pub u: VertexId,
    pub v: VertexId,
    pub length: EdgeLength,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// A location on a metric graph: a vertex, or an interior edge position at a
/// rational offset measured from the edge's `u` end. Offsets `0` and `l(e)`
/// are normalized to the vertex form, so point equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    Vertex(VertexId),
    OnEdge { edge: EdgeId, offset: Rat },
}

impl Point {
    pub fn vertex(v: VertexId) -> Self {
        Point::Vertex(v)
    }
}

/// Which end of an edge a direction points toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Toward {
    U,
    V,
}

/// A tangent direction: the germ of an edge at a point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TangentDirection {
    pub base: Point,
    pub edge: EdgeId,
    pub toward: Toward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<EdgeId>>,
    vertex_names: BTreeMap<String, VertexId>,
    edge_names: BTreeMap<String, EdgeId>,
}

/// Incremental construction; `build` validates the model invariants.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, name: &str) -> VertexId {
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Vertex {
            name: name.to_string(),
            infinite_leaf: false,
        });
        id
    }

    pub fn infinite_leaf(&mut self, name: &str) -> VertexId {
        let id = self.vertex(name);
        self.vertices[id.0 as usize].infinite_leaf = true;
        id
    }

    pub fn edge(&mut self, name: &str, u: VertexId, v: VertexId, length: Rat) -> EdgeId {
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Edge {
            name: name.to_string(),
            u,
            v,
            length: EdgeLength::Finite(length),
        });
        id
    }

    pub fn infinite_edge(&mut self, name: &str, u: VertexId, leaf: VertexId) -> EdgeId {
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Edge {
            name: name.to_string(),
            u,
            v: leaf,
            length: EdgeLength::Infinite,
        });
        id
    }

    /// Attaches a circle of the given circumference at `at`, inserting an
    /// auxiliary antipodal vertex so both resulting edges have distinct ends.
    pub fn attach_loop(&mut self, name: &str, at: VertexId, circumference: Rat) -> VertexId {
        let half = circumference / crate::rat::rat_int(2);
        let aux = self.vertex(&format!("{name}_mid"));
        self.edge(&format!("{name}_a"), at, aux, half.clone());
        self.edge(&format!("{name}_b"), aux, at, half);
        aux
    }

    pub fn build(self) -> Result<MetricGraph, GraphError> {
        MetricGraph::new(self.vertices, self.edges)
    }
}

impl MetricGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut vertex_names = BTreeMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if vertex_names
                .insert(v.name.clone(), VertexId(i as u32))
                .is_some()
            {
                return Err(GraphError::DuplicateName(v.name.clone()));
            }
        }
        let mut edge_names = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            if edge_names.insert(e.name.clone(), EdgeId(i as u32)).is_some() {
                return Err(GraphError::DuplicateName(e.name.clone()));
            }
            if e.u == e.v {
                return Err(GraphError::EqualEnds(e.name.clone()));
            }
            match &e.length {
                EdgeLength::Finite(l) => {
                    if !crate::rat::is_positive(l) {
                        return Err(GraphError::NonPositiveLength(e.name.clone()));
                    }
                    for end in [e.u, e.v] {
                        if vertices[end.0 as usize].infinite_leaf {
                            return Err(GraphError::FiniteEdgeAtLeaf {
                                edge: e.name.clone(),
                                leaf: vertices[end.0 as usize].name.clone(),
                            });
                        }
                    }
                }
                EdgeLength::Infinite => {
                    let leaf_ends = [e.u, e.v]
                        .iter()
                        .filter(|x| vertices[x.0 as usize].infinite_leaf)
                        .count();
                    if leaf_ends == 0 {
                        return Err(GraphError::InfiniteEdgeNoLeaf(e.name.clone()));
                    }
                }
            }
            adjacency[e.u.0 as usize].push(EdgeId(i as u32));
            adjacency[e.v.0 as usize].push(EdgeId(i as u32));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.infinite_leaf && adjacency[i].len() != 1 {
                return Err(GraphError::LeafValence(v.name.clone()));
            }
        }
        let g = MetricGraph {
            vertices,
            edges,
            adjacency,
            vertex_names,
            edge_names,
        };
        if !g.is_connected() {
            return Err(GraphError::NotConnected);
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0 as usize]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0 as usize]
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len() as u32).map(VertexId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn incident_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.adjacency[v.0 as usize]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertex_names.get(name).copied()
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edge_names.get(name).copied()
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v.0 as usize].name
    }

    pub fn edge_name(&self, e: EdgeId) -> &str {
        &self.edges[e.0 as usize].name
    }

    pub fn has_infinite_edges(&self) -> bool {
        self.edges.iter().any(|e| e.length.is_infinite())
    }

    /// The base vertex used wherever a deterministic choice of vertex is
    /// needed: smallest by (name, id).
    pub fn base_vertex(&self) -> VertexId {
        *self
            .vertex_names
            .values()
            .min_by_key(|v| (self.vertex_name(**v).to_string(), v.0))
            .expect("nonempty graph")
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::new();
        seen[0] = true;
        queue.push_back(VertexId(0));
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &e in self.incident_edges(v) {
                let w = self.edge(e).other(v);
                if !seen[w.0 as usize] {
                    seen[w.0 as usize] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.vertices.len()
    }

    /// Validates a point and returns it in canonical form (endpoint offsets
    /// collapse to the vertex representation).
    pub fn canonical_point(&self, p: &Point) -> Result<Point, GraphError> {
        match p {
            Point::Vertex(v) => {
                if (v.0 as usize) < self.vertices.len() {
                    Ok(p.clone())
                } else {
                    Err(GraphError::PointOffGraph(format!("{v}")))
                }
            }
            Point::OnEdge { edge, offset } => {
                if (edge.0 as usize) >= self.edges.len() {
                    return Err(GraphError::PointOffGraph(format!("edge {}", edge.0)));
                }
                let e = self.edge(*edge);
                if offset.is_zero() {
                    return Ok(Point::Vertex(e.u));
                }
                if offset < &Rat::zero() {
                    return Err(GraphError::PointOffGraph(format!(
                        "{}@{}",
                        e.name,
                        format_rat(offset)
                    )));
                }
                match &e.length {
                    EdgeLength::Finite(l) => {
                        if offset == l {
                            Ok(Point::Vertex(e.v))
                        } else if offset < l {
                            Ok(p.clone())
                        } else {
                            Err(GraphError::PointOffGraph(format!(
                                "{}@{} exceeds length {}",
                                e.name,
                                format_rat(offset),
                                format_rat(l)
                            )))
                        }
                    }
                    // Interior points of an infinite edge at finite offset are
                    // genuine points; the far leaf itself is only reachable as
                    // the leaf vertex.
                    EdgeLength::Infinite => {
                        if self.vertex(e.u).infinite_leaf {
                            // orient so finite offsets measure from the finite end
                            Err(GraphError::PointOffGraph(format!(
                                "{}@{}: offsets on this edge measure from its finite end",
                                e.name,
                                format_rat(offset)
                            )))
                        } else {
                            Ok(p.clone())
                        }
                    }
                }
            }
        }
    }

    /// Tangent directions at a point.
    pub fn tangent_directions(&self, p: &Point) -> Result<Vec<TangentDirection>, GraphError> {
        let p = self.canonical_point(p)?;
        match &p {
            Point::Vertex(v) => Ok(self
                .incident_edges(*v)
                .iter()
                .flat_map(|&e| {
                    let edge = self.edge(e);
                    let mut dirs = Vec::new();
                    if edge.u == *v {
                        dirs.push(TangentDirection {
                            base: p.clone(),
                            edge: e,
                            toward: Toward::V,
                        });
                    }
                    if edge.v == *v {
                        dirs.push(TangentDirection {
                            base: p.clone(),
                            edge: e,
                            toward: Toward::U,
                        });
                    }
                    dirs
                })
                .collect()),
            Point::OnEdge { edge, .. } => Ok(vec![
                TangentDirection {
                    base: p.clone(),
                    edge: *edge,
                    toward: Toward::U,
                },
                TangentDirection {
                    base: p.clone(),
                    edge: *edge,
                    toward: Toward::V,
                },
            ]),
        }
    }

    /// Number of tangent directions at `p`.
    pub fn valence(&self, p: &Point) -> Result<usize, GraphError> {
        Ok(self.tangent_directions(p)?.len())
    }

    /// First Betti number `|E| - |V| + 1`; independent of the model.
    pub fn genus(&self) -> usize {
        self.edges.len() + 1 - self.vertices.len()
    }

    pub fn is_tree(&self) -> bool {
        self.genus() == 0
    }

    /// Renders a point as `name` or `edge@off`.
    pub fn point_name(&self, p: &Point) -> String {
        match p {
            Point::Vertex(v) => self.vertex_name(*v).to_string(),
            Point::OnEdge { edge, offset } => {
                format!("{}@{}", self.edge_name(*edge), format_rat(offset))
            }
        }
    }

    /// Subdivides edges so every point of `pts` is a vertex of the new model.
    /// Lengths of the parts sum to the original and the genus is unchanged.
    pub fn refine(&self, pts: &[Point]) -> Result<(MetricGraph, RefineMap), GraphError> {
        let mut cuts: BTreeMap<EdgeId, BTreeSet<Rat>> = BTreeMap::new();
        for p in pts {
            match self.canonical_point(p)? {
                Point::Vertex(_) => {}
                Point::OnEdge { edge, offset } => {
                    cuts.entry(edge).or_default().insert(offset);
                }
            }
        }
        let mut vertices = self.vertices.clone();
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_map: BTreeMap<EdgeId, Vec<(Rat, Rat, EdgeId)>> = BTreeMap::new();
        let mut cut_vertices: BTreeMap<(EdgeId, Rat), VertexId> = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            let old_id = EdgeId(i as u32);
            let empty = BTreeSet::new();
            let edge_cuts = cuts.get(&old_id).unwrap_or(&empty);
            if edge_cuts.is_empty() {
                let new_id = EdgeId(edges.len() as u32);
                edges.push(e.clone());
                let hi = match &e.length {
                    EdgeLength::Finite(l) => l.clone(),
                    EdgeLength::Infinite => Rat::zero(), // unused marker for infinite edges
                };
                edge_map.insert(old_id, vec![(Rat::zero(), hi, new_id)]);
                continue;
            }
            let mut segments = Vec::new();
            let mut prev = Rat::zero();
            let mut prev_vertex = e.u;
            let mut part = 0usize;
            for c in edge_cuts {
                let vid = VertexId(vertices.len() as u32);
                vertices.push(Vertex {
                    name: format!("{}_cut{}", e.name, part),
                    infinite_leaf: false,
                });
                cut_vertices.insert((old_id, c.clone()), vid);
                let new_id = EdgeId(edges.len() as u32);
                edges.push(Edge {
                    name: format!("{}_p{}", e.name, part),
                    u: prev_vertex,
                    v: vid,
                    length: EdgeLength::Finite(c - &prev),
                });
                segments.push((prev.clone(), c.clone(), new_id));
                prev = c.clone();
                prev_vertex = vid;
                part += 1;
            }
            let new_id = EdgeId(edges.len() as u32);
            let tail_len = match &e.length {
                EdgeLength::Finite(l) => EdgeLength::Finite(l - &prev),
                EdgeLength::Infinite => EdgeLength::Infinite,
            };
            let hi = match &e.length {
                EdgeLength::Finite(l) => l.clone(),
                EdgeLength::Infinite => prev.clone(), // symbolic upper end
            };
            edges.push(Edge {
                name: format!("{}_p{}", e.name, part),
                u: prev_vertex,
                v: e.v,
                length: tail_len,
            });
            segments.push((prev, hi, new_id));
            edge_map.insert(old_id, segments);
        }
        let graph = MetricGraph::new(vertices, edges)?;
        Ok((
            graph,
            RefineMap {
                edge_map,
                cut_vertices,
            },
        ))
    }

    /// Attaches a new infinite edge at `at` (refining first when `at` is an
    /// edge interior point). Returns the new graph and the refinement map
    /// embedding old points; vertex and edge ids of the old graph survive the
    /// refinement unchanged except on the subdivided edge.
    pub fn attach_infinite_edge(
        &self,
        at: &Point,
        ray_name: &str,
        leaf_name: &str,
    ) -> Result<(MetricGraph, RefineMap), GraphError> {
        let at = self.canonical_point(at)?;
        let (refined, map) = self.refine(std::slice::from_ref(&at))?;
        let site = map.image_vertex(&refined, &at);
        let mut vertices = refined.vertices.clone();
        let leaf = VertexId(vertices.len() as u32);
        vertices.push(Vertex {
            name: leaf_name.to_string(),
            infinite_leaf: true,
        });
        let mut edges = refined.edges.clone();
        edges.push(Edge {
            name: ray_name.to_string(),
            u: site,
            v: leaf,
            length: EdgeLength::Infinite,
        });
        let graph = MetricGraph::new(vertices, edges)?;
        Ok((graph, map))
    }

    /// Deletes infinite edges together with their leaf vertices. Points on
    /// the finite part are unaffected (a relabeling map is returned since
    /// vertex/edge ids shift).
    pub fn retract_infinite(&self) -> (MetricGraph, RetractMap) {
        let mut keep_vertex = BTreeMap::new();
        let mut vertices = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.infinite_leaf {
                keep_vertex.insert(VertexId(i as u32), VertexId(vertices.len() as u32));
                vertices.push(v.clone());
            }
        }
        let mut keep_edge = BTreeMap::new();
        let mut edges = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.length.is_infinite() {
                continue;
            }
            keep_edge.insert(EdgeId(i as u32), EdgeId(edges.len() as u32));
            edges.push(Edge {
                name: e.name.clone(),
                u: keep_vertex[&e.u],
                v: keep_vertex[&e.v],
                length: e.length.clone(),
            });
        }
        let graph = MetricGraph::new(vertices, edges).expect("finite part stays a valid model");
        (
            graph,
            RetractMap {
                vertex_map: keep_vertex,
                edge_map: keep_edge,
            },
        )
    }

    /// Exact shortest-path distance between two points, ignoring infinite
    /// edges (no finite path crosses an infinite leaf).
    pub fn distance(&self, a: &Point, b: &Point) -> Result<Rat, GraphError> {
        let a = self.canonical_point(a)?;
        let b = self.canonical_point(b)?;
        if a == b {
            return Ok(Rat::zero());
        }
        let (refined, map) = self.refine(&[a.clone(), b.clone()])?;
        let va = map.image_vertex(&refined, &a);
        let vb = map.image_vertex(&refined, &b);
        let dist = refined.vertex_distances(va);
        dist[vb.0 as usize]
            .clone()
            .ok_or(GraphError::PointOffGraph("no finite path".into()))
    }

    /// Dijkstra over finite edges from a vertex. `None` entries are
    /// unreachable through the finite part.
    pub fn vertex_distances(&self, from: VertexId) -> Vec<Option<Rat>> {
        let mut dist: Vec<Option<Rat>> = vec![None; self.vertices.len()];
        let mut heap: BinaryHeap<std::cmp::Reverse<(Rat, u32)>> = BinaryHeap::new();
        dist[from.0 as usize] = Some(Rat::zero());
        heap.push(std::cmp::Reverse((Rat::zero(), from.0)));
        while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
            if dist[v as usize].as_ref() != Some(&d) {
                continue;
            }
            for &e in self.incident_edges(VertexId(v)) {
                let edge = self.edge(e);
                let Some(l) = edge.length.finite() else {
                    continue;
                };
                let w = edge.other(VertexId(v));
                let nd = &d + l;
                let better = match &dist[w.0 as usize] {
                    None => true,
                    Some(old) => &nd < old,
                };
                if better {
                    dist[w.0 as usize] = Some(nd.clone());
                    heap.push(std::cmp::Reverse((nd, w.0)));
                }
            }
        }
        dist
    }
}

/// Relabeling produced by [`MetricGraph::refine`]: a bijection on points.
#[derive(Debug, Clone)]
pub struct RefineMap {
    /// old edge -> ordered segments (lo, hi, new edge); for infinite edges the
    /// final segment's `hi` is a placeholder and the segment extends to the leaf.
    edge_map: BTreeMap<EdgeId, Vec<(Rat, Rat, EdgeId)>>,
    cut_vertices: BTreeMap<(EdgeId, Rat), VertexId>,
}

impl RefineMap {
    /// Ordered segments `(lo, hi, new edge)` of an old edge.
    pub fn segments(&self, e: EdgeId) -> &[(Rat, Rat, EdgeId)] {
        &self.edge_map[&e]
    }

    /// The refined vertex created at a cut position, if any.
    pub fn cut_vertex(&self, e: EdgeId, offset: &Rat) -> Option<VertexId> {
        self.cut_vertices.get(&(e, offset.clone())).copied()
    }

    /// Maps an old point into the refined graph.
    pub fn map_point(&self, new_graph: &MetricGraph, p: &Point) -> Point {
        match p {
            Point::Vertex(v) => Point::Vertex(*v), // old vertex ids are stable under refine
            Point::OnEdge { edge, offset } => {
                if let Some(v) = self.cut_vertices.get(&(*edge, offset.clone())) {
                    return Point::Vertex(*v);
                }
                let segments = &self.edge_map[edge];
                for (i, (lo, hi, new_edge)) in segments.iter().enumerate() {
                    let last = i + 1 == segments.len();
                    if offset > lo && (last || offset < hi) {
                        return new_graph
                            .canonical_point(&Point::OnEdge {
                                edge: *new_edge,
                                offset: offset - lo,
                            })
                            .expect("refined offset stays on segment");
                    }
                }
                unreachable!("offset inside some segment")
            }
        }
    }

    /// Maps a refined point back to the original graph.
    pub fn unmap_point(&self, old_graph: &MetricGraph, p: &Point) -> Point {
        match p {
            Point::Vertex(v) => {
                if (v.0 as usize) < old_graph.vertex_count() {
                    return Point::Vertex(*v);
                }
                for ((old_edge, off), vid) in &self.cut_vertices {
                    if vid == v {
                        return Point::OnEdge {
                            edge: *old_edge,
                            offset: off.clone(),
                        };
                    }
                }
                unreachable!("refined vertex maps back")
            }
            Point::OnEdge { edge, offset } => {
                for (old_edge, segments) in &self.edge_map {
                    for (lo, _hi, new_edge) in segments {
                        if new_edge == edge {
                            return old_graph
                                .canonical_point(&Point::OnEdge {
                                    edge: *old_edge,
                                    offset: lo + offset,
                                })
                                .expect("offset stays on old edge");
                        }
                    }
                }
                unreachable!("refined edge maps back")
            }
        }
    }

    /// The refined point as a vertex id; the refinement must have been taken
    /// at that point.
    pub fn image_vertex(&self, new_graph: &MetricGraph, p: &Point) -> VertexId {
        match self.map_point(new_graph, p) {
            Point::Vertex(v) => v,
            Point::OnEdge { .. } => panic!("point was not part of the refinement set"),
        }
    }
}

/// Relabeling produced by [`MetricGraph::retract_infinite`].
#[derive(Debug, Clone)]
pub struct RetractMap {
    vertex_map: BTreeMap<VertexId, VertexId>,
    edge_map: BTreeMap<EdgeId, EdgeId>,
}

impl RetractMap {
    /// Maps a point of the original graph onto the retracted graph. Points on
    /// deleted infinite edges retract to the finite attachment vertex.
    pub fn map_point(&self, old_graph: &MetricGraph, p: &Point) -> Point {
        match p {
            Point::Vertex(v) => match self.vertex_map.get(v) {
                Some(nv) => Point::Vertex(*nv),
                None => {
                    // infinite leaf: retract along its unique edge
                    let e = old_graph.incident_edges(*v)[0];
                    let edge = old_graph.edge(e);
                    let site = if old_graph.vertex(edge.u).infinite_leaf {
                        edge.v
                    } else {
                        edge.u
                    };
                    Point::Vertex(self.vertex_map[&site])
                }
            },
            Point::OnEdge { edge, offset } => match self.edge_map.get(edge) {
                Some(ne) => Point::OnEdge {
                    edge: *ne,
                    offset: offset.clone(),
                },
                None => {
                    let e = old_graph.edge(*edge);
                    let site = if old_graph.vertex(e.u).infinite_leaf {
                        e.v
                    } else {
                        e.u
                    };
                    Point::Vertex(self.vertex_map[&site])
                }
            },
        }
    }

    pub fn map_edge(&self, e: EdgeId) -> Option<EdgeId> {
        self.edge_map.get(&e).copied()
    }

    pub fn map_vertex(&self, v: VertexId) -> Option<VertexId> {
        self.vertex_map.get(&v).copied()
    }
}

/// A closed subgraph of a model: a vertex subset plus whole edges whose ends
/// both lie in the subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedSubgraph {
    pub vertices: BTreeSet<VertexId>,
    pub edges: BTreeSet<EdgeId>,
}

impl ClosedSubgraph {
    pub fn new(
        graph: &MetricGraph,
        vertices: BTreeSet<VertexId>,
        edges: BTreeSet<EdgeId>,
    ) -> Result<Self, GraphError> {
        for &e in &edges {
            let edge = graph.edge(e);
            if !vertices.contains(&edge.u) || !vertices.contains(&edge.v) {
                return Err(GraphError::SubgraphNotClosed(edge.name.clone()));
            }
        }
        Ok(ClosedSubgraph { vertices, edges })
    }

    /// Total length of the subgraph's edges; `None` if any is infinite.
    pub fn total_length(&self, graph: &MetricGraph) -> Option<Rat> {
        let mut sum = Rat::zero();
        for &e in &self.edges {
            sum += graph.edge(e).length.finite()?;
        }
        Some(sum)
    }

    fn degree_within(&self, graph: &MetricGraph, v: VertexId) -> usize {
        graph
            .incident_edges(v)
            .iter()
            .filter(|e| self.edges.contains(e))
            .map(|&e| {
                let edge = graph.edge(e);
                // parallel germ count: an edge contributes one germ per end at v
                usize::from(edge.u == v) + usize::from(edge.v == v)
            })
            .sum()
    }

    fn is_connected(&self, graph: &MetricGraph) -> bool {
        let Some(&start) = self.vertices.iter().next() else {
            return false;
        };
        let mut seen = BTreeSet::new();
        seen.insert(start);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &e in graph.incident_edges(v) {
                if !self.edges.contains(&e) {
                    continue;
                }
                let w = graph.edge(e).other(v);
                if self.vertices.contains(&w) && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == self.vertices.len()
    }
}

/// True iff `sub` is homeomorphic to a circle: connected, nonempty, and every
/// point of it has valence 2 within the subgraph.
pub fn is_loop_subgraph(graph: &MetricGraph, sub: &ClosedSubgraph) -> bool {
    if sub.edges.is_empty() || sub.vertices.is_empty() {
        return false;
    }
    if !sub.is_connected(graph) {
        return false;
    }
    sub.vertices
        .iter()
        .all(|&v| sub.degree_within(graph, v) == 2)
}

/// All loops (circle subgraphs) of the model, found by cycle enumeration.
/// Intended for small graphs; the verification suite's targets qualify.
pub fn enumerate_loops(graph: &MetricGraph) -> Vec<ClosedSubgraph> {
    let mut found: BTreeSet<BTreeSet<EdgeId>> = BTreeSet::new();
    // walk simple cycles by DFS over edges, anchored at each start vertex
    for start in graph.vertex_ids() {
        let mut stack: Vec<(VertexId, Vec<EdgeId>)> = vec![(start, Vec::new())];
        while let Some((v, path)) = stack.pop() {
            for &e in graph.incident_edges(v) {
                if graph.edge(e).length.is_infinite() {
                    continue;
                }
                if path.contains(&e) {
                    continue;
                }
                let w = graph.edge(e).other(v);
                if w == start && !path.is_empty() {
                    let mut cycle: BTreeSet<EdgeId> = path.iter().copied().collect();
                    cycle.insert(e);
                    found.insert(cycle);
                    continue;
                }
                // vertices may not repeat along the walk
                let revisits = path.iter().any(|&pe| {
                    let pedge = graph.edge(pe);
                    pedge.u == w || pedge.v == w
                }) || w == start;
                if !revisits {
                    let mut next = path.clone();
                    next.push(e);
                    stack.push((w, next));
                }
            }
        }
    }
    found
        .into_iter()
        .filter_map(|edges| {
            let mut vertices = BTreeSet::new();
            for &e in &edges {
                vertices.insert(graph.edge(e).u);
                vertices.insert(graph.edge(e).v);
            }
            let sub = ClosedSubgraph { vertices, edges };
            is_loop_subgraph(graph, &sub).then_some(sub)
        })
        .collect()
}

/// Shared handle used across the crate; graphs are immutable so sharing is
/// safe from any thread.
pub type GraphRef = Arc<MetricGraph>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};

    fn theta(a: i64, b: i64, c: i64) -> MetricGraph {
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.edge("e0", v1, v2, rat_int(a));
        gb.edge("e1", v1, v2, rat_int(b));
        gb.edge("e2", v1, v2, rat_int(c));
        gb.build().unwrap()
    }

    fn circle() -> MetricGraph {
        let mut gb = GraphBuilder::new();
        let v = gb.vertex("v");
        let w = gb.vertex("w");
        gb.edge("c0", v, w, rat(1, 2));
        gb.edge("c1", w, v, rat(1, 2));
        gb.build().unwrap()
    }

    #[test]
    fn genus_and_valence() {
        let g = theta(2, 3, 5);
        assert_eq!(g.genus(), 2);
        let v1 = g.vertex_by_name("v1").unwrap();
        assert_eq!(g.valence(&Point::Vertex(v1)).unwrap(), 3);
        let interior = Point::OnEdge {
            edge: g.edge_by_name("e0").unwrap(),
            offset: rat(1, 3),
        };
        assert_eq!(g.valence(&interior).unwrap(), 2);
        let c = circle();
        assert_eq!(c.genus(), 1);
        let p = Point::OnEdge {
            edge: c.edge_by_name("c0").unwrap(),
            offset: rat(1, 4),
        };
        assert_eq!(c.valence(&p).unwrap(), 2);
        assert_eq!(
            c.valence(&Point::Vertex(c.vertex_by_name("v").unwrap()))
                .unwrap(),
            2
        );
    }

    #[test]
    fn tree_is_genus_zero() {
        let mut gb = GraphBuilder::new();
        let a = gb.vertex("a");
        let b = gb.vertex("b");
        let c = gb.vertex("c");
        gb.edge("e0", a, b, rat_int(1));
        gb.edge("e1", b, c, rat_int(2));
        let g = gb.build().unwrap();
        assert_eq!(g.genus(), 0);
        assert!(g.is_tree());
    }

    #[test]
    fn rejects_bad_models() {
        let mut gb = GraphBuilder::new();
        let a = gb.vertex("a");
        gb.edge("e", a, a, rat_int(1));
        assert!(matches!(gb.build(), Err(GraphError::EqualEnds(_))));

        let mut gb = GraphBuilder::new();
        let a = gb.vertex("a");
        let b = gb.vertex("b");
        gb.edge("e", a, b, rat_int(0));
        assert!(matches!(gb.build(), Err(GraphError::NonPositiveLength(_))));

        let mut gb = GraphBuilder::new();
        gb.vertex("a");
        gb.vertex("b");
        assert!(matches!(gb.build(), Err(GraphError::NotConnected)));
    }

    #[test]
    fn point_canonicalization() {
        let g = theta(2, 3, 5);
        let e0 = g.edge_by_name("e0").unwrap();
        let at_zero = g
            .canonical_point(&Point::OnEdge {
                edge: e0,
                offset: rat_int(0),
            })
            .unwrap();
        assert_eq!(at_zero, Point::Vertex(g.vertex_by_name("v1").unwrap()));
        let at_end = g
            .canonical_point(&Point::OnEdge {
                edge: e0,
                offset: rat_int(2),
            })
            .unwrap();
        assert_eq!(at_end, Point::Vertex(g.vertex_by_name("v2").unwrap()));
        assert!(g
            .canonical_point(&Point::OnEdge {
                edge: e0,
                offset: rat_int(3),
            })
            .is_err());
    }

    #[test]
    fn refine_preserves_genus_and_lengths() {
        let c = circle();
        let p = Point::OnEdge {
            edge: c.edge_by_name("c0").unwrap(),
            offset: rat(1, 3),
        };
        let (r, map) = c.refine(&[p.clone()]).unwrap();
        assert_eq!(r.genus(), 1);
        let img = map.map_point(&r, &p);
        assert!(matches!(img, Point::Vertex(_)));
        // arcs around the circle from the base vertex: 1/3 and 2/3
        let v = Point::Vertex(r.vertex_by_name("v").unwrap());
        let d = r.distance(&v, &img).unwrap();
        assert_eq!(d, rat(1, 3));
        // total circumference still 1
        let total: Rat = r
            .edge_ids()
            .map(|e| r.edge(e).length.finite().unwrap().clone())
            .sum();
        assert_eq!(total, rat_int(1));
    }

    #[test]
    fn refine_empty_is_identity() {
        let g = theta(2, 3, 5);
        let (r, _) = g.refine(&[]).unwrap();
        assert_eq!(r, g);
    }

    #[test]
    fn refine_roundtrips_points() {
        let g = theta(2, 3, 5);
        let e1 = g.edge_by_name("e1").unwrap();
        let cut = Point::OnEdge {
            edge: e1,
            offset: rat(3, 2),
        };
        let (r, map) = g.refine(&[cut]).unwrap();
        let probe = Point::OnEdge {
            edge: e1,
            offset: rat(7, 4),
        };
        let img = map.map_point(&r, &probe);
        assert_eq!(map.unmap_point(&g, &img), probe);
    }

    #[test]
    fn distances_are_exact_symmetric() {
        let g = theta(2, 3, 5);
        let v1 = Point::Vertex(g.vertex_by_name("v1").unwrap());
        let m1 = Point::OnEdge {
            edge: g.edge_by_name("e1").unwrap(),
            offset: rat(3, 2),
        };
        assert_eq!(g.distance(&v1, &m1).unwrap(), rat(3, 2));
        assert_eq!(g.distance(&m1, &v1).unwrap(), rat(3, 2));
        let v2 = Point::Vertex(g.vertex_by_name("v2").unwrap());
        assert_eq!(g.distance(&v1, &v2).unwrap(), rat_int(2));
    }

    #[test]
    fn loop_subgraph_detection() {
        let g = theta(2, 3, 5);
        let v1 = g.vertex_by_name("v1").unwrap();
        let v2 = g.vertex_by_name("v2").unwrap();
        let e0 = g.edge_by_name("e0").unwrap();
        let e1 = g.edge_by_name("e1").unwrap();
        let sub = ClosedSubgraph::new(&g, BTreeSet::from([v1, v2]), BTreeSet::from([e0, e1]))
            .unwrap();
        assert!(is_loop_subgraph(&g, &sub));
        // the whole theta has valence-3 points
        let all = ClosedSubgraph::new(
            &g,
            g.vertex_ids().collect(),
            g.edge_ids().collect(),
        )
        .unwrap();
        assert!(!is_loop_subgraph(&g, &all));
        // a single edge with its ends is a tree, not a loop
        let single =
            ClosedSubgraph::new(&g, BTreeSet::from([v1, v2]), BTreeSet::from([e0])).unwrap();
        assert!(!is_loop_subgraph(&g, &single));
        assert_eq!(enumerate_loops(&g).len(), 3);
    }

    #[test]
    fn infinite_edges_and_retraction() {
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.edge("e0", v1, v2, rat_int(2));
        gb.edge("e1", v1, v2, rat_int(3));
        let leaf = gb.infinite_leaf("linf");
        gb.infinite_edge("r0", v1, leaf);
        let g = gb.build().unwrap();
        assert_eq!(g.genus(), 1);
        assert!(g.has_infinite_edges());
        let (fin, map) = g.retract_infinite();
        assert_eq!(fin.genus(), 1);
        assert!(!fin.has_infinite_edges());
        let retracted = map.map_point(&g, &Point::Vertex(leaf));
        assert_eq!(retracted, Point::Vertex(fin.vertex_by_name("v1").unwrap()));
        let ray_pt = map.map_point(
            &g,
            &Point::OnEdge {
                edge: g.edge_by_name("r0").unwrap(),
                offset: rat_int(7),
            },
        );
        assert_eq!(ray_pt, Point::Vertex(fin.vertex_by_name("v1").unwrap()));
    }

    #[test]
    fn leaf_invariants_enforced() {
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let leaf = gb.infinite_leaf("linf");
        gb.edge("e0", v1, leaf, rat_int(1));
        assert!(matches!(
            gb.build(),
            Err(GraphError::FiniteEdgeAtLeaf { .. })
        ));

        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.infinite_edge("e0", v1, v2);
        assert!(matches!(gb.build(), Err(GraphError::InfiniteEdgeNoLeaf(_))));
    }
}
