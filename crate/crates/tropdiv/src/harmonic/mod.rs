//! Morphisms of metric graphs with dilation factors.
//!
//! A [`GraphMorphism`] is stored in common-refinement form: every source edge
//! either collapses to a target vertex or maps onto exactly one target edge,
//! stretched by an integer dilation factor (`l(image) = d * l(edge)`).
//! Harmonicity is checked at the vertices (edge interiors are automatically
//! balanced in this form): at each source vertex, every tangent direction of
//! the image point must receive the same dilation sum, and the fiber sums of
//! those local degrees must agree across all target vertices and edges.
//!
//! The subtree predicate of the degree bound argument and the exhaustive
//! search for degree-2 quotients live in [`search`] and [`lemma3_predicate`].

pub mod search;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::metric_graph::{
    enumerate_loops, ClosedSubgraph, EdgeId, EdgeLength, GraphError, GraphRef, Point, Toward,
    VertexId,
};
use crate::rat::{format_rat, Rat};

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("not a morphism: {0}")]
    NotAMorphism(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

/// Where a source edge goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgeImage {
    /// onto a target edge, with orientation and dilation factor >= 1
    Onto {
        edge: EdgeId,
        reversed: bool,
        dilation: u32,
    },
    /// collapsed to a target vertex (dilation 0)
    Collapsed(VertexId),
}

/// A combinatorial morphism between two models in common-refinement form.
#[derive(Debug, Clone)]
pub struct GraphMorphism {
    pub source: GraphRef,
    pub target: GraphRef,
    pub vertex_map: BTreeMap<VertexId, VertexId>,
    pub edge_map: BTreeMap<EdgeId, EdgeImage>,
}

/// Violation found while validating structure or harmonicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HarmonicViolation {
    Structural(String),
    NotSurjective(String),
    Unbalanced {
        vertex: String,
        detail: String,
    },
    DegreeMismatch {
        place: String,
        expected: i64,
        got: i64,
    },
}

impl std::fmt::Display for HarmonicViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HarmonicViolation::Structural(s) => write!(f, "structural: {s}"),
            HarmonicViolation::NotSurjective(s) => write!(f, "not surjective: {s}"),
            HarmonicViolation::Unbalanced { vertex, detail } => {
                write!(f, "unbalanced at {vertex}: {detail}")
            }
            HarmonicViolation::DegreeMismatch {
                place,
                expected,
                got,
            } => write!(f, "degree mismatch at {place}: {got} != {expected}"),
        }
    }
}

/// Per-point bookkeeping of a verified harmonic morphism.
#[derive(Debug, Clone)]
pub struct HarmonicCertificate {
    pub degree: i64,
    /// local degree at every source vertex
    pub local_degrees: BTreeMap<VertexId, i64>,
    /// dilation sum over every target edge (fiber count over edge interiors)
    pub edge_coverage: BTreeMap<EdgeId, i64>,
}

/// A tangent direction of the target, keyed combinatorially.
type TargetGerm = (EdgeId, Toward);

impl GraphMorphism {
    pub fn identity(graph: &GraphRef) -> Self {
        GraphMorphism {
            source: graph.clone(),
            target: graph.clone(),
            vertex_map: graph.vertex_ids().map(|v| (v, v)).collect(),
            edge_map: graph
                .edge_ids()
                .map(|e| {
                    (
                        e,
                        EdgeImage::Onto {
                            edge: e,
                            reversed: false,
                            dilation: 1,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Structural validation: total maps, endpoint consistency, exact length
    /// compatibility `l(image) = d * l(edge)`.
    pub fn check_morphism(&self) -> Result<(), HarmonicViolation> {
        for v in self.source.vertex_ids() {
            let Some(w) = self.vertex_map.get(&v) else {
                return Err(HarmonicViolation::Structural(format!(
                    "vertex {} has no image",
                    self.source.vertex_name(v)
                )));
            };
            if (w.0 as usize) >= self.target.vertex_count() {
                return Err(HarmonicViolation::Structural(format!(
                    "vertex {} maps outside the target",
                    self.source.vertex_name(v)
                )));
            }
        }
        for e in self.source.edge_ids() {
            let edge = self.source.edge(e);
            let Some(img) = self.edge_map.get(&e) else {
                return Err(HarmonicViolation::Structural(format!(
                    "edge {} has no image",
                    edge.name
                )));
            };
            let fu = self.vertex_map[&edge.u];
            let fv = self.vertex_map[&edge.v];
            match img {
                EdgeImage::Collapsed(w) => {
                    if fu != *w || fv != *w {
                        return Err(HarmonicViolation::Structural(format!(
                            "edge {} collapses to {} but its ends map elsewhere",
                            edge.name,
                            self.target.vertex_name(*w)
                        )));
                    }
                }
                EdgeImage::Onto {
                    edge: f,
                    reversed,
                    dilation,
                } => {
                    if *dilation == 0 {
                        return Err(HarmonicViolation::Structural(format!(
                            "edge {} maps onto an edge with dilation 0",
                            edge.name
                        )));
                    }
                    if (f.0 as usize) >= self.target.edge_count() {
                        return Err(HarmonicViolation::Structural(format!(
                            "edge {} maps outside the target",
                            edge.name
                        )));
                    }
                    let fe = self.target.edge(*f);
                    let (want_u, want_v) = if *reversed {
                        (fe.v, fe.u)
                    } else {
                        (fe.u, fe.v)
                    };
                    if fu != want_u || fv != want_v {
                        return Err(HarmonicViolation::Structural(format!(
                            "edge {} maps onto {} but endpoint images disagree",
                            edge.name, fe.name
                        )));
                    }
                    match (&edge.length, &fe.length) {
                        (EdgeLength::Finite(a), EdgeLength::Finite(b)) => {
                            let scaled = a * crate::rat::rat_int(*dilation as i64);
                            if &scaled != b {
                                return Err(HarmonicViolation::Structural(format!(
                                    "length clash on {}: {} * {} != {}",
                                    edge.name,
                                    dilation,
                                    format_rat(a),
                                    format_rat(b)
                                )));
                            }
                        }
                        (EdgeLength::Infinite, EdgeLength::Infinite) => {}
                        _ => {
                            return Err(HarmonicViolation::Structural(format!(
                                "edge {} mixes finite and infinite lengths with its image",
                                edge.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_morphism(&self) -> bool {
        self.check_morphism().is_ok()
    }

    /// Finite: no edge collapses.
    pub fn is_finite(&self) -> bool {
        self.check_morphism().is_ok()
            && self
                .edge_map
                .values()
                .all(|img| matches!(img, EdgeImage::Onto { .. }))
    }

    /// Image germ of the source germ `(edge e', at end vertex x)`.
    fn image_germ(&self, e: EdgeId, from: VertexId) -> Option<(TargetGerm, u32)> {
        match &self.edge_map[&e] {
            EdgeImage::Collapsed(_) => None,
            EdgeImage::Onto {
                edge: f,
                reversed,
                dilation,
            } => {
                let edge = self.source.edge(e);
                let from_u = edge.u == from;
                let toward = match (from_u, reversed) {
                    (true, false) => Toward::V,
                    (true, true) => Toward::U,
                    (false, false) => Toward::U,
                    (false, true) => Toward::V,
                };
                Some(((*f, toward), *dilation))
            }
        }
    }

    /// Target germs at a target vertex.
    fn target_germs(&self, p: VertexId) -> Vec<TargetGerm> {
        let mut out = Vec::new();
        for &f in self.target.incident_edges(p) {
            let fe = self.target.edge(f);
            if fe.u == p {
                out.push((f, Toward::V));
            }
            if fe.v == p {
                out.push((f, Toward::U));
            }
        }
        out.sort();
        out
    }

    /// Full harmonicity check: structure, surjectivity, direction balance at
    /// every source vertex, and constancy of the fiber degree over target
    /// vertices and edges.
    pub fn check_harmonic(&self) -> Result<HarmonicCertificate, HarmonicViolation> {
        self.check_morphism()?;
        // surjectivity onto edges
        let mut edge_coverage: BTreeMap<EdgeId, i64> = BTreeMap::new();
        for img in self.edge_map.values() {
            if let EdgeImage::Onto { edge, dilation, .. } = img {
                *edge_coverage.entry(*edge).or_insert(0) += *dilation as i64;
            }
        }
        for f in self.target.edge_ids() {
            if !edge_coverage.contains_key(&f) {
                return Err(HarmonicViolation::NotSurjective(format!(
                    "target edge {} is not covered",
                    self.target.edge_name(f)
                )));
            }
        }
        // local degrees at source vertices
        let mut local_degrees: BTreeMap<VertexId, i64> = BTreeMap::new();
        for v in self.source.vertex_ids() {
            let image = self.vertex_map[&v];
            let mut sums: BTreeMap<TargetGerm, i64> = BTreeMap::new();
            for germ in self.target_germs(image) {
                sums.insert(germ, 0);
            }
            for &e in self.source.incident_edges(v) {
                let edge = self.source.edge(e);
                // parallel germ handling: an edge incident twice contributes
                // one germ per end, but ends are distinct by the model
                let ends = [(edge.u == v).then_some(edge.u), (edge.v == v).then_some(edge.v)];
                for end in ends.into_iter().flatten() {
                    if let Some((germ, d)) = self.image_germ(e, end) {
                        let Some(slot) = sums.get_mut(&germ) else {
                            return Err(HarmonicViolation::Structural(format!(
                                "edge {} maps to a germ not present at the image of {}",
                                edge.name,
                                self.source.vertex_name(v)
                            )));
                        };
                        *slot += d as i64;
                    }
                }
            }
            let mut values: Vec<i64> = sums.values().copied().collect();
            values.sort();
            values.dedup();
            match values.as_slice() {
                [] => {
                    // image vertex is isolated; only possible on degenerate targets
                    local_degrees.insert(v, 0);
                }
                [d] => {
                    local_degrees.insert(v, *d);
                }
                _ => {
                    let table = sums
                        .iter()
                        .map(|((f, t), s)| {
                            format!(
                                "{}:{}={}",
                                self.target.edge_name(*f),
                                match t {
                                    Toward::U => "u",
                                    Toward::V => "v",
                                },
                                s
                            )
                        })
                        .collect::<Vec<_>>()
                        .join(", ");
                    return Err(HarmonicViolation::Unbalanced {
                        vertex: self.source.vertex_name(v).to_string(),
                        detail: table,
                    });
                }
            }
        }
        // global degree: fibers over target vertices
        let mut fiber: BTreeMap<VertexId, i64> = BTreeMap::new();
        for (v, w) in &self.vertex_map {
            *fiber.entry(*w).or_insert(0) += local_degrees[v];
        }
        let mut degree: Option<i64> = None;
        for p in self.target.vertex_ids() {
            let got = fiber.get(&p).copied().unwrap_or(0);
            if got == 0 {
                return Err(HarmonicViolation::NotSurjective(format!(
                    "target vertex {} has an empty fiber",
                    self.target.vertex_name(p)
                )));
            }
            match degree {
                None => degree = Some(got),
                Some(d) if d == got => {}
                Some(d) => {
                    return Err(HarmonicViolation::DegreeMismatch {
                        place: self.target.vertex_name(p).to_string(),
                        expected: d,
                        got,
                    });
                }
            }
        }
        let degree = degree.unwrap_or(0);
        // fibers over edge interiors: dilation-weighted coverage
        for (f, cov) in &edge_coverage {
            if *cov != degree {
                return Err(HarmonicViolation::DegreeMismatch {
                    place: self.target.edge_name(*f).to_string(),
                    expected: degree,
                    got: *cov,
                });
            }
        }
        Ok(HarmonicCertificate {
            degree,
            local_degrees,
            edge_coverage,
        })
    }

    /// `(true, certificate)` or `(false, violation)`, as a convenience shape.
    pub fn is_harmonic(&self) -> (bool, Result<HarmonicCertificate, HarmonicViolation>) {
        let r = self.check_harmonic();
        (r.is_ok(), r)
    }
}

/// Outcome of the subtree-into-loop predicate, with the growth chain that
/// demonstrates a violation when one exists.
#[derive(Debug, Clone)]
pub struct Lemma3Outcome {
    pub verdict: bool,
    pub reason: String,
    pub chain: Vec<String>,
}

/// Checks that no non-point subtree of `t_prime` maps into a loop of the
/// target. `t_prime` must be a tree hanging off the rest of the source at the
/// single cut vertex `t`. When a seed subtree mapped into a loop exists, the
/// forced harmonic extensions are replayed until the total length exceeds
/// `deg * l(loop)`, and the predicate reports `false` with that chain.
pub fn lemma3_predicate(
    m: &GraphMorphism,
    t_prime: &ClosedSubgraph,
    t: &Point,
) -> Result<Lemma3Outcome, HarmonicError> {
    // the predicate prunes candidates, so only structural validity is
    // demanded up front; harmonicity is consumed locally by the growth step
    m.check_morphism()
        .map_err(|v| HarmonicError::NotAMorphism(v.to_string()))?;
    if !m.is_finite() {
        return Err(HarmonicError::Hypothesis(
            "the morphism must be finite".into(),
        ));
    }
    // for harmonic candidates this is the degree; in general it bounds it
    let degree_bound: i64 = {
        let mut coverage: BTreeMap<EdgeId, i64> = BTreeMap::new();
        for img in m.edge_map.values() {
            if let EdgeImage::Onto { edge, dilation, .. } = img {
                *coverage.entry(*edge).or_insert(0) += *dilation as i64;
            }
        }
        coverage.values().copied().max().unwrap_or(1)
    };
    let t_vertex = match m.source.canonical_point(t)? {
        Point::Vertex(v) => v,
        Point::OnEdge { .. } => {
            return Err(HarmonicError::Hypothesis(
                "the cut point must be a vertex of the model".into(),
            ));
        }
    };
    if !t_prime.vertices.contains(&t_vertex) {
        return Err(HarmonicError::Hypothesis(
            "the cut point must belong to the subtree".into(),
        ));
    }
    // T' is a tree
    if t_prime.edges.len() + 1 != t_prime.vertices.len() {
        return Err(HarmonicError::Hypothesis(
            "the subgraph is not a tree".into(),
        ));
    }
    // the closure of the complement is connected and meets T' only in t
    let comp_edges: BTreeSet<EdgeId> = m
        .source
        .edge_ids()
        .filter(|e| !t_prime.edges.contains(e))
        .collect();
    let mut comp_vertices: BTreeSet<VertexId> = BTreeSet::new();
    for &e in &comp_edges {
        comp_vertices.insert(m.source.edge(e).u);
        comp_vertices.insert(m.source.edge(e).v);
    }
    let overlap: Vec<VertexId> = comp_vertices
        .intersection(&t_prime.vertices)
        .copied()
        .collect();
    if overlap != [t_vertex] {
        return Err(HarmonicError::Hypothesis(format!(
            "the complement closure meets the subtree in {} points, not exactly the cut point",
            overlap.len()
        )));
    }
    if !comp_edges.is_empty() {
        let comp = ClosedSubgraph::new(&m.source, comp_vertices, comp_edges.clone())?;
        if !subgraph_connected(&m.source, &comp) {
            return Err(HarmonicError::Hypothesis(
                "the complement closure is not connected".into(),
            ));
        }
    }

    let loops = enumerate_loops(&m.target);
    for circle in &loops {
        // seed: edges of T' mapping into this loop
        let seeds: BTreeSet<EdgeId> = t_prime
            .edges
            .iter()
            .copied()
            .filter(|e| match &m.edge_map[e] {
                EdgeImage::Onto { edge, .. } => circle.edges.contains(edge),
                EdgeImage::Collapsed(_) => false,
            })
            .collect();
        let Some(&start) = seeds.iter().next() else {
            continue;
        };
        // grow the component of `start` by the forced harmonic extensions
        let mut tree_edges: BTreeSet<EdgeId> = BTreeSet::new();
        let mut frontier = vec![start];
        while let Some(e) = frontier.pop() {
            if tree_edges.insert(e) {
                for other in seeds.iter() {
                    if tree_edges.contains(other) {
                        continue;
                    }
                    let a = m.source.edge(e);
                    let b = m.source.edge(*other);
                    if a.u == b.u || a.u == b.v || a.v == b.u || a.v == b.v {
                        frontier.push(*other);
                    }
                }
            }
        }
        let loop_len = circle
            .total_length(&m.target)
            .expect("loops have finite length");
        let bound = &loop_len * crate::rat::rat_int(degree_bound);
        let mut chain: Vec<String> = vec![format!(
            "seed subtree of {} edge(s) maps into loop of length {}",
            tree_edges.len(),
            format_rat(&loop_len)
        )];
        loop {
            let total: Rat = tree_edges
                .iter()
                .map(|e| {
                    m.source
                        .edge(*e)
                        .length
                        .finite()
                        .cloned()
                        .unwrap_or_else(|| bound.clone() + crate::rat::rat_int(1))
                })
                .sum();
            if total > bound {
                chain.push(format!(
                    "subtree length {} exceeds degree * loop length = {}",
                    format_rat(&total),
                    format_rat(&bound)
                ));
                return Ok(Lemma3Outcome {
                    verdict: false,
                    reason: "a non-point subtree maps into a target loop; forced growth violates the length bound"
                        .into(),
                    chain,
                });
            }
            // pick a valence-1 vertex of the current subtree other than t
            let mut degree_in: BTreeMap<VertexId, usize> = BTreeMap::new();
            for &e in &tree_edges {
                *degree_in.entry(m.source.edge(e).u).or_insert(0) += 1;
                *degree_in.entry(m.source.edge(e).v).or_insert(0) += 1;
            }
            let Some((&q, _)) = degree_in
                .iter()
                .find(|(v, d)| **d == 1 && **v != t_vertex)
            else {
                return Ok(Lemma3Outcome {
                    verdict: false,
                    reason: "a subtree maps into a target loop and all of its leaves sit at the cut point"
                        .into(),
                    chain,
                });
            };
            let f = *tree_edges
                .iter()
                .find(|e| {
                    let edge = m.source.edge(**e);
                    edge.u == q || edge.v == q
                })
                .expect("leaf has an incident tree edge");
            let (germ, _) = m.image_germ(f, q).expect("finite morphism");
            // the other direction of the loop at the image point
            let image_vertex = m.vertex_map[&q];
            let loop_germs: Vec<TargetGerm> = circle
                .edges
                .iter()
                .flat_map(|&fe| {
                    let e = m.target.edge(fe);
                    let mut g = Vec::new();
                    if e.u == image_vertex {
                        g.push((fe, Toward::V));
                    }
                    if e.v == image_vertex {
                        g.push((fe, Toward::U));
                    }
                    g
                })
                .collect();
            debug_assert_eq!(loop_germs.len(), 2);
            let Some(&other_germ) = loop_germs.iter().find(|g| **g != germ) else {
                return Ok(Lemma3Outcome {
                    verdict: false,
                    reason: format!(
                        "image of the growth leaf {} is not inside the loop",
                        m.source.vertex_name(q)
                    ),
                    chain,
                });
            };
            // harmonicity provides a preimage direction at q
            let mut extension: Option<EdgeId> = None;
            for &cand in m.source.incident_edges(q) {
                if cand == f {
                    continue;
                }
                let edge = m.source.edge(cand);
                for end in [edge.u, edge.v] {
                    if end != q {
                        continue;
                    }
                    if let Some((g, _)) = m.image_germ(cand, end) {
                        if g == other_germ {
                            extension = Some(cand);
                        }
                    }
                }
                if extension.is_some() {
                    break;
                }
            }
            let Some(ext) = extension else {
                chain.push(format!(
                    "no direction at {} maps onto the loop's other side, so the candidate is not harmonic there",
                    m.source.vertex_name(q)
                ));
                return Ok(Lemma3Outcome {
                    verdict: false,
                    reason: "a subtree maps into a target loop and the forced extension is missing"
                        .into(),
                    chain,
                });
            };
            if !t_prime.edges.contains(&ext) {
                chain.push(format!(
                    "forced extension {} leaves the subtree at {}",
                    m.source.edge_name(ext),
                    m.source.vertex_name(q)
                ));
                return Ok(Lemma3Outcome {
                    verdict: false,
                    reason: "a subtree maps into a target loop and its forced growth escapes the hanging tree"
                        .into(),
                    chain,
                });
            }
            chain.push(format!(
                "extend through {} at {}",
                m.source.edge_name(ext),
                m.source.vertex_name(q)
            ));
            tree_edges.insert(ext);
        }
    }
    Ok(Lemma3Outcome {
        verdict: true,
        reason: "no edge of the hanging tree maps into any target loop".into(),
        chain: Vec::new(),
    })
}

fn subgraph_connected(graph: &GraphRef, sub: &ClosedSubgraph) -> bool {
    let Some(&start) = sub.vertices.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &e in graph.incident_edges(v) {
            if !sub.edges.contains(&e) {
                continue;
            }
            let w = graph.edge(e).other(v);
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == sub.vertices.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::GraphBuilder;
    use crate::rat::{rat, rat_int};
    use std::sync::Arc;

    /// circle of circumference `2l` double-covering a circle of circumference `l`
    fn circle_double_cover(l_half: Rat) -> GraphMorphism {
        let mut tb = GraphBuilder::new();
        let p = tb.vertex("p");
        let r = tb.vertex("r");
        tb.edge("f0", p, r, l_half.clone());
        tb.edge("f1", r, p, l_half.clone());
        let target: GraphRef = Arc::new(tb.build().unwrap());
        let mut sb = GraphBuilder::new();
        let x0 = sb.vertex("x0");
        let y0 = sb.vertex("y0");
        let x1 = sb.vertex("x1");
        let y1 = sb.vertex("y1");
        sb.edge("a0", x0, y0, l_half.clone());
        sb.edge("b0", y0, x1, l_half.clone());
        sb.edge("a1", x1, y1, l_half.clone());
        sb.edge("b1", y1, x0, l_half.clone());
        let source: GraphRef = Arc::new(sb.build().unwrap());
        let vm = |g: &GraphRef, n: &str| g.vertex_by_name(n).unwrap();
        let em = |g: &GraphRef, n: &str| g.edge_by_name(n).unwrap();
        GraphMorphism {
            vertex_map: BTreeMap::from([
                (vm(&source, "x0"), vm(&target, "p")),
                (vm(&source, "y0"), vm(&target, "r")),
                (vm(&source, "x1"), vm(&target, "p")),
                (vm(&source, "y1"), vm(&target, "r")),
            ]),
            edge_map: BTreeMap::from([
                (
                    em(&source, "a0"),
                    EdgeImage::Onto {
                        edge: em(&target, "f0"),
                        reversed: false,
                        dilation: 1,
                    },
                ),
                (
                    em(&source, "b0"),
                    EdgeImage::Onto {
                        edge: em(&target, "f1"),
                        reversed: false,
                        dilation: 1,
                    },
                ),
                (
                    em(&source, "a1"),
                    EdgeImage::Onto {
                        edge: em(&target, "f0"),
                        reversed: false,
                        dilation: 1,
                    },
                ),
                (
                    em(&source, "b1"),
                    EdgeImage::Onto {
                        edge: em(&target, "f1"),
                        reversed: false,
                        dilation: 1,
                    },
                ),
            ]),
            source,
            target,
        }
    }

    #[test]
    fn identity_is_finite_harmonic_of_degree_one() {
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.edge("e0", v1, v2, rat_int(2));
        gb.edge("e1", v1, v2, rat_int(3));
        let g: GraphRef = Arc::new(gb.build().unwrap());
        let id = GraphMorphism::identity(&g);
        assert!(id.is_morphism());
        assert!(id.is_finite());
        let cert = id.check_harmonic().unwrap();
        assert_eq!(cert.degree, 1);
    }

    #[test]
    fn double_cover_is_harmonic_of_degree_two() {
        let m = circle_double_cover(rat_int(2));
        assert!(m.is_finite());
        let cert = m.check_harmonic().unwrap();
        assert_eq!(cert.degree, 2);
        assert!(cert.local_degrees.values().all(|&d| d == 1));
        assert!(cert.edge_coverage.values().all(|&c| c == 2));
    }

    #[test]
    fn collapsed_edge_is_morphism_but_not_finite() {
        // collapse one loop of a two-loop graph onto its attachment point
        let mut sb = GraphBuilder::new();
        let q = sb.vertex("q");
        let w = sb.vertex("w");
        sb.edge("l_a", q, w, rat_int(1));
        sb.edge("l_b", w, q, rat_int(1));
        let source: GraphRef = Arc::new(sb.build().unwrap());
        let mut tb = GraphBuilder::new();
        let _p = tb.vertex("p");
        let tq = tb.vertex("tq");
        tb.edge("seg", _p, tq, rat_int(1));
        let target: GraphRef = Arc::new(tb.build().unwrap());
        // map everything to the vertex tq, collapsing both loop edges
        let m = GraphMorphism {
            vertex_map: BTreeMap::from([
                (source.vertex_by_name("q").unwrap(), tq),
                (source.vertex_by_name("w").unwrap(), tq),
            ]),
            edge_map: BTreeMap::from([
                (
                    source.edge_by_name("l_a").unwrap(),
                    EdgeImage::Collapsed(tq),
                ),
                (
                    source.edge_by_name("l_b").unwrap(),
                    EdgeImage::Collapsed(tq),
                ),
            ]),
            source,
            target,
        };
        assert!(m.is_morphism());
        assert!(!m.is_finite());
        // and it is not harmonic: the target edge has no preimage
        assert!(matches!(
            m.check_harmonic(),
            Err(HarmonicViolation::NotSurjective(_))
        ));
    }

    #[test]
    fn fold_onto_segment_is_harmonic_at_the_tip() {
        // path x - m - y folded onto a single segment
        let mut sb = GraphBuilder::new();
        let x = sb.vertex("x");
        let mid = sb.vertex("mid");
        let y = sb.vertex("y");
        sb.edge("s0", x, mid, rat_int(1));
        sb.edge("s1", mid, y, rat_int(1));
        let source: GraphRef = Arc::new(sb.build().unwrap());
        let mut tb = GraphBuilder::new();
        let p = tb.vertex("p");
        let r = tb.vertex("r");
        tb.edge("f", p, r, rat_int(1));
        let target: GraphRef = Arc::new(tb.build().unwrap());
        let f = target.edge_by_name("f").unwrap();
        let m = GraphMorphism {
            vertex_map: BTreeMap::from([
                (source.vertex_by_name("x").unwrap(), p),
                (source.vertex_by_name("mid").unwrap(), r),
                (source.vertex_by_name("y").unwrap(), p),
            ]),
            edge_map: BTreeMap::from([
                (
                    source.edge_by_name("s0").unwrap(),
                    EdgeImage::Onto {
                        edge: f,
                        reversed: false,
                        dilation: 1,
                    },
                ),
                (
                    source.edge_by_name("s1").unwrap(),
                    EdgeImage::Onto {
                        edge: f,
                        reversed: true,
                        dilation: 1,
                    },
                ),
            ]),
            source,
            target,
        };
        let cert = m.check_harmonic().unwrap();
        assert_eq!(cert.degree, 2);
        // the fold point has local degree 2
        let midv = m.source.vertex_by_name("mid").unwrap();
        assert_eq!(cert.local_degrees[&midv], 2);
    }

    /// degree-2 cover of a circle-with-tail: the circle is doubly covered and
    /// each sheet carries a copy of the tail
    fn cover_with_tails(tail_to_loop: bool) -> GraphMorphism {
        let mut tb = GraphBuilder::new();
        let p = tb.vertex("p");
        let r = tb.vertex("r");
        let s = tb.vertex("s");
        tb.edge("f0", p, r, rat_int(2));
        tb.edge("f1", r, p, rat_int(2));
        tb.edge("ft", p, s, rat_int(1));
        let target: GraphRef = Arc::new(tb.build().unwrap());
        let mut sb = GraphBuilder::new();
        let x0 = sb.vertex("x0");
        let y0 = sb.vertex("y0");
        let x1 = sb.vertex("x1");
        let y1 = sb.vertex("y1");
        let z0 = sb.vertex("z0");
        let z1 = sb.vertex("z1");
        sb.edge("a0", x0, y0, rat_int(2));
        sb.edge("b0", y0, x1, rat_int(2));
        sb.edge("a1", x1, y1, rat_int(2));
        sb.edge("b1", y1, x0, rat_int(2));
        // hanging tails at the two points over p
        let tail_len = if tail_to_loop { rat_int(2) } else { rat_int(1) };
        sb.edge("tz0", x0, z0, tail_len);
        sb.edge("tz1", x1, z1, rat_int(1));
        let source: GraphRef = Arc::new(sb.build().unwrap());
        let vm = |g: &GraphRef, n: &str| g.vertex_by_name(n).unwrap();
        let em = |g: &GraphRef, n: &str| g.edge_by_name(n).unwrap();
        let mut edge_map = BTreeMap::from([
            (
                em(&source, "a0"),
                EdgeImage::Onto {
                    edge: em(&target, "f0"),
                    reversed: false,
                    dilation: 1,
                },
            ),
            (
                em(&source, "b0"),
                EdgeImage::Onto {
                    edge: em(&target, "f1"),
                    reversed: false,
                    dilation: 1,
                },
            ),
            (
                em(&source, "a1"),
                EdgeImage::Onto {
                    edge: em(&target, "f0"),
                    reversed: false,
                    dilation: 1,
                },
            ),
            (
                em(&source, "b1"),
                EdgeImage::Onto {
                    edge: em(&target, "f1"),
                    reversed: false,
                    dilation: 1,
                },
            ),
            (
                em(&source, "tz1"),
                EdgeImage::Onto {
                    edge: em(&target, "ft"),
                    reversed: false,
                    dilation: 1,
                },
            ),
        ]);
        let z0_image;
        if tail_to_loop {
            // the hanging tree edge maps into the loop instead of the tail
            edge_map.insert(
                em(&source, "tz0"),
                EdgeImage::Onto {
                    edge: em(&target, "f0"),
                    reversed: false,
                    dilation: 1,
                },
            );
            z0_image = vm(&target, "r");
        } else {
            edge_map.insert(
                em(&source, "tz0"),
                EdgeImage::Onto {
                    edge: em(&target, "ft"),
                    reversed: false,
                    dilation: 1,
                },
            );
            z0_image = vm(&target, "s");
        }
        GraphMorphism {
            vertex_map: BTreeMap::from([
                (vm(&source, "x0"), vm(&target, "p")),
                (vm(&source, "y0"), vm(&target, "r")),
                (vm(&source, "x1"), vm(&target, "p")),
                (vm(&source, "y1"), vm(&target, "r")),
                (vm(&source, "z0"), z0_image),
                (vm(&source, "z1"), vm(&target, "s")),
            ]),
            edge_map,
            source,
            target,
        }
    }

    #[test]
    fn lemma3_accepts_tail_mapped_to_tail() {
        let m = cover_with_tails(false);
        m.check_harmonic().expect("control cover is harmonic");
        let t_prime = ClosedSubgraph::new(
            &m.source,
            BTreeSet::from([
                m.source.vertex_by_name("x0").unwrap(),
                m.source.vertex_by_name("z0").unwrap(),
            ]),
            BTreeSet::from([m.source.edge_by_name("tz0").unwrap()]),
        )
        .unwrap();
        let t = Point::Vertex(m.source.vertex_by_name("x0").unwrap());
        let out = lemma3_predicate(&m, &t_prime, &t).unwrap();
        assert!(out.verdict, "{}", out.reason);
    }

    #[test]
    fn lemma3_rejects_tail_mapped_into_loop() {
        let m = cover_with_tails(true);
        let t_prime = ClosedSubgraph::new(
            &m.source,
            BTreeSet::from([
                m.source.vertex_by_name("x0").unwrap(),
                m.source.vertex_by_name("z0").unwrap(),
            ]),
            BTreeSet::from([m.source.edge_by_name("tz0").unwrap()]),
        )
        .unwrap();
        let t = Point::Vertex(m.source.vertex_by_name("x0").unwrap());
        let out = lemma3_predicate(&m, &t_prime, &t).unwrap();
        assert!(!out.verdict);
        assert!(!out.chain.is_empty());
    }

    #[test]
    fn lemma3_validates_hypotheses() {
        let m = cover_with_tails(false);
        // subtree containing a cycle is rejected
        let bad = ClosedSubgraph::new(
            &m.source,
            m.source.vertex_ids().collect(),
            m.source.edge_ids().collect(),
        )
        .unwrap();
        let t = Point::Vertex(m.source.vertex_by_name("x0").unwrap());
        assert!(matches!(
            lemma3_predicate(&m, &bad, &t),
            Err(HarmonicError::Hypothesis(_))
        ));
        // cut point not in the subtree
        let t_prime = ClosedSubgraph::new(
            &m.source,
            BTreeSet::from([
                m.source.vertex_by_name("x0").unwrap(),
                m.source.vertex_by_name("z0").unwrap(),
            ]),
            BTreeSet::from([m.source.edge_by_name("tz0").unwrap()]),
        )
        .unwrap();
        let wrong_t = Point::Vertex(m.source.vertex_by_name("y1").unwrap());
        assert!(matches!(
            lemma3_predicate(&m, &t_prime, &wrong_t),
            Err(HarmonicError::Hypothesis(_))
        ));
    }

    #[test]
    fn length_incompatibility_is_reported() {
        let mut sb = GraphBuilder::new();
        let x = sb.vertex("x");
        let y = sb.vertex("y");
        sb.edge("s", x, y, rat(3, 2));
        let source: GraphRef = Arc::new(sb.build().unwrap());
        let mut tb = GraphBuilder::new();
        let p = tb.vertex("p");
        let r = tb.vertex("r");
        tb.edge("f", p, r, rat_int(2));
        let target: GraphRef = Arc::new(tb.build().unwrap());
        let f = target.edge_by_name("f").unwrap();
        let m = GraphMorphism {
            vertex_map: BTreeMap::from([
                (source.vertex_by_name("x").unwrap(), p),
                (source.vertex_by_name("y").unwrap(), r),
            ]),
            edge_map: BTreeMap::from([(
                source.edge_by_name("s").unwrap(),
                EdgeImage::Onto {
                    edge: f,
                    reversed: false,
                    dilation: 1,
                },
            )]),
            source,
            target,
        };
        let err = m.check_morphism().unwrap_err();
        assert!(matches!(err, HarmonicViolation::Structural(_)));
        assert!(err.to_string().contains("length clash"));
    }
}
