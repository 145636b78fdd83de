//! Divisors on metric graphs: degree, canonical divisor, reduced divisors via
//! the burning algorithm, and the linear-equivalence decision procedure.
//!
//! A divisor is a finite integer-weighted sum of points. Support on infinite
//! edges is rejected at construction: the divisor theory lives on the finite
//! part, and infinite edges are retracted before any computation.

mod reduce;

pub use reduce::{ChipMove, FireEvent, ReductionCertificate, SetSnapshot};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::metric_graph::{GraphError, GraphRef, Point};

#[derive(Debug, Error)]
pub enum DivisorError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("divisor support on infinite edge at {0}")]
    SupportOnInfiniteEdge(String),
    #[error("divisors live on different graphs")]
    DifferentGraphs,
    #[error("divisor is negative at {0}, away from the base point")]
    NegativeAway(String),
    #[error("graph has infinite edges; retract them first")]
    InfiniteEdges,
    #[error("internal: {0}")]
    Internal(String),
}

/// Finite integer formal sum of points with nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divisor {
    graph: GraphRef,
    coeffs: BTreeMap<Point, i64>,
}

impl Divisor {
    pub fn zero(graph: GraphRef) -> Self {
        Divisor {
            graph,
            coeffs: BTreeMap::new(),
        }
    }

    /// Builds a divisor, canonicalizing points and dropping zeros. Points on
    /// infinite edges (or at infinite leaves) are rejected.
    pub fn new(graph: GraphRef, parts: &[(Point, i64)]) -> Result<Self, DivisorError> {
        let mut coeffs = BTreeMap::new();
        for (p, c) in parts {
            if *c == 0 {
                continue;
            }
            let p = graph.canonical_point(p)?;
            match &p {
                Point::Vertex(v) => {
                    if graph.vertex(*v).infinite_leaf {
                        return Err(DivisorError::SupportOnInfiniteEdge(
                            graph.vertex_name(*v).to_string(),
                        ));
                    }
                }
                Point::OnEdge { edge, .. } => {
                    if graph.edge(*edge).length.is_infinite() {
                        return Err(DivisorError::SupportOnInfiniteEdge(graph.point_name(&p)));
                    }
                }
            }
            let slot = coeffs.entry(p).or_insert(0);
            *slot += c;
        }
        coeffs.retain(|_, c| *c != 0);
        Ok(Divisor { graph, coeffs })
    }

    pub fn single(graph: GraphRef, p: Point) -> Result<Self, DivisorError> {
        Divisor::new(graph, &[(p, 1)])
    }

    pub fn graph(&self) -> &GraphRef {
        &self.graph
    }

    pub fn degree(&self) -> i64 {
        self.coeffs.values().sum()
    }

    pub fn coeff(&self, p: &Point) -> i64 {
        let Ok(p) = self.graph.canonical_point(p) else {
            return 0;
        };
        self.coeffs.get(&p).copied().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = (&Point, i64)> {
        self.coeffs.iter().map(|(p, c)| (p, *c))
    }

    pub fn support_vec(&self) -> Vec<(Point, i64)> {
        self.coeffs.iter().map(|(p, c)| (p.clone(), *c)).collect()
    }

    pub fn is_effective(&self) -> bool {
        self.coeffs.values().all(|&c| c >= 0)
    }

    pub fn is_effective_away_from(&self, q: &Point) -> bool {
        let q = match self.graph.canonical_point(q) {
            Ok(q) => q,
            Err(_) => return false,
        };
        self.coeffs.iter().all(|(p, &c)| c >= 0 || *p == q)
    }

    fn same_graph(&self, other: &Divisor) -> bool {
        GraphRef::ptr_eq(&self.graph, &other.graph) || self.graph == other.graph
    }

    pub fn checked_add(&self, other: &Divisor) -> Result<Divisor, DivisorError> {
        if !self.same_graph(other) {
            return Err(DivisorError::DifferentGraphs);
        }
        let mut coeffs = self.coeffs.clone();
        for (p, c) in &other.coeffs {
            *coeffs.entry(p.clone()).or_insert(0) += c;
        }
        coeffs.retain(|_, c| *c != 0);
        Ok(Divisor {
            graph: self.graph.clone(),
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &Divisor) -> Result<Divisor, DivisorError> {
        self.checked_add(&other.negated())
    }

    pub fn negated(&self) -> Divisor {
        Divisor {
            graph: self.graph.clone(),
            coeffs: self.coeffs.iter().map(|(p, c)| (p.clone(), -c)).collect(),
        }
    }

    /// `self - other >= 0` pointwise.
    pub fn dominates(&self, other: &Divisor) -> bool {
        other
            .coeffs
            .iter()
            .all(|(p, &c)| self.coeff(p) >= c)
            && self
                .coeffs
                .iter()
                .all(|(p, &c)| c >= other.coeff(p) || other.coeffs.contains_key(p) || c >= 0)
    }

    /// Renders as a signed sum, e.g. `v1 + 2*e0@1 - v2`; `0` when empty.
    pub fn render(&self) -> String {
        if self.coeffs.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (p, c)) in self.coeffs.iter().enumerate() {
            let mag = c.abs();
            let term = if mag == 1 {
                self.graph.point_name(p)
            } else {
                format!("{}*{}", mag, self.graph.point_name(p))
            };
            if i == 0 {
                if *c < 0 {
                    out.push_str("-");
                }
                out.push_str(&term);
            } else {
                out.push_str(if *c < 0 { " - " } else { " + " });
                out.push_str(&term);
            }
        }
        out
    }
}

impl fmt::Display for Divisor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

/// The canonical divisor: `(valence - 2)` at every vertex of the model.
/// Defined on graphs without infinite edges.
pub fn canonical(graph: &GraphRef) -> Result<Divisor, DivisorError> {
    if graph.has_infinite_edges() {
        return Err(DivisorError::InfiniteEdges);
    }
    let mut parts = Vec::new();
    for v in graph.vertex_ids() {
        let val = graph.valence(&Point::Vertex(v))? as i64;
        if val != 2 {
            parts.push((Point::Vertex(v), val - 2));
        }
    }
    Divisor::new(graph.clone(), &parts)
}

/// True iff the burning process from `q` consumes the whole graph, i.e. `d`
/// is the `q`-reduced representative of its class. Requires `d` effective
/// away from `q`.
pub fn is_reduced(d: &Divisor, q: &Point) -> Result<bool, DivisorError> {
    reduce::is_reduced_impl(d, q, None)
}

/// As [`is_reduced`] but with a seeded internal scan order; the result is
/// order-independent and tests exercise that.
pub fn is_reduced_seeded(d: &Divisor, q: &Point, seed: u64) -> Result<bool, DivisorError> {
    reduce::is_reduced_impl(d, q, Some(seed))
}

/// The unique `q`-reduced divisor equivalent to `d`, plus the certificate of
/// fired-set events that transforms `d` into it.
pub fn reduce(d: &Divisor, q: &Point) -> Result<(Divisor, ReductionCertificate), DivisorError> {
    reduce::reduce_impl(d, q, None)
}

pub fn reduce_seeded(
    d: &Divisor,
    q: &Point,
    seed: u64,
) -> Result<(Divisor, ReductionCertificate), DivisorError> {
    reduce::reduce_impl(d, q, Some(seed))
}

/// Decides `d1 ~ d2` by comparing reduced representatives at the base vertex.
pub fn linearly_equivalent(d1: &Divisor, d2: &Divisor) -> Result<bool, DivisorError> {
    if !d1.same_graph(d2) {
        return Err(DivisorError::DifferentGraphs);
    }
    if d1.degree() != d2.degree() {
        return Ok(false);
    }
    let q = Point::Vertex(d1.graph().base_vertex());
    let (r1, _) = reduce(d1, &q)?;
    let (r2, _) = reduce(d2, &q)?;
    Ok(r1 == r2)
}

/// Whether `|d|` is nonempty: the reduced representative at any base point is
/// effective there too.
pub fn has_effective_representative(d: &Divisor) -> Result<bool, DivisorError> {
    if d.degree() < 0 {
        return Ok(false);
    }
    if d.is_effective() {
        return Ok(true);
    }
    let q = Point::Vertex(d.graph().base_vertex());
    let (r, _) = reduce(d, &q)?;
    Ok(r.coeff(&q) >= 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::{GraphBuilder, MetricGraph};
    use crate::rat::{rat, rat_int};
    use std::sync::Arc;

    pub(crate) fn theta_graph(a: i64, b: i64, c: i64) -> GraphRef {
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.edge("e0", v1, v2, rat_int(a));
        gb.edge("e1", v1, v2, rat_int(b));
        gb.edge("e2", v1, v2, rat_int(c));
        Arc::new(gb.build().unwrap())
    }

    fn pt(g: &MetricGraph, edge: &str, num: i64, den: i64) -> Point {
        Point::OnEdge {
            edge: g.edge_by_name(edge).unwrap(),
            offset: rat(num, den),
        }
    }

    fn vx(g: &MetricGraph, name: &str) -> Point {
        Point::Vertex(g.vertex_by_name(name).unwrap())
    }

    #[test]
    fn degree_and_canonical() {
        let g = theta_graph(2, 3, 5);
        let v1 = vx(&g, "v1");
        let v2 = vx(&g, "v2");
        let d = Divisor::new(g.clone(), &[(v1.clone(), 1), (v2.clone(), 1)]).unwrap();
        assert_eq!(d.degree(), 2);
        let m0 = pt(&g, "e0", 1, 1);
        let d2 = Divisor::new(g.clone(), &[(m0, 2), (v1.clone(), -1)]).unwrap();
        assert_eq!(d2.degree(), 1);
        let k = canonical(&g).unwrap();
        assert_eq!(k.degree(), 2);
        assert_eq!(k.coeff(&v1), 1);
        assert_eq!(k.coeff(&v2), 1);
    }

    #[test]
    fn canonical_of_circle_is_zero() {
        let mut gb = GraphBuilder::new();
        let v = gb.vertex("v");
        let w = gb.vertex("w");
        gb.edge("c0", v, w, rat_int(1));
        gb.edge("c1", w, v, rat_int(2));
        let g: GraphRef = Arc::new(gb.build().unwrap());
        let k = canonical(&g).unwrap();
        assert_eq!(k.degree(), 0);
        assert!(k.support().next().is_none());
    }

    #[test]
    fn rejects_support_on_infinite_edges() {
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.edge("e0", v1, v2, rat_int(2));
        gb.edge("e1", v1, v2, rat_int(3));
        let leaf = gb.infinite_leaf("linf");
        gb.infinite_edge("r", v1, leaf);
        let g: GraphRef = Arc::new(gb.build().unwrap());
        assert!(matches!(
            Divisor::new(g.clone(), &[(Point::Vertex(leaf), 1)]),
            Err(DivisorError::SupportOnInfiniteEdge(_))
        ));
        let ray = g.edge_by_name("r").unwrap();
        assert!(matches!(
            Divisor::new(
                g.clone(),
                &[(
                    Point::OnEdge {
                        edge: ray,
                        offset: rat_int(1),
                    },
                    1
                )]
            ),
            Err(DivisorError::SupportOnInfiniteEdge(_))
        ));
    }

    #[test]
    fn coefficients_merge_and_cancel() {
        let g = theta_graph(2, 3, 5);
        let m0 = pt(&g, "e0", 1, 1);
        let d = Divisor::new(g.clone(), &[(m0.clone(), 2), (m0.clone(), -2)]).unwrap();
        assert_eq!(d, Divisor::zero(g.clone()));
        // offset at an edge end folds onto the vertex
        let end = pt(&g, "e0", 2, 1);
        let d = Divisor::new(g.clone(), &[(end, 1)]).unwrap();
        assert_eq!(d.coeff(&vx(&g, "v2")), 1);
    }
}
