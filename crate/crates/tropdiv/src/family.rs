//! The verified graph family.
//!
//! `G_0` is the genus-2 graph with two valence-3 vertices joined by three
//! edges of mutually distinct lengths; `m_i` marks the midpoint of edge
//! `e_i`, and `q_1 in ]v_1,m_1[`, `q_2 in ]v_2,m_2[` are fixed marks. For
//! `n >= 2` (and, for internal lemmas, `n = 1`) the graph `G_n` attaches a
//! loop at `q_0 = m_0` and at each `q_i`, giving genus `n + 3`. Extra marks
//! `q_3..q_n` sit at distinct generic rational points, validated
//! operationally against collisions.
//!
//! Tropical modifications (attached infinite edges) and the circle
//! arithmetic on attached loops used by the witness constructions live here
//! too.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::metric_graph::{
    ClosedSubgraph, EdgeId, GraphBuilder, GraphError, GraphRef, Point, RefineMap, VertexId,
};
use crate::rat::{format_rat, rat, rat_int, Rat};

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("lengths must be pairwise distinct (got {0}, {1}, {2})")]
    LengthsNotDistinct(String, String, String),
    #[error("lengths must be positive")]
    NonPositiveLength,
    #[error("mark {name} must lie strictly between {lo} and {hi}")]
    MarkOutsideInterval {
        name: String,
        lo: String,
        hi: String,
    },
    #[error("marks must be pairwise distinct and avoid v1, v2 and the midpoints: collision at {0}")]
    DuplicateMark(String),
    #[error("n must be at least 1 (got {0})")]
    BadN(i64),
    #[error("expected {expected} loop lengths, got {got}")]
    BadLoopCount { expected: usize, got: usize },
    #[error("extra mark {0} does not lie on the core graph")]
    BadExtraMark(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parameters of the genus-2 core graph.
#[derive(Debug, Clone)]
pub struct G0Spec {
    /// lengths of e0, e1, e2; pairwise distinct
    pub lengths: [Rat; 3],
    /// offset of q1 from v1 along e1, strictly inside ]0, l1/2[
    pub q1_offset: Rat,
    /// offset of q2 from v2 along e2, strictly inside ]0, l2/2[
    pub q2_offset: Rat,
}

impl G0Spec {
    pub fn default_spec() -> Self {
        G0Spec {
            lengths: [rat_int(2), rat_int(3), rat_int(5)],
            q1_offset: rat(1, 2),
            q2_offset: rat(1, 2),
        }
    }

    fn validate(&self) -> Result<(), FamilyError> {
        let [l0, l1, l2] = &self.lengths;
        if self.lengths.iter().any(|l| l <= &Rat::from_integer(0.into())) {
            return Err(FamilyError::NonPositiveLength);
        }
        if l0 == l1 || l0 == l2 || l1 == l2 {
            return Err(FamilyError::LengthsNotDistinct(
                format_rat(l0),
                format_rat(l1),
                format_rat(l2),
            ));
        }
        let two = rat_int(2);
        for (name, off, len) in [("q1", &self.q1_offset, l1), ("q2", &self.q2_offset, l2)] {
            if off <= &Rat::from_integer(0.into()) || off >= &(len / &two) {
                return Err(FamilyError::MarkOutsideInterval {
                    name: name.into(),
                    lo: "0".into(),
                    hi: format!("{}/2", format_rat(len)),
                });
            }
        }
        Ok(())
    }
}

/// Marks of the core graph, in its own model (marks are interior points).
#[derive(Debug, Clone)]
pub struct G0Marks {
    pub graph: GraphRef,
    pub spec: G0Spec,
    pub v1: Point,
    pub v2: Point,
    /// midpoints of e0, e1, e2
    pub m: [Point; 3],
    pub q1: Point,
    pub q2: Point,
    edges: [EdgeId; 3],
}

impl G0Marks {
    /// The point at distance `t` from `v1` along edge `e_i`.
    pub fn path_point(&self, i: usize, t: &Rat) -> Result<Point, GraphError> {
        self.graph.canonical_point(&Point::OnEdge {
            edge: self.edges[i],
            offset: t.clone(),
        })
    }

    /// Distance from `v1` of a point on edge `e_i`, if it lies there.
    pub fn path_offset(&self, i: usize, p: &Point) -> Option<Rat> {
        path_offset_single(&self.graph, self.edges[i], &self.spec.lengths[i], p)
    }

    /// The point `p'` on `e_i` with `dist(v1, p) = dist(v2, p')`; pairs
    /// `p + p'` are equivalent to `v1 + v2`.
    pub fn reflect(&self, i: usize, p: &Point) -> Option<Point> {
        let t = self.path_offset(i, p)?;
        let mirrored = &self.spec.lengths[i] - &t;
        self.path_point(i, &mirrored).ok()
    }

    pub fn mark_by_name(&self, name: &str) -> Option<Point> {
        match name {
            "v1" => Some(self.v1.clone()),
            "v2" => Some(self.v2.clone()),
            "m0" => Some(self.m[0].clone()),
            "m1" => Some(self.m[1].clone()),
            "m2" => Some(self.m[2].clone()),
            "q1" => Some(self.q1.clone()),
            "q2" => Some(self.q2.clone()),
            _ => None,
        }
    }
}

fn path_offset_single(graph: &GraphRef, edge: EdgeId, len: &Rat, p: &Point) -> Option<Rat> {
    match graph.canonical_point(p).ok()? {
        Point::OnEdge { edge: e, offset } if e == edge => Some(offset),
        Point::Vertex(v) => {
            let e = graph.edge(edge);
            if e.u == v {
                Some(Rat::from_integer(0.into()))
            } else if e.v == v {
                Some(len.clone())
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Builds the genus-2 core graph with its marks table.
pub fn build_g0(spec: &G0Spec) -> Result<G0Marks, FamilyError> {
    spec.validate()?;
    let mut gb = GraphBuilder::new();
    let v1 = gb.vertex("v1");
    let v2 = gb.vertex("v2");
    let e0 = gb.edge("e0", v1, v2, spec.lengths[0].clone());
    let e1 = gb.edge("e1", v1, v2, spec.lengths[1].clone());
    let e2 = gb.edge("e2", v1, v2, spec.lengths[2].clone());
    let graph: GraphRef = Arc::new(gb.build()?);
    let two = rat_int(2);
    let m = [
        Point::OnEdge {
            edge: e0,
            offset: &spec.lengths[0] / &two,
        },
        Point::OnEdge {
            edge: e1,
            offset: &spec.lengths[1] / &two,
        },
        Point::OnEdge {
            edge: e2,
            offset: &spec.lengths[2] / &two,
        },
    ];
    let q1 = Point::OnEdge {
        edge: e1,
        offset: spec.q1_offset.clone(),
    };
    let q2 = Point::OnEdge {
        edge: e2,
        offset: &spec.lengths[2] - &spec.q2_offset,
    };
    Ok(G0Marks {
        graph,
        spec: spec.clone(),
        v1: Point::Vertex(v1),
        v2: Point::Vertex(v2),
        m,
        q1,
        q2,
        edges: [e0, e1, e2],
    })
}

/// Placement of one extra mark on the core graph: `(edge index, offset from
/// v1)`.
pub type MarkSite = (usize, Rat);

/// Parameters of `G_n`.
#[derive(Debug, Clone)]
pub struct GnSpec {
    pub base: G0Spec,
    pub n: i64,
    /// sites of q3..qn on the core graph; length `max(n - 2, 0)`
    pub extra_marks: Vec<MarkSite>,
    /// circumferences of the loops at q0..qn; length `n + 1`
    pub loop_lengths: Vec<Rat>,
}

impl GnSpec {
    /// The reproducible default: core defaults, denominator-8 extra marks
    /// chosen to avoid all prior marks, unit loops.
    pub fn default_spec(n: i64) -> Result<Self, FamilyError> {
        if n < 1 {
            return Err(FamilyError::BadN(n));
        }
        let base = G0Spec::default_spec();
        let extra = default_extra_marks(&base, (n - 2).max(0) as usize);
        Ok(GnSpec {
            base,
            n,
            extra_marks: extra,
            loop_lengths: vec![rat_int(1); (n + 1) as usize],
        })
    }
}

/// Deterministic denominator-8 sites avoiding v1, v2, midpoints and marks.
fn default_extra_marks(base: &G0Spec, count: usize) -> Vec<MarkSite> {
    let mut taken: BTreeSet<(usize, Rat)> = BTreeSet::new();
    let two = rat_int(2);
    taken.insert((0, &base.lengths[0] / &two));
    taken.insert((1, &base.lengths[1] / &two));
    taken.insert((2, &base.lengths[2] / &two));
    taken.insert((1, base.q1_offset.clone()));
    taken.insert((2, &base.lengths[2] - &base.q2_offset));
    let mut out = Vec::new();
    let mut k: i64 = 1;
    while out.len() < count {
        let edge = (k % 3) as usize;
        let off = rat(2 * k + 1, 8);
        k += 1;
        if off >= base.lengths[edge] {
            continue;
        }
        if taken.contains(&(edge, off.clone())) {
            continue;
        }
        taken.insert((edge, off.clone()));
        out.push((edge, off));
    }
    out
}

/// Marks of `G_n`: core marks re-expressed in the `G_n` model, attachment
/// points `q_0..q_n`, the loops as subgraphs, and the per-core-edge chain
/// decomposition used to address points by their distance from `v1`.
#[derive(Debug, Clone)]
pub struct GnMarks {
    pub graph: GraphRef,
    pub spec: GnSpec,
    pub v1: Point,
    pub v2: Point,
    /// midpoints of the three core edges (m0 coincides with q0)
    pub m: [Point; 3],
    /// attachment points q0..qn (vertices of the model)
    pub q: Vec<Point>,
    /// antipodal auxiliary vertex on each loop
    pub loop_mid: Vec<Point>,
    /// the loops as closed subgraphs
    pub loops: Vec<ClosedSubgraph>,
    /// per core edge: ordered (start offset, segment edge, segment length)
    chains: [Vec<(Rat, EdgeId, Rat)>; 3],
    /// loop i: the two edges (a, b) with a leaving q_i
    loop_edges: Vec<(EdgeId, EdgeId)>,
}

impl GnMarks {
    /// Point at distance `t` from `v1` along the i-th core path.
    pub fn path_point(&self, i: usize, t: &Rat) -> Result<Point, GraphError> {
        let chain = &self.chains[i];
        for (start, edge, len) in chain {
            if t >= start && t <= &(start + len) {
                return self.graph.canonical_point(&Point::OnEdge {
                    edge: *edge,
                    offset: t - start,
                });
            }
        }
        Err(GraphError::PointOffGraph(format!(
            "offset {} beyond core path {}",
            format_rat(t),
            i
        )))
    }

    /// Distance from `v1` along the i-th core path, if `p` lies on it.
    pub fn path_offset(&self, i: usize, p: &Point) -> Option<Rat> {
        let p = self.graph.canonical_point(p).ok()?;
        for (start, edge, len) in &self.chains[i] {
            if let Some(off) = path_offset_single(&self.graph, *edge, len, &p) {
                // vertices shared between chains resolve on any of them
                let abs = start + &off;
                if &off == len && self.graph.edge(*edge).v != vertex_of(&p)? {
                    continue;
                }
                return Some(abs);
            }
        }
        None
    }

    /// Circle coordinate of a point on loop `i`: distance from `q_i` going
    /// out along the loop's first edge, in `[0, circumference)`.
    pub fn loop_position(&self, i: usize, p: &Point) -> Option<Rat> {
        let p = self.graph.canonical_point(p).ok()?;
        let (ea, eb) = self.loop_edges[i];
        let half = self.graph.edge(ea).length.finite()?.clone();
        if p == self.q[i] {
            return Some(Rat::from_integer(0.into()));
        }
        if p == self.loop_mid[i] {
            return Some(half);
        }
        match &p {
            Point::OnEdge { edge, offset } if *edge == ea => Some(offset.clone()),
            Point::OnEdge { edge, offset } if *edge == eb => {
                // second edge runs from the antipode back to q_i
                Some(&half + offset)
            }
            _ => None,
        }
    }

    /// Point of loop `i` at circle coordinate `t` (taken mod circumference).
    pub fn loop_point(&self, i: usize, t: &Rat) -> Point {
        let (ea, eb) = self.loop_edges[i];
        let half = self
            .graph
            .edge(ea)
            .length
            .finite()
            .expect("loop edges are finite")
            .clone();
        let circ = &half * rat_int(2);
        let mut t = t.clone();
        while t < Rat::from_integer(0.into()) {
            t += &circ;
        }
        while t >= circ {
            t -= &circ;
        }
        let raw = if t < half {
            Point::OnEdge {
                edge: ea,
                offset: t,
            }
        } else {
            Point::OnEdge {
                edge: eb,
                offset: &t - &half,
            }
        };
        self.graph
            .canonical_point(&raw)
            .expect("loop coordinate stays on the loop")
    }

    /// The point `v'` on loop `i` with `v + v' ~ 2 q_i` on the circle: the
    /// reflection of `v` through `q_i`.
    pub fn loop_reflect(&self, i: usize, v: &Point) -> Option<Point> {
        let t = self.loop_position(i, v)?;
        Some(self.loop_point(i, &-t))
    }

    /// The point `f` on loop `i` with `v1 + v2 + f ~ 3 q_i` on the circle.
    pub fn loop_triple_complete(&self, i: usize, v1: &Point, v2: &Point) -> Option<Point> {
        let t1 = self.loop_position(i, v1)?;
        let t2 = self.loop_position(i, v2)?;
        Some(self.loop_point(i, &-(t1 + t2)))
    }

    /// Whether `p` lies on loop `i` away from the attachment point.
    pub fn on_loop_interior(&self, i: usize, p: &Point) -> bool {
        match self.loop_position(i, p) {
            Some(t) => !t.is_zero(),
            None => false,
        }
    }

    pub fn mark_by_name(&self, name: &str) -> Option<Point> {
        if name == "v1" {
            return Some(self.v1.clone());
        }
        if name == "v2" {
            return Some(self.v2.clone());
        }
        if let Some(rest) = name.strip_prefix('m') {
            if let Ok(i) = rest.parse::<usize>() {
                return self.m.get(i).cloned();
            }
        }
        if let Some(rest) = name.strip_prefix('q') {
            if let Ok(i) = rest.parse::<usize>() {
                return self.q.get(i).cloned();
            }
        }
        None
    }

    /// Renders a point through the marks table when it is a mark.
    pub fn render_point(&self, p: &Point) -> String {
        let p = match self.graph.canonical_point(p) {
            Ok(p) => p,
            Err(_) => return self.graph.point_name(p),
        };
        for (i, q) in self.q.iter().enumerate() {
            if &p == q {
                return format!("q{i}");
            }
        }
        for (i, m) in self.m.iter().enumerate() {
            if &p == m {
                return format!("m{i}");
            }
        }
        self.graph.point_name(&p)
    }
}

fn vertex_of(p: &Point) -> Option<VertexId> {
    match p {
        Point::Vertex(v) => Some(*v),
        Point::OnEdge { .. } => None,
    }
}

use num_traits::Zero;

/// Builds `G_n` with its marks table. `n = 1` is accepted for internal
/// lemmas; downstream claims that need `n >= 2` check the field themselves.
pub fn build_gn(spec: &GnSpec) -> Result<GnMarks, FamilyError> {
    spec.base.validate()?;
    if spec.n < 1 {
        return Err(FamilyError::BadN(spec.n));
    }
    let n = spec.n as usize;
    if spec.loop_lengths.len() != n + 1 {
        return Err(FamilyError::BadLoopCount {
            expected: n + 1,
            got: spec.loop_lengths.len(),
        });
    }
    if spec.extra_marks.len() != n.saturating_sub(2) {
        return Err(FamilyError::BadExtraMark(format!(
            "expected {} extra marks, got {}",
            n.saturating_sub(2),
            spec.extra_marks.len()
        )));
    }
    if spec.loop_lengths.iter().any(|l| l <= &Rat::zero()) {
        return Err(FamilyError::NonPositiveLength);
    }
    let two = rat_int(2);
    // attachment sites in core coordinates: (edge, offset, q index);
    // n = 1 attaches loops at q0 and q1 only
    let base_sites = [
        (0usize, &spec.base.lengths[0] / &two, 0usize),
        (1, spec.base.q1_offset.clone(), 1),
        (2, &spec.base.lengths[2] - &spec.base.q2_offset, 2),
    ];
    let mut sites: Vec<(usize, Rat, usize)> =
        base_sites.into_iter().take(n + 1).collect();
    for (j, (edge, off)) in spec.extra_marks.iter().enumerate() {
        if *edge > 2 || off <= &Rat::zero() || off >= &spec.base.lengths[*edge] {
            return Err(FamilyError::BadExtraMark(format!(
                "e{edge}@{}",
                format_rat(off)
            )));
        }
        sites.push((*edge, off.clone(), j + 3));
    }
    // collisions: sites must be pairwise distinct and avoid the midpoints
    {
        let mut seen: BTreeSet<(usize, Rat)> = BTreeSet::new();
        for (e, off, qi) in &sites {
            if !seen.insert((*e, off.clone())) {
                return Err(FamilyError::DuplicateMark(format!(
                    "q{qi} at e{e}@{}",
                    format_rat(off)
                )));
            }
        }
        for (e, off, qi) in &sites {
            if *qi != 0 && off == &(&spec.base.lengths[*e] / &two) {
                return Err(FamilyError::DuplicateMark(format!(
                    "q{qi} collides with the midpoint of e{e}"
                )));
            }
        }
    }
    let mut gb = GraphBuilder::new();
    let v1 = gb.vertex("v1");
    let v2 = gb.vertex("v2");
    let mut q_vertices: Vec<Option<VertexId>> = vec![None; n + 1];
    let mut chains: [Vec<(Rat, EdgeId, Rat)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for core in 0..3 {
        let mut cuts: Vec<(Rat, usize)> = sites
            .iter()
            .filter(|(e, _, _)| *e == core)
            .map(|(_, off, qi)| (off.clone(), *qi))
            .collect();
        cuts.sort();
        let mut prev_off = Rat::zero();
        let mut prev_vertex = v1;
        let letters = "abcdefghijklmnopqrstuvwxyz";
        for (k, (off, qi)) in cuts.iter().enumerate() {
            let qv = gb.vertex(&format!("q{qi}"));
            q_vertices[*qi] = Some(qv);
            let seg_len = off - &prev_off;
            let e = gb.edge(
                &format!("e{core}{}", &letters[k..k + 1]),
                prev_vertex,
                qv,
                seg_len.clone(),
            );
            chains[core].push((prev_off.clone(), e, seg_len));
            prev_off = off.clone();
            prev_vertex = qv;
        }
        let seg_len = &spec.base.lengths[core] - &prev_off;
        let e = gb.edge(
            &format!("e{core}{}", &letters[cuts.len()..cuts.len() + 1]),
            prev_vertex,
            v2,
            seg_len.clone(),
        );
        chains[core].push((prev_off, e, seg_len));
    }
    let mut loop_edges = Vec::new();
    let mut loop_mid_vertices = Vec::new();
    for (i, len) in spec.loop_lengths.iter().enumerate() {
        let at = q_vertices[i].expect("every q has a site");
        let mid = gb.attach_loop(&format!("loop{i}"), at, len.clone());
        loop_mid_vertices.push(mid);
        loop_edges.push(());
    }
    let graph: GraphRef = Arc::new(gb.build()?);
    let _ = loop_edges;
    let mut loops = Vec::new();
    let mut loop_edge_ids = Vec::new();
    for i in 0..=n {
        let ea = graph.edge_by_name(&format!("loop{i}_a")).unwrap();
        let eb = graph.edge_by_name(&format!("loop{i}_b")).unwrap();
        let qv = graph.vertex_by_name(&format!("q{i}")).unwrap();
        let mv = graph.vertex_by_name(&format!("loop{i}_mid")).unwrap();
        loops.push(ClosedSubgraph::new(
            &graph,
            BTreeSet::from([qv, mv]),
            BTreeSet::from([ea, eb]),
        )?);
        loop_edge_ids.push((ea, eb));
    }
    // re-express chain edge ids against the built graph (builder ids are
    // stable, but resolve by name to stay honest)
    let mut final_chains: [Vec<(Rat, EdgeId, Rat)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for core in 0..3 {
        for (start, e, len) in &chains[core] {
            let _ = e;
            let k = final_chains[core].len();
            let letters = "abcdefghijklmnopqrstuvwxyz";
            let name = format!("e{core}{}", &letters[k..k + 1]);
            let id = graph.edge_by_name(&name).unwrap();
            final_chains[core].push((start.clone(), id, len.clone()));
        }
    }
    let q0 = graph.vertex_by_name("q0").unwrap();
    let m = [
        Point::Vertex(q0),
        {
            let half = &spec.base.lengths[1] / &two;
            chain_point(&graph, &final_chains[1], &half)
        },
        {
            let half = &spec.base.lengths[2] / &two;
            chain_point(&graph, &final_chains[2], &half)
        },
    ];
    let q = (0..=n)
        .map(|i| Point::Vertex(graph.vertex_by_name(&format!("q{i}")).unwrap()))
        .collect();
    let loop_mid = (0..=n)
        .map(|i| Point::Vertex(graph.vertex_by_name(&format!("loop{i}_mid")).unwrap()))
        .collect();
    Ok(GnMarks {
        v1: Point::Vertex(graph.vertex_by_name("v1").unwrap()),
        v2: Point::Vertex(graph.vertex_by_name("v2").unwrap()),
        m,
        q,
        loop_mid,
        loops,
        chains: final_chains,
        loop_edges: loop_edge_ids,
        graph,
        spec: spec.clone(),
    })
}

fn chain_point(graph: &GraphRef, chain: &[(Rat, EdgeId, Rat)], t: &Rat) -> Point {
    for (start, edge, len) in chain {
        if t >= start && t <= &(start + len) {
            return graph
                .canonical_point(&Point::OnEdge {
                    edge: *edge,
                    offset: t - start,
                })
                .expect("chain offsets stay on their segments");
        }
    }
    unreachable!("offset lies on the chain")
}

/// The symmetric genus-2 control graph: three parallel edges with lengths as
/// given, distinctness *not* required. Used as the positive control for the
/// degree-2 morphism search.
pub fn build_control_theta(lengths: [Rat; 3]) -> Result<GraphRef, FamilyError> {
    if lengths.iter().any(|l| l <= &Rat::zero()) {
        return Err(FamilyError::NonPositiveLength);
    }
    let mut gb = GraphBuilder::new();
    let v1 = gb.vertex("v1");
    let v2 = gb.vertex("v2");
    gb.edge("e0", v1, v2, lengths[0].clone());
    gb.edge("e1", v1, v2, lengths[1].clone());
    gb.edge("e2", v1, v2, lengths[2].clone());
    Ok(Arc::new(gb.build()?))
}

/// Result of one elementary tropical modification: the new graph, the point
/// embedding, and the retraction data.
#[derive(Debug, Clone)]
pub struct Modification {
    pub graph: GraphRef,
    embed: RefineMap,
    old_graph: GraphRef,
}

impl Modification {
    /// Image of an old point in the modified graph.
    pub fn embed_point(&self, p: &Point) -> Point {
        self.embed.map_point(&self.graph, p)
    }

    /// Deformation retraction back to the unmodified graph: new rays collapse
    /// onto their attachment sites.
    pub fn retract_point(&self, p: &Point) -> Point {
        let (fin, rmap) = self.graph.retract_infinite();
        let q = rmap.map_point(&self.graph, p);
        // the retracted graph equals the refined old graph; pull back through
        // the refinement
        let refined_pt = match q {
            Point::Vertex(v) => Point::Vertex(v),
            Point::OnEdge { edge, offset } => Point::OnEdge { edge, offset },
        };
        let _ = fin;
        self.embed.unmap_point(&self.old_graph, &refined_pt)
    }
}

/// Attaches one infinite closed edge at `p`; genus is unchanged and the
/// original graph is a deformation retract of the result.
pub fn elementary_tropical_modification(
    graph: &GraphRef,
    p: &Point,
    index: usize,
) -> Result<Modification, FamilyError> {
    let p = graph.canonical_point(p)?;
    if let Point::Vertex(v) = &p {
        if graph.vertex(*v).infinite_leaf {
            return Err(FamilyError::Graph(GraphError::PointOnInfiniteEdge(
                graph.vertex_name(*v).to_string(),
            )));
        }
    }
    if let Point::OnEdge { edge, .. } = &p {
        if graph.edge(*edge).length.is_infinite() {
            return Err(FamilyError::Graph(GraphError::PointOnInfiniteEdge(
                graph.point_name(&p),
            )));
        }
    }
    let (new_graph, embed) = graph.attach_infinite_edge(
        &p,
        &format!("ray{index}"),
        &format!("end{index}"),
    )?;
    Ok(Modification {
        graph: Arc::new(new_graph),
        embed,
        old_graph: graph.clone(),
    })
}

/// A modified graph together with the multiset of sites used, in original
/// coordinates.
#[derive(Debug, Clone)]
pub struct ModifiedGraph {
    pub graph: GraphRef,
    pub sites: Vec<Point>,
    /// embedding of original points into the modified graph
    pub embed: Vec<Modification>,
}

impl ModifiedGraph {
    pub fn embed_point(&self, p: &Point) -> Point {
        let mut cur = p.clone();
        for m in &self.embed {
            cur = m.embed_point(&cur);
        }
        cur
    }
}

/// Deterministic enumeration of all tropical modifications with at most
/// `max_attachments` infinite edges at the given sites, up to site multiset
/// equality.
pub fn enumerate_modifications(
    graph: &GraphRef,
    sites: &[Point],
    max_attachments: usize,
) -> Result<Vec<ModifiedGraph>, FamilyError> {
    use itertools::Itertools;
    let mut out = Vec::new();
    for count in 0..=max_attachments {
        for multiset in sites.iter().combinations_with_replacement(count) {
            let mut current = ModifiedGraph {
                graph: graph.clone(),
                sites: multiset.iter().map(|p| (*p).clone()).collect(),
                embed: Vec::new(),
            };
            for (k, site) in multiset.iter().enumerate() {
                let mapped = current.embed_point(site);
                let m = elementary_tropical_modification(&current.graph, &mapped, k)?;
                current.graph = m.graph.clone();
                current.embed.push(m);
            }
            out.push(current);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divisor::{canonical, Divisor};
    use crate::metric_graph::is_loop_subgraph;

    #[test]
    fn g0_shape_and_marks() {
        let g0 = build_g0(&G0Spec::default_spec()).unwrap();
        let g = &g0.graph;
        assert_eq!(g.genus(), 2);
        assert_eq!(g.valence(&g0.v1).unwrap(), 3);
        assert_eq!(g.valence(&g0.v2).unwrap(), 3);
        assert_eq!(g.valence(&g0.m[0]).unwrap(), 2);
        // d(v1, m1) = 3/2 for the default lengths
        assert_eq!(g.distance(&g0.v1, &g0.m[1]).unwrap(), rat(3, 2));
        assert_eq!(g.distance(&g0.v2, &g0.q2).unwrap(), rat(1, 2));
        // reflection pairs q1 with q1' at distance q1_offset from v2
        let q1p = g0.reflect(1, &g0.q1).unwrap();
        assert_eq!(g.distance(&g0.v2, &q1p).unwrap(), rat(1, 2));
    }

    #[test]
    fn g0_rejects_bad_specs() {
        let mut s = G0Spec::default_spec();
        s.lengths = [rat_int(2), rat_int(2), rat_int(3)];
        let err = build_g0(&s).unwrap_err();
        assert!(err.to_string().contains("pairwise distinct"));
        let mut s = G0Spec::default_spec();
        s.q1_offset = rat(3, 2); // >= l1/2
        assert!(build_g0(&s).is_err());
        let mut s = G0Spec::default_spec();
        s.q1_offset = rat_int(0);
        assert!(build_g0(&s).is_err());
    }

    #[test]
    fn gn_genus_additivity() {
        for n in 1..=10 {
            let spec = GnSpec::default_spec(n).unwrap();
            let gn = build_gn(&spec).unwrap();
            assert_eq!(gn.graph.genus() as i64, n + 3, "genus of G_{n}");
            // attachment points have valence 4
            for q in &gn.q {
                assert_eq!(gn.graph.valence(q).unwrap(), 4);
            }
            for l in &gn.loops {
                assert!(is_loop_subgraph(&gn.graph, l));
            }
        }
    }

    #[test]
    fn gn_canonical_divisor_matches_valences() {
        let gn = build_gn(&GnSpec::default_spec(2).unwrap()).unwrap();
        let k = canonical(&gn.graph).unwrap();
        assert_eq!(k.degree(), 2 * gn.graph.genus() as i64 - 2);
        assert_eq!(k.coeff(&gn.v1), 1);
        assert_eq!(k.coeff(&gn.v2), 1);
        for q in &gn.q {
            assert_eq!(k.coeff(q), 2);
        }
    }

    #[test]
    fn gn_duplicate_marks_rejected() {
        let mut spec = GnSpec::default_spec(3).unwrap();
        spec.extra_marks = vec![(1, rat(1, 2))]; // collides with q1
        assert!(matches!(
            build_gn(&spec),
            Err(FamilyError::DuplicateMark(_))
        ));
        let mut spec = GnSpec::default_spec(3).unwrap();
        spec.extra_marks = vec![(1, rat(3, 2))]; // collides with m1
        assert!(build_gn(&spec).is_err());
    }

    #[test]
    fn loop_arithmetic() {
        let gn = build_gn(&GnSpec::default_spec(2).unwrap()).unwrap();
        // reflection through q_i lands on the mirrored coordinate
        let v = gn.loop_point(1, &rat(1, 4));
        let v_ref = gn.loop_reflect(1, &v).unwrap();
        assert_eq!(gn.loop_position(1, &v_ref).unwrap(), rat(3, 4));
        // reflecting the antipode fixes it
        let mid = gn.loop_mid[1].clone();
        assert_eq!(gn.loop_reflect(1, &mid).unwrap(), mid);
        // triple completion: coordinates sum to zero mod circumference
        let a = gn.loop_point(0, &rat(1, 8));
        let b = gn.loop_point(0, &rat(1, 4));
        let c = gn.loop_triple_complete(0, &a, &b).unwrap();
        assert_eq!(gn.loop_position(0, &c).unwrap(), rat(5, 8));
        // v + v' ~ 2 q_i on the loop, checked through the divisor engine
        let d1 = Divisor::new(gn.graph.clone(), &[(v.clone(), 1), (v_ref.clone(), 1)]).unwrap();
        let d2 = Divisor::new(gn.graph.clone(), &[(gn.q[1].clone(), 2)]).unwrap();
        assert!(crate::divisor::linearly_equivalent(&d1, &d2).unwrap());
    }

    #[test]
    fn path_points_roundtrip() {
        let gn = build_gn(&GnSpec::default_spec(4).unwrap()).unwrap();
        for i in 0..3 {
            let len = gn.spec.base.lengths[i].clone();
            for k in 1..8 {
                let t = rat(k, 8) * &len / rat_int(1);
                let t = &t / rat_int(1);
                if t >= len {
                    continue;
                }
                let p = gn.path_point(i, &t).unwrap();
                assert_eq!(gn.path_offset(i, &p), Some(t));
            }
        }
        // endpoints resolve to v1 / v2
        assert_eq!(gn.path_point(0, &rat_int(0)).unwrap(), gn.v1);
        assert_eq!(
            gn.path_point(0, &gn.spec.base.lengths[0].clone()).unwrap(),
            gn.v2
        );
    }

    #[test]
    fn modification_preserves_genus_and_retracts() {
        let g0 = build_g0(&G0Spec::default_spec()).unwrap();
        let m2 = g0.m[2].clone();
        let modded = elementary_tropical_modification(&g0.graph, &m2, 0).unwrap();
        assert_eq!(modded.graph.genus(), 2);
        let site = modded.embed_point(&m2);
        assert_eq!(modded.graph.valence(&site).unwrap(), 3);
        assert_eq!(modded.retract_point(&site), m2);
        // attaching twice at the same point gives valence 4
        let again = elementary_tropical_modification(&modded.graph, &site, 1).unwrap();
        let site2 = again.embed_point(&site);
        assert_eq!(again.graph.valence(&site2).unwrap(), 4);
        // points on the new ray retract to the site
        let ray = again.graph.edge_by_name("ray1").unwrap();
        let on_ray = Point::OnEdge {
            edge: ray,
            offset: rat_int(5),
        };
        assert_eq!(again.retract_point(&on_ray), site);
    }

    #[test]
    fn modification_enumeration_counts() {
        let g0 = build_g0(&G0Spec::default_spec()).unwrap();
        let sites = vec![g0.v1.clone(), g0.m[1].clone(), g0.q1.clone()];
        let mods = enumerate_modifications(&g0.graph, &sites, 0).unwrap();
        assert_eq!(mods.len(), 1);
        let mods = enumerate_modifications(&g0.graph, &sites, 1).unwrap();
        assert_eq!(mods.len(), 1 + 3);
        let mods = enumerate_modifications(&g0.graph, &sites, 2).unwrap();
        // 1 + 3 + C(3+1, 2) = 1 + 3 + 6
        assert_eq!(mods.len(), 10);
        for m in &mods {
            assert_eq!(m.graph.genus(), 2);
        }
    }
}
