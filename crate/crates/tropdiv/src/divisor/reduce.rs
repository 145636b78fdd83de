//! The metric reduction engine.
//!
//! `reduce` computes the unique `q`-reduced representative of a divisor class
//! in two phases, both expressed as firings of closed sets so the whole run
//! is auditable from the certificate:
//!
//! 1. *Make effective away from `q`*: fire metric balls around `q` in waves,
//!    flooding chips outward until no point other than `q` is negative. Waves
//!    target the farthest debt first; each wave deposits at least one chip on
//!    every debt at that radius, and any new deficits appear strictly closer
//!    to `q`, so the phase terminates.
//! 2. *Burning loop*: run the burning process from `q`; while some closed set
//!    survives, fire the maximal unburnt set by the largest amount that hits
//!    no event (a front reaching a vertex, a chip, or another front).
//!
//! All positions stay rational: firing amounts are minima of differences of
//! existing coordinates, so no new denominators ever appear.
//!
//! The engine works on a private refined copy of the graph in which the
//! divisor support, the base point and every chip landing are vertices.
//! Infinite edges carry no chips and never block fire, so they are retracted
//! up front and tracked only for certificate snapshots.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::metric_graph::{EdgeId, EdgeLength, GraphError, GraphRef, Point, Toward, VertexId};
use crate::rat::{rat_int, Rat};

use super::{Divisor, DivisorError};

/// One chip displacement: a unit of mass moved from `from` to `to` along an
/// edge germ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChipMove {
    pub from: Point,
    pub to: Point,
}

/// A closed subset of the graph: vertices, closed edge segments in original
/// edge coordinates (degenerate `lo == hi` segments are isolated interior
/// points), and infinite edges wholly contained in the set, given as
/// `(edge, start offset)` for the sub-ray `[start, leaf]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSnapshot {
    pub vertices: Vec<VertexId>,
    pub segments: Vec<(EdgeId, Rat, Rat)>,
    pub rays: Vec<(EdgeId, Rat)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    /// ball firing from the make-effective phase
    Flood,
    /// maximal-unburnt-set firing from the burning loop
    Dhar,
}

/// A single fired-set event: the closed set `set` fired by `epsilon`,
/// displacing `moves`.
#[derive(Debug, Clone)]
pub struct FireEvent {
    pub kind: EventKind,
    pub set: SetSnapshot,
    pub epsilon: Rat,
    pub moves: Vec<ChipMove>,
}

/// Full trace of a reduction: replaying the events transforms the input into
/// the output by principal divisors only.
#[derive(Debug, Clone)]
pub struct ReductionCertificate {
    pub input: Vec<(Point, i64)>,
    pub base: Point,
    pub output: Vec<(Point, i64)>,
    pub events: Vec<FireEvent>,
}

impl SetSnapshot {
    fn normalize(&mut self) {
        self.vertices.sort();
        self.vertices.dedup();
        self.rays.sort();
        self.rays.dedup();
        // merge touching/overlapping segments per edge
        self.segments.sort();
        let mut merged: Vec<(EdgeId, Rat, Rat)> = Vec::new();
        for (e, lo, hi) in self.segments.drain(..) {
            if let Some(last) = merged.last_mut() {
                if last.0 == e && lo <= last.2 {
                    if hi > last.2 {
                        last.2 = hi;
                    }
                    continue;
                }
            }
            merged.push((e, lo, hi));
        }
        self.segments = merged;
    }

    /// Whether the germ at `p` along `edge` toward `toward` starts inside the
    /// set.
    fn contains_germ(&self, graph: &GraphRef, p: &Point, edge: EdgeId, toward: Toward) -> bool {
        let e = graph.edge(edge);
        // offset of the germ's base on the edge, and direction sign
        let (off, increasing): (Rat, bool) = match p {
            Point::Vertex(v) => {
                if *v == e.u && toward == Toward::V {
                    (Rat::zero(), true)
                } else if *v == e.v && toward == Toward::U {
                    match &e.length {
                        EdgeLength::Finite(l) => (l.clone(), false),
                        EdgeLength::Infinite => return false, // germ from the leaf inward is never fired
                    }
                } else {
                    return false;
                }
            }
            Point::OnEdge { edge: pe, offset } => {
                if *pe != edge {
                    return false;
                }
                (offset.clone(), toward == Toward::V)
            }
        };
        for (re, start) in &self.rays {
            if *re == edge {
                let inside = if increasing { &off >= start } else { &off > start };
                if inside {
                    return true;
                }
            }
        }
        for (se, lo, hi) in &self.segments {
            if *se != edge {
                continue;
            }
            let inside = if increasing {
                lo <= &off && &off < hi
            } else {
                lo < &off && &off <= hi
            };
            if inside {
                return true;
            }
        }
        false
    }

    fn contains_point(&self, p: &Point) -> bool {
        match p {
            Point::Vertex(v) => self.vertices.contains(v),
            Point::OnEdge { edge, offset } => {
                self.segments
                    .iter()
                    .any(|(se, lo, hi)| se == edge && lo <= offset && offset <= hi)
                    || self
                        .rays
                        .iter()
                        .any(|(re, start)| re == edge && start <= offset)
            }
        }
    }

    /// Boundary points with their exit germs `(edge, toward)`.
    fn boundary(&self, graph: &GraphRef) -> Result<Vec<(Point, Vec<(EdgeId, Toward)>)>, String> {
        let mut candidates: BTreeSet<Point> = BTreeSet::new();
        for v in &self.vertices {
            candidates.insert(Point::Vertex(*v));
        }
        for (e, lo, hi) in &self.segments {
            for off in [lo, hi] {
                let p = graph
                    .canonical_point(&Point::OnEdge {
                        edge: *e,
                        offset: off.clone(),
                    })
                    .map_err(|err| err.to_string())?;
                candidates.insert(p);
            }
        }
        let mut out = Vec::new();
        for p in candidates {
            if !self.contains_point(&p) {
                return Err(format!(
                    "snapshot lists boundary candidate {} outside the set",
                    graph.point_name(&p)
                ));
            }
            let mut exits = Vec::new();
            for dir in graph.tangent_directions(&p).map_err(|e| e.to_string())? {
                if !self.contains_germ(graph, &p, dir.edge, dir.toward) {
                    exits.push((dir.edge, dir.toward));
                }
            }
            if !exits.is_empty() {
                out.push((p, exits));
            }
        }
        Ok(out)
    }

    /// Recomputes the chip moves of firing this set by `epsilon`.
    pub fn fire_moves(&self, graph: &GraphRef, epsilon: &Rat) -> Result<Vec<ChipMove>, String> {
        let mut moves = Vec::new();
        for (p, exits) in self.boundary(graph)? {
            for (edge, toward) in exits {
                let e = graph.edge(edge);
                let base_off: Rat = match &p {
                    Point::Vertex(v) => {
                        if *v == e.u {
                            Rat::zero()
                        } else {
                            match &e.length {
                                EdgeLength::Finite(l) => l.clone(),
                                EdgeLength::Infinite => {
                                    return Err("cannot fire from an infinite leaf".into())
                                }
                            }
                        }
                    }
                    Point::OnEdge { offset, .. } => offset.clone(),
                };
                let target_off = match toward {
                    Toward::V => &base_off + epsilon,
                    Toward::U => &base_off - epsilon,
                };
                let to = graph
                    .canonical_point(&Point::OnEdge {
                        edge,
                        offset: target_off,
                    })
                    .map_err(|err| format!("front overshoots an edge: {err}"))?;
                moves.push(ChipMove {
                    from: p.clone(),
                    to,
                });
            }
        }
        moves.sort();
        Ok(moves)
    }
}

impl ReductionCertificate {
    /// Replays the certificate independently of the engine: recomputes the
    /// moves of every event from its set snapshot, checks they match the
    /// recorded ones, applies them, and compares the final configuration with
    /// the recorded output. Degrees are preserved event by event.
    pub fn verify(&self, graph: &GraphRef) -> Result<(), String> {
        let mut state: BTreeMap<Point, i64> = BTreeMap::new();
        for (p, c) in &self.input {
            *state.entry(p.clone()).or_insert(0) += c;
        }
        state.retain(|_, c| *c != 0);
        let degree: i64 = state.values().sum();
        for (i, ev) in self.events.iter().enumerate() {
            let recomputed = ev.set.fire_moves(graph, &ev.epsilon)?;
            let mut recorded = ev.moves.clone();
            recorded.sort();
            if recomputed != recorded {
                return Err(format!(
                    "event {i}: recorded moves disagree with the fired set"
                ));
            }
            for mv in &recomputed {
                *state.entry(mv.from.clone()).or_insert(0) -= 1;
                *state.entry(mv.to.clone()).or_insert(0) += 1;
            }
            state.retain(|_, c| *c != 0);
            let after: i64 = state.values().sum();
            if after != degree {
                return Err(format!("event {i}: degree changed"));
            }
        }
        let mut expected: BTreeMap<Point, i64> = BTreeMap::new();
        for (p, c) in &self.output {
            *expected.entry(p.clone()).or_insert(0) += c;
        }
        expected.retain(|_, c| *c != 0);
        if state != expected {
            return Err("replay does not reach the recorded output".into());
        }
        Ok(())
    }

    /// Audit rendering with graph names.
    pub fn to_json(&self, graph: &GraphRef) -> serde_json::Value {
        let render_div = |parts: &[(Point, i64)]| {
            parts
                .iter()
                .map(|(p, c)| serde_json::json!([graph.point_name(p), c]))
                .collect::<Vec<_>>()
        };
        serde_json::json!({
            "input": render_div(&self.input),
            "base": graph.point_name(&self.base),
            "output": render_div(&self.output),
            "events": self.events.iter().map(|ev| serde_json::json!({
                "kind": ev.kind,
                "epsilon": crate::rat::format_rat(&ev.epsilon),
                "set": {
                    "vertices": ev.set.vertices.iter().map(|v| graph.vertex_name(*v)).collect::<Vec<_>>(),
                    "segments": ev.set.segments.iter().map(|(e, lo, hi)| serde_json::json!([
                        graph.edge_name(*e),
                        crate::rat::format_rat(lo),
                        crate::rat::format_rat(hi),
                    ])).collect::<Vec<_>>(),
                    "rays": ev.set.rays.iter().map(|(e, start)| serde_json::json!([
                        graph.edge_name(*e),
                        crate::rat::format_rat(start),
                    ])).collect::<Vec<_>>(),
                },
                "moves": ev.moves.iter().map(|m| serde_json::json!([
                    graph.point_name(&m.from),
                    graph.point_name(&m.to),
                ])).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

struct WorkVertex {
    orig: Point,
    chips: i64,
    /// infinite edges hanging here, as (edge, start offset of the sub-ray)
    rays: Vec<(EdgeId, Rat)>,
}

#[derive(Clone)]
struct WorkEdge {
    u: usize,
    v: usize,
    len: Rat,
    orig_edge: EdgeId,
    /// original offsets: `u` sits at `lo`, `v` at `hi`, `lo < hi`
    lo: Rat,
    hi: Rat,
}

struct WorkModel {
    graph: GraphRef,
    verts: Vec<WorkVertex>,
    edges: Vec<WorkEdge>,
    adj: Vec<Vec<usize>>,
    q: usize,
}

impl WorkModel {
    fn build(d: &Divisor, q: &Point) -> Result<Self, DivisorError> {
        let graph = d.graph().clone();
        let q = graph.canonical_point(q)?;
        // base points live on the finite part, like divisor support
        match &q {
            Point::Vertex(v) => {
                if graph.vertex(*v).infinite_leaf {
                    return Err(DivisorError::Graph(GraphError::PointOnInfiniteEdge(
                        graph.vertex_name(*v).to_string(),
                    )));
                }
            }
            Point::OnEdge { edge, .. } => {
                if graph.edge(*edge).length.is_infinite() {
                    return Err(DivisorError::Graph(GraphError::PointOnInfiniteEdge(
                        graph.point_name(&q),
                    )));
                }
            }
        }
        let mut verts: Vec<WorkVertex> = Vec::new();
        let mut vmap: BTreeMap<VertexId, usize> = BTreeMap::new();
        for v in graph.vertex_ids() {
            if graph.vertex(v).infinite_leaf {
                continue;
            }
            vmap.insert(v, verts.len());
            verts.push(WorkVertex {
                orig: Point::Vertex(v),
                chips: 0,
                rays: Vec::new(),
            });
        }
        let mut cuts: BTreeMap<EdgeId, BTreeSet<Rat>> = BTreeMap::new();
        let mut register = |p: &Point| {
            if let Point::OnEdge { edge, offset } = p {
                cuts.entry(*edge).or_default().insert(offset.clone());
            }
        };
        for (p, _) in d.support() {
            register(p);
        }
        register(&q);
        let mut cut_idx: BTreeMap<(EdgeId, Rat), usize> = BTreeMap::new();
        let mut edges: Vec<WorkEdge> = Vec::new();
        for eid in graph.edge_ids() {
            let e = graph.edge(eid);
            match &e.length {
                EdgeLength::Finite(len) => {
                    let empty = BTreeSet::new();
                    let offs = cuts.get(&eid).unwrap_or(&empty);
                    let mut prev_off = Rat::zero();
                    let mut prev_idx = vmap[&e.u];
                    for off in offs {
                        let idx = verts.len();
                        verts.push(WorkVertex {
                            orig: Point::OnEdge {
                                edge: eid,
                                offset: off.clone(),
                            },
                            chips: 0,
                            rays: Vec::new(),
                        });
                        cut_idx.insert((eid, off.clone()), idx);
                        edges.push(WorkEdge {
                            u: prev_idx,
                            v: idx,
                            len: off - &prev_off,
                            orig_edge: eid,
                            lo: prev_off.clone(),
                            hi: off.clone(),
                        });
                        prev_off = off.clone();
                        prev_idx = idx;
                    }
                    edges.push(WorkEdge {
                        u: prev_idx,
                        v: vmap[&e.v],
                        len: len - &prev_off,
                        orig_edge: eid,
                        lo: prev_off,
                        hi: len.clone(),
                    });
                }
                EdgeLength::Infinite => {
                    // no chips and no base point here: track only for snapshots
                    let site = if graph.vertex(e.u).infinite_leaf {
                        e.v
                    } else {
                        e.u
                    };
                    let site_idx = vmap[&site];
                    verts[site_idx].rays.push((eid, Rat::zero()));
                }
            }
        }
        for (p, c) in d.support() {
            let idx = match p {
                Point::Vertex(v) => vmap[v],
                Point::OnEdge { edge, offset } => cut_idx[&(*edge, offset.clone())],
            };
            verts[idx].chips += c;
        }
        let q_idx = match &q {
            Point::Vertex(v) => vmap[v],
            Point::OnEdge { edge, offset } => cut_idx[&(*edge, offset.clone())],
        };
        let mut model = WorkModel {
            graph,
            verts,
            edges,
            adj: Vec::new(),
            q: q_idx,
        };
        model.rebuild_adjacency();
        Ok(model)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.verts.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push(i);
            adj[e.v].push(i);
        }
        self.adj = adj;
    }

    fn other(&self, e: usize, x: usize) -> usize {
        let edge = &self.edges[e];
        if edge.u == x {
            edge.v
        } else {
            edge.u
        }
    }

    /// Splits work edges at interior positions; `splits` maps an edge index
    /// to positions from the `u` end, strictly inside. Returns the new vertex
    /// index per (edge, position). Adjacency is rebuilt.
    fn split_edges(&mut self, splits: BTreeMap<usize, BTreeSet<Rat>>) -> BTreeMap<(usize, Rat), usize> {
        let mut created = BTreeMap::new();
        for (e, positions) in splits {
            let old = self.edges[e].clone();
            let mut prev_idx = old.u;
            let mut prev_t = Rat::zero();
            let mut first = true;
            for t in &positions {
                debug_assert!(t > &Rat::zero() && t < &old.len);
                let orig_off = &old.lo + t;
                let idx = self.verts.len();
                self.verts.push(WorkVertex {
                    orig: Point::OnEdge {
                        edge: old.orig_edge,
                        offset: orig_off.clone(),
                    },
                    chips: 0,
                    rays: Vec::new(),
                });
                created.insert((e, t.clone()), idx);
                let piece = WorkEdge {
                    u: prev_idx,
                    v: idx,
                    len: t - &prev_t,
                    orig_edge: old.orig_edge,
                    lo: &old.lo + &prev_t,
                    hi: orig_off,
                };
                if first {
                    self.edges[e] = piece;
                    first = false;
                } else {
                    self.edges.push(piece);
                }
                prev_t = t.clone();
                prev_idx = idx;
            }
            self.edges.push(WorkEdge {
                u: prev_idx,
                v: old.v,
                len: &old.len - &prev_t,
                orig_edge: old.orig_edge,
                lo: &old.lo + &prev_t,
                hi: old.hi.clone(),
            });
        }
        self.rebuild_adjacency();
        created
    }

    /// Burning from `q`. A point burns once the count of burnt germs arriving
    /// at it exceeds its chip count; fire sweeps whole work edges (their
    /// interiors carry no chips). The result does not depend on the scan
    /// order; `seed` shuffles it to let tests check exactly that.
    fn burn(&self, seed: Option<u64>) -> Vec<bool> {
        let mut burnt = vec![false; self.verts.len()];
        let mut arrivals = vec![0i64; self.verts.len()];
        let mut swept = vec![[false; 2]; self.edges.len()];
        let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
        let mut queue: Vec<(usize, bool)> = Vec::new();
        burnt[self.q] = true;
        for &e in &self.adj[self.q] {
            queue.push((e, self.edges[e].u == self.q));
        }
        while !queue.is_empty() {
            let pick = match &mut rng {
                Some(r) => r.gen_range(0..queue.len()),
                None => queue.len() - 1,
            };
            let (e, from_u) = queue.swap_remove(pick);
            let side = usize::from(from_u);
            if swept[e][side] {
                continue;
            }
            swept[e][side] = true;
            let far = if from_u { self.edges[e].v } else { self.edges[e].u };
            arrivals[far] += 1;
            if !burnt[far] && (far == self.q || arrivals[far] > self.verts[far].chips) {
                burnt[far] = true;
                for &f in &self.adj[far] {
                    queue.push((f, self.edges[f].u == far));
                }
            }
        }
        burnt
    }

    fn dijkstra(&self) -> Vec<Rat> {
        let mut dist: Vec<Option<Rat>> = vec![None; self.verts.len()];
        let mut heap: BinaryHeap<std::cmp::Reverse<(Rat, usize)>> = BinaryHeap::new();
        dist[self.q] = Some(Rat::zero());
        heap.push(std::cmp::Reverse((Rat::zero(), self.q)));
        while let Some(std::cmp::Reverse((d, x))) = heap.pop() {
            if dist[x].as_ref() != Some(&d) {
                continue;
            }
            for &e in &self.adj[x] {
                let w = self.other(e, x);
                let nd = &d + &self.edges[e].len;
                let better = match &dist[w] {
                    None => true,
                    Some(old) => &nd < old,
                };
                if better {
                    dist[w] = Some(nd.clone());
                    heap.push(std::cmp::Reverse((nd, w)));
                }
            }
        }
        dist.into_iter()
            .map(|d| d.expect("work model is connected"))
            .collect()
    }

    fn current_support(&self) -> Vec<(Point, i64)> {
        self.verts
            .iter()
            .filter(|v| v.chips != 0)
            .map(|v| (v.orig.clone(), v.chips))
            .collect()
    }

    /// Snapshot of `{x : dist(x) <= s}` together with hanging rays.
    fn ball_snapshot(&self, dist: &[Rat], s: &Rat) -> SetSnapshot {
        let two = rat_int(2);
        let mut snap = SetSnapshot {
            vertices: Vec::new(),
            segments: Vec::new(),
            rays: Vec::new(),
        };
        for (i, wv) in self.verts.iter().enumerate() {
            if &dist[i] > s {
                continue;
            }
            match &wv.orig {
                Point::Vertex(v) => snap.vertices.push(*v),
                Point::OnEdge { edge, offset } => {
                    snap.segments.push((*edge, offset.clone(), offset.clone()));
                }
            }
            for ray in &wv.rays {
                snap.rays.push(ray.clone());
            }
        }
        for e in &self.edges {
            let (du, dv) = (&dist[e.u], &dist[e.v]);
            // portion reachable from the u side before the in-edge ridge
            if du <= s {
                let ridge = (dv + &e.len - du) / &two;
                let a = std::cmp::min(s - du, ridge);
                if a > Rat::zero() {
                    let hi = std::cmp::min(&e.lo + &a, e.hi.clone());
                    snap.segments.push((e.orig_edge, e.lo.clone(), hi));
                }
            }
            if dv <= s {
                let ridge = (du + &e.len - dv) / &two;
                let b = std::cmp::min(s - dv, ridge);
                if b > Rat::zero() {
                    let lo = std::cmp::max(&e.hi - &b, e.lo.clone());
                    snap.segments.push((e.orig_edge, lo, e.hi.clone()));
                }
            }
        }
        snap.normalize();
        snap
    }

    /// Snapshot of the unburnt closed set.
    fn unburnt_snapshot(&self, burnt: &[bool]) -> SetSnapshot {
        let mut snap = SetSnapshot {
            vertices: Vec::new(),
            segments: Vec::new(),
            rays: Vec::new(),
        };
        for (i, wv) in self.verts.iter().enumerate() {
            if burnt[i] {
                continue;
            }
            match &wv.orig {
                Point::Vertex(v) => snap.vertices.push(*v),
                Point::OnEdge { edge, offset } => {
                    snap.segments.push((*edge, offset.clone(), offset.clone()));
                }
            }
            for ray in &wv.rays {
                snap.rays.push(ray.clone());
            }
        }
        for e in &self.edges {
            if !burnt[e.u] && !burnt[e.v] {
                snap.segments.push((e.orig_edge, e.lo.clone(), e.hi.clone()));
            }
        }
        snap.normalize();
        snap
    }

    fn orig_point_at(&self, e: usize, t: &Rat) -> Point {
        let edge = &self.edges[e];
        self.graph
            .canonical_point(&Point::OnEdge {
                edge: edge.orig_edge,
                offset: &edge.lo + t,
            })
            .expect("position stays on the original edge")
    }

    /// Applies one firing round given the per-front travel `(vertex, edge)`
    /// list and the amount `eps`; returns the recorded moves.
    fn apply_fronts(&mut self, fronts: &[(usize, usize)], eps: &Rat) -> Vec<ChipMove> {
        let mut moves = Vec::new();
        let mut landings: BTreeMap<usize, BTreeMap<Rat, i64>> = BTreeMap::new();
        for &(x, e) in fronts {
            self.verts[x].chips -= 1;
            let from = self.verts[x].orig.clone();
            let from_u = self.edges[e].u == x;
            let t_u = if from_u {
                eps.clone()
            } else {
                &self.edges[e].len - eps
            };
            if t_u.is_zero() || t_u == self.edges[e].len {
                let target = if t_u.is_zero() {
                    self.edges[e].u
                } else {
                    self.edges[e].v
                };
                self.verts[target].chips += 1;
                moves.push(ChipMove {
                    from,
                    to: self.verts[target].orig.clone(),
                });
            } else {
                *landings.entry(e).or_default().entry(t_u.clone()).or_insert(0) += 1;
                moves.push(ChipMove {
                    from,
                    to: self.orig_point_at(e, &t_u),
                });
            }
        }
        if !landings.is_empty() {
            let splits: BTreeMap<usize, BTreeSet<Rat>> = landings
                .iter()
                .map(|(e, m)| (*e, m.keys().cloned().collect()))
                .collect();
            let created = self.split_edges(splits);
            for (e, m) in landings {
                for (t, count) in m {
                    let idx = created[&(e, t)];
                    self.verts[idx].chips += count;
                }
            }
        }
        moves.sort();
        moves
    }

    /// Phase 1: flood chips outward in waves until every point other than `q`
    /// is nonnegative.
    fn make_effective(&mut self, events: &mut Vec<FireEvent>) -> Result<(), DivisorError> {
        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > 100_000 {
                return Err(DivisorError::Internal(
                    "make-effective exceeded its iteration budget".into(),
                ));
            }
            let mut dist = self.dijkstra();
            let Some(target) = (0..self.verts.len())
                .filter(|&i| i != self.q && self.verts[i].chips < 0)
                .max_by(|&a, &b| dist[a].cmp(&dist[b]))
            else {
                return Ok(());
            };
            let ell = dist[target].clone();
            let mut s = Rat::zero();
            while s < ell {
                // fronts: dist-increasing germs at the sphere of radius s
                let sphere: Vec<usize> = (0..self.verts.len()).filter(|&i| dist[i] == s).collect();
                let mut fronts: Vec<(usize, usize)> = Vec::new();
                let mut eps = &ell - &s;
                for &x in &sphere {
                    for &e in &self.adj[x] {
                        let w = self.other(e, x);
                        let cap = (&dist[w] + &self.edges[e].len - &dist[x]) / rat_int(2);
                        if cap.is_zero() {
                            continue; // downhill germ, inside the ball
                        }
                        debug_assert!(cap > Rat::zero());
                        fronts.push((x, e));
                        if cap < eps {
                            eps = cap;
                        }
                    }
                }
                debug_assert!(!fronts.is_empty(), "ball below a debt always has fronts");
                let snap = self.ball_snapshot(&dist, &s);
                let before = self.verts.len();
                let moves = self.apply_fronts(&fronts, &eps);
                s += &eps;
                for i in before..self.verts.len() {
                    dist.push(s.clone());
                    debug_assert_eq!(dist.len(), i + 1);
                }
                events.push(FireEvent {
                    kind: EventKind::Flood,
                    set: snap,
                    epsilon: eps,
                    moves,
                });
            }
        }
    }

    /// Phase 2: the burning loop.
    fn dhar_reduce(
        &mut self,
        events: &mut Vec<FireEvent>,
        seed: Option<u64>,
    ) -> Result<(), DivisorError> {
        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > 1_000_000 {
                return Err(DivisorError::Internal(
                    "burning loop exceeded its iteration budget".into(),
                ));
            }
            let burnt = self.burn(seed.map(|b| b.wrapping_add(guard as u64)));
            if burnt.iter().all(|&b| b) {
                return Ok(());
            }
            let mut fronts: Vec<(usize, usize)> = Vec::new();
            let mut eps: Option<Rat> = None;
            for x in 0..self.verts.len() {
                if burnt[x] {
                    continue;
                }
                for &e in &self.adj[x] {
                    let w = self.other(e, x);
                    if !burnt[w] {
                        continue;
                    }
                    fronts.push((x, e));
                    let len = &self.edges[e].len;
                    if eps.as_ref().map_or(true, |cur| len < cur) {
                        eps = Some(len.clone());
                    }
                }
            }
            let eps = eps.expect("a surviving set has exits");
            // the boundary never fires more chips than it holds
            debug_assert!(fronts.iter().all(|&(x, _)| self.verts[x].chips > 0));
            let snap = self.unburnt_snapshot(&burnt);
            let moves = self.apply_fronts(&fronts, &eps);
            events.push(FireEvent {
                kind: EventKind::Dhar,
                set: snap,
                epsilon: eps,
                moves,
            });
        }
    }
}

pub(super) fn is_reduced_impl(
    d: &Divisor,
    q: &Point,
    seed: Option<u64>,
) -> Result<bool, DivisorError> {
    let q = d.graph().canonical_point(q)?;
    if let Some((p, _)) = d
        .support()
        .find(|(p, c)| *c < 0 && **p != q)
    {
        return Err(DivisorError::NegativeAway(d.graph().point_name(p)));
    }
    let wm = WorkModel::build(d, &q)?;
    Ok(wm.burn(seed).iter().all(|&b| b))
}

pub(super) fn reduce_impl(
    d: &Divisor,
    q: &Point,
    seed: Option<u64>,
) -> Result<(Divisor, ReductionCertificate), DivisorError> {
    let graph = d.graph().clone();
    let q = graph.canonical_point(q)?;
    let mut wm = WorkModel::build(d, &q)?;
    let mut events = Vec::new();
    wm.make_effective(&mut events)?;
    wm.dhar_reduce(&mut events, seed)?;
    let output = Divisor::new(graph, &wm.current_support())?;
    let cert = ReductionCertificate {
        input: d.support_vec(),
        base: q,
        output: output.support_vec(),
        events,
    };
    Ok((output, cert))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::metric_graph::{GraphBuilder, MetricGraph, Point};
    use crate::rat::{rat, rat_int};
    use std::sync::Arc;

    fn theta(a: i64, b: i64, c: i64) -> GraphRef {
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.edge("e0", v1, v2, rat_int(a));
        gb.edge("e1", v1, v2, rat_int(b));
        gb.edge("e2", v1, v2, rat_int(c));
        Arc::new(gb.build().unwrap())
    }

    fn circle(a: i64, b: i64) -> GraphRef {
        let mut gb = GraphBuilder::new();
        let v0 = gb.vertex("v0");
        let v1 = gb.vertex("v1");
        gb.edge("c0", v0, v1, rat_int(a));
        gb.edge("c1", v1, v0, rat_int(b));
        Arc::new(gb.build().unwrap())
    }

    fn vx(g: &MetricGraph, name: &str) -> Point {
        Point::Vertex(g.vertex_by_name(name).unwrap())
    }

    fn ept(g: &MetricGraph, edge: &str, num: i64, den: i64) -> Point {
        Point::OnEdge {
            edge: g.edge_by_name(edge).unwrap(),
            offset: rat(num, den),
        }
    }

    #[test]
    fn reduce_on_circle_splits_pile() {
        // circle of circumference 3; two chips at distance 1 from the base
        let g = circle(1, 2);
        let p = vx(&g, "v1");
        let d = Divisor::new(g.clone(), &[(p, 2)]).unwrap();
        let q = vx(&g, "v0");
        let (r, cert) = reduce(&d, &q).unwrap();
        // expected: one chip at the base, one at its "mirror" across the pile
        let mirror = ept(&g, "c1", 1, 1);
        assert_eq!(r.coeff(&q), 1);
        assert_eq!(r.coeff(&mirror), 1);
        assert_eq!(r.degree(), 2);
        cert.verify(&g).unwrap();
        assert!(is_reduced(&r, &q).unwrap());
    }

    #[test]
    fn reduced_divisor_is_fixed_point() {
        let g = theta(2, 3, 5);
        let q = vx(&g, "v2");
        let d = Divisor::new(g.clone(), &[(vx(&g, "v1"), 1), (ept(&g, "e1", 1, 2), 1)]).unwrap();
        assert!(is_reduced(&d, &q).unwrap());
        let (r, cert) = reduce(&d, &q).unwrap();
        assert_eq!(r, d);
        assert!(cert.events.is_empty());
    }

    #[test]
    fn two_midpoint_chips_reduce_to_branch_points() {
        // the unique degree-2 class of the theta graph
        let g = theta(2, 3, 5);
        let m0 = ept(&g, "e0", 1, 1);
        let d = Divisor::new(g.clone(), &[(m0, 2)]).unwrap();
        let q = vx(&g, "v2");
        let (r, cert) = reduce(&d, &q).unwrap();
        let expected =
            Divisor::new(g.clone(), &[(vx(&g, "v1"), 1), (vx(&g, "v2"), 1)]).unwrap();
        assert_eq!(r, expected);
        cert.verify(&g).unwrap();
        // idempotent
        let (r2, _) = reduce(&r, &q).unwrap();
        assert_eq!(r2, r);
    }

    #[test]
    fn equivalences_on_theta() {
        let g = theta(2, 3, 5);
        let m0 = ept(&g, "e0", 1, 1);
        let m1 = ept(&g, "e1", 3, 2);
        let m2 = ept(&g, "e2", 5, 2);
        let v1v2 = Divisor::new(g.clone(), &[(vx(&g, "v1"), 1), (vx(&g, "v2"), 1)]).unwrap();
        for m in [m0, m1, m2] {
            let dm = Divisor::new(g.clone(), &[(m, 2)]).unwrap();
            assert!(linearly_equivalent(&dm, &v1v2).unwrap());
        }
        // generic doubles are inequivalent to the special class
        let generic = Divisor::new(g.clone(), &[(ept(&g, "e1", 1, 2), 2)]).unwrap();
        assert!(!linearly_equivalent(&generic, &v1v2).unwrap());
    }

    #[test]
    fn emptiness_of_negative_classes() {
        let g = theta(2, 3, 5);
        let v1 = vx(&g, "v1");
        let v2 = vx(&g, "v2");
        // v1 + v - v2 has no effective representative for generic v
        let v = ept(&g, "e2", 1, 1);
        let d = Divisor::new(g.clone(), &[(v1.clone(), 1), (v, 1), (v2.clone(), -1)]).unwrap();
        assert!(!has_effective_representative(&d).unwrap());
        // but v1 + v2 - 2*m1 does have one (the class is 2*m1 itself)
        let m1 = ept(&g, "e1", 3, 2);
        let d = Divisor::new(
            g.clone(),
            &[(v1.clone(), 1), (v2.clone(), 1), (m1, -2)],
        )
        .unwrap();
        assert!(has_effective_representative(&d).unwrap());
    }

    #[test]
    fn make_effective_handles_debt_at_leaf() {
        // path: debts at a far leaf can only be paid by flooding outward
        let mut gb = GraphBuilder::new();
        let a = gb.vertex("a");
        let b = gb.vertex("b");
        let c = gb.vertex("c");
        gb.edge("e0", a, b, rat_int(1));
        gb.edge("e1", b, c, rat_int(2));
        let g: GraphRef = Arc::new(gb.build().unwrap());
        let d = Divisor::new(g.clone(), &[(vx(&g, "c"), -1)]).unwrap();
        let q = vx(&g, "a");
        let (r, cert) = reduce(&d, &q).unwrap();
        assert!(r.is_effective_away_from(&q));
        assert_eq!(r.degree(), -1);
        // trees: the class collapses onto the base point
        assert_eq!(r.coeff(&q), -1);
        cert.verify(&g).unwrap();
    }

    #[test]
    fn scan_order_does_not_change_result() {
        let g = theta(2, 3, 5);
        let d = Divisor::new(
            g.clone(),
            &[
                (ept(&g, "e2", 7, 4), 3),
                (vx(&g, "v1"), -1),
                (ept(&g, "e1", 1, 4), 1),
            ],
        )
        .unwrap();
        let q = vx(&g, "v2");
        let (r0, _) = reduce(&d, &q).unwrap();
        for seed in [1u64, 7, 42, 1234] {
            let (r, cert) = reduce_seeded(&d, &q, seed).unwrap();
            assert_eq!(r, r0);
            cert.verify(&g).unwrap();
        }
    }

    #[test]
    fn agrees_with_discrete_oracle_on_lattice() {
        use crate::oracle::UnitSubdivision;
        let g = theta(2, 3, 5);
        let sub = UnitSubdivision::new(&g).unwrap();
        let lattice = sub.lattice();
        // a handful of lattice divisors, including negative coefficients
        let cases: Vec<Vec<(usize, i64)>> = vec![
            vec![(2, 2)],
            vec![(3, 1), (5, 1), (0, -1)],
            vec![(8, 3), (1, -2)],
            vec![(4, 1), (6, 1), (7, 1)],
        ];
        for case in cases {
            let support: Vec<(Point, i64)> = case
                .iter()
                .map(|&(n, c)| (lattice[n].1.clone(), c))
                .collect();
            let d = Divisor::new(g.clone(), &support).unwrap();
            for qn in [0usize, 1, 4] {
                let q = lattice[qn].1.clone();
                let (r, cert) = reduce(&d, &q).unwrap();
                cert.verify(&g).unwrap();
                let dd = sub.divisor_vector(&d.support_vec()).unwrap();
                let rd = sub.graph.reduce(&dd, qn);
                let expected = sub.divisor_support(&rd);
                let expected = Divisor::new(g.clone(), &expected).unwrap();
                assert_eq!(r, expected, "case {case:?} at q={qn}");
            }
        }
    }

    #[test]
    fn reduction_on_modified_graph_ignores_rays() {
        // attached infinite edges never block fire and never carry chips
        let mut gb = GraphBuilder::new();
        let v0 = gb.vertex("v0");
        let v1 = gb.vertex("v1");
        gb.edge("c0", v0, v1, rat_int(1));
        gb.edge("c1", v1, v0, rat_int(2));
        let leaf = gb.infinite_leaf("linf");
        gb.infinite_edge("ray", v0, leaf);
        let g: GraphRef = Arc::new(gb.build().unwrap());
        let d = Divisor::new(g.clone(), &[(vx(&g, "v1"), 2)]).unwrap();
        let q = vx(&g, "v0");
        let (r, cert) = reduce(&d, &q).unwrap();
        assert!(r.is_effective_away_from(&q));
        assert_eq!(r.degree(), 2);
        cert.verify(&g).unwrap();
        assert!(is_reduced(&r, &q).unwrap());
        // base points on infinite edges are rejected up front
        let ray_q = ept(&g, "ray", 3, 2);
        assert!(reduce(&d, &ray_q).is_err());
    }
}
