//! Brute-force discrete reference implementations.
//!
//! Everything here works on plain multigraphs with unit edge lengths and
//! integer chip counts, with no shared code with the metric engine. The test
//! suites compare the metric routines against these on integer-length graphs
//! with lattice-supported divisors.

use std::collections::VecDeque;

use crate::metric_graph::{EdgeId, MetricGraph, Point, VertexId};
use crate::rat::{rat_int, to_i64, Rat};

/// A finite multigraph. Parallel edges allowed, self-loops not.
#[derive(Debug, Clone)]
pub struct DiscreteGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl DiscreteGraph {
    pub fn incident(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter_map(move |(i, &(a, b))| {
                if a == v {
                    Some((i, b))
                } else if b == v {
                    Some((i, a))
                } else {
                    None
                }
            })
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident(v).count()
    }

    pub fn genus(&self) -> usize {
        self.edges.len() + 1 - self.n
    }

    fn bfs_levels(&self, from: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.n];
        level[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for (_, w) in self.incident(v) {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        level
    }

    /// Fires every vertex of `set` once: one chip crosses each edge leaving
    /// the set.
    fn fire_set(&self, div: &mut [i64], set: &[bool]) {
        for (&(a, b), _) in self.edges.iter().zip(0..) {
            match (set[a], set[b]) {
                (true, false) => {
                    div[a] -= 1;
                    div[b] += 1;
                }
                (false, true) => {
                    div[b] -= 1;
                    div[a] += 1;
                }
                _ => {}
            }
        }
    }

    /// Dhar's burning from `q`: returns the burnt set. A vertex burns once
    /// the number of edges arriving from burnt territory exceeds its chips.
    fn burn(&self, div: &[i64], q: usize) -> Vec<bool> {
        let mut burnt = vec![false; self.n];
        burnt[q] = true;
        loop {
            let mut changed = false;
            for v in 0..self.n {
                if burnt[v] {
                    continue;
                }
                let arrivals = self.incident(v).filter(|&(_, w)| burnt[w]).count() as i64;
                if arrivals > div[v] {
                    burnt[v] = true;
                    changed = true;
                }
            }
            if !changed {
                return burnt;
            }
        }
    }

    /// The unique `q`-reduced divisor equivalent to `div`.
    pub fn reduce(&self, div: &[i64], q: usize) -> Vec<i64> {
        let mut d = div.to_vec();
        let levels = self.bfs_levels(q);
        // make effective away from q: push chips outward, deepest debts first
        loop {
            let Some(target) = (0..self.n)
                .filter(|&v| v != q && d[v] < 0)
                .max_by_key(|&v| (levels[v], v))
            else {
                break;
            };
            let target_level = levels[target];
            // fire the nested balls strictly inside the target level
            for level in 0..target_level {
                let set: Vec<bool> = (0..self.n).map(|v| levels[v] <= level).collect();
                self.fire_set(&mut d, &set);
            }
        }
        // Dhar loop: fire the maximal unburnt set until everything burns
        loop {
            let burnt = self.burn(&d, q);
            if burnt.iter().all(|&b| b) {
                return d;
            }
            let set: Vec<bool> = burnt.iter().map(|&b| !b).collect();
            self.fire_set(&mut d, &set);
        }
    }

    pub fn is_reduced(&self, div: &[i64], q: usize) -> bool {
        (0..self.n).all(|v| v == q || div[v] >= 0) && self.burn(div, q).iter().all(|&b| b)
    }

    /// Whether some effective divisor is equivalent to `div`.
    pub fn has_effective(&self, div: &[i64]) -> bool {
        if div.iter().sum::<i64>() < 0 {
            return false;
        }
        let r = self.reduce(div, 0);
        r[0] >= 0
    }

    /// Brute-force Baker-Norine rank: the largest `r` such that `div - e`
    /// keeps an effective representative for every effective `e` of degree
    /// `r` supported on the vertices.
    pub fn rank(&self, div: &[i64]) -> i64 {
        let deg: i64 = div.iter().sum();
        if deg < 0 || !self.has_effective(div) {
            return -1;
        }
        let mut r: i64 = 0;
        loop {
            if r + 1 > deg {
                return r;
            }
            if self.all_removals_effective(div, (r + 1) as usize) {
                r += 1;
            } else {
                return r;
            }
        }
    }

    fn all_removals_effective(&self, div: &[i64], k: usize) -> bool {
        // iterate multisets of k vertices
        let mut pick = vec![0usize; k];
        loop {
            let mut d = div.to_vec();
            for &v in &pick {
                d[v] -= 1;
            }
            if !self.has_effective(&d) {
                return false;
            }
            // next multiset (non-decreasing sequences over 0..n)
            let mut i = k;
            loop {
                if i == 0 {
                    return true;
                }
                i -= 1;
                if pick[i] + 1 < self.n {
                    let nv = pick[i] + 1;
                    for item in pick.iter_mut().skip(i) {
                        *item = nv;
                    }
                    break;
                }
            }
        }
    }
}

/// Unit subdivision of an integer-length metric graph, with the lattice
/// point correspondence.
pub struct UnitSubdivision {
    pub graph: DiscreteGraph,
    /// metric vertex -> node index
    vertex_nodes: Vec<usize>,
    /// per metric edge: interior nodes at offsets 1..len-1, in order
    edge_nodes: Vec<Vec<usize>>,
}

impl UnitSubdivision {
    /// Builds the subdivision; edge lengths must be positive integers and the
    /// graph must have no infinite edges.
    pub fn new(g: &MetricGraph) -> Option<Self> {
        if g.has_infinite_edges() {
            return None;
        }
        let mut vertex_nodes = Vec::new();
        for _ in g.vertex_ids() {
            vertex_nodes.push(vertex_nodes.len());
        }
        let mut next = vertex_nodes.len();
        let mut edges = Vec::new();
        let mut edge_nodes = Vec::new();
        for e in g.edge_ids() {
            let edge = g.edge(e);
            let len = to_i64(edge.length.finite()?)?;
            if len <= 0 {
                return None;
            }
            let mut interior = Vec::new();
            let mut prev = vertex_nodes[edge.u.0 as usize];
            for _ in 1..len {
                edges.push((prev, next));
                interior.push(next);
                prev = next;
                next += 1;
            }
            edges.push((prev, vertex_nodes[edge.v.0 as usize]));
            edge_nodes.push(interior);
        }
        Some(UnitSubdivision {
            graph: DiscreteGraph { n: next, edges },
            vertex_nodes,
            edge_nodes,
        })
    }

    /// Node index of a lattice point (vertex or integer offset).
    pub fn node_of(&self, p: &Point) -> Option<usize> {
        match p {
            Point::Vertex(v) => Some(self.vertex_nodes[v.0 as usize]),
            Point::OnEdge { edge, offset } => {
                let k = to_i64(offset)?;
                let interior = &self.edge_nodes[edge.0 as usize];
                let idx = usize::try_from(k).ok()?.checked_sub(1)?;
                interior.get(idx).copied()
            }
        }
    }

    /// Lattice point of a node index.
    pub fn point_of(&self, node: usize) -> Point {
        if let Some(v) = self.vertex_nodes.iter().position(|&n| n == node) {
            return Point::Vertex(VertexId(v as u32));
        }
        for (e, interior) in self.edge_nodes.iter().enumerate() {
            if let Some(k) = interior.iter().position(|&n| n == node) {
                return Point::OnEdge {
                    edge: EdgeId(e as u32),
                    offset: rat_int(k as i64 + 1),
                };
            }
        }
        unreachable!("node belongs to some edge or vertex")
    }

    /// All lattice points as (node, point) pairs, by node index.
    pub fn lattice(&self) -> Vec<(usize, Point)> {
        (0..self.graph.n).map(|n| (n, self.point_of(n))).collect()
    }

    pub fn divisor_vector(&self, support: &[(Point, i64)]) -> Option<Vec<i64>> {
        let mut d = vec![0i64; self.graph.n];
        for (p, c) in support {
            d[self.node_of(p)?] += c;
        }
        Some(d)
    }

    /// Renders a node vector back to (point, coefficient) pairs.
    pub fn divisor_support(&self, d: &[i64]) -> Vec<(Point, i64)> {
        d.iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(n, &c)| (self.point_of(n), c))
            .collect()
    }
}

/// Distance on the unit subdivision as a rational (for cross-checks).
pub fn lattice_distance(sub: &UnitSubdivision, a: usize, b: usize) -> Rat {
    let mut level = vec![usize::MAX; sub.graph.n];
    level[a] = 0;
    let mut queue = VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        for (_, w) in sub.graph.incident(v) {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    rat_int(level[b] as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> DiscreteGraph {
        // u - x - v
        DiscreteGraph {
            n: 3,
            edges: vec![(0, 1), (1, 2)],
        }
    }

    fn cycle(n: usize) -> DiscreteGraph {
        DiscreteGraph {
            n,
            edges: (0..n).map(|i| (i, (i + 1) % n)).collect(),
        }
    }

    #[test]
    fn reduce_on_path_pulls_to_base() {
        let g = path3();
        let r = g.reduce(&[0, 0, 1], 0);
        assert_eq!(r, vec![1, 0, 0]);
        let r = g.reduce(&[0, 2, 3], 0);
        assert_eq!(r, vec![5, 0, 0]);
    }

    #[test]
    fn reduce_on_cycle() {
        let g = cycle(3);
        // two chips at node 1 on a triangle, reduced at 0
        let r = g.reduce(&[0, 2, 0], 0);
        assert_eq!(r, vec![1, 0, 1]);
        assert!(g.is_reduced(&[1, 0, 1], 0));
        assert!(!g.is_reduced(&[0, 2, 0], 0));
    }

    #[test]
    fn reduce_handles_debt() {
        let g = cycle(4);
        let r = g.reduce(&[0, -1, 0, 0], 0);
        assert!(r.iter().skip(1).all(|&c| c >= 0));
        assert_eq!(r.iter().sum::<i64>(), -1);
        // degree -1 has no effective representative
        assert!(!g.has_effective(&[0, -1, 0, 0]));
    }

    #[test]
    fn rank_known_values() {
        // tree: rank = degree for effective divisors
        let g = path3();
        assert_eq!(g.rank(&[0, 0, 2]), 2);
        assert_eq!(g.rank(&[1, 0, 0]), 1);
        // circle: rank(P) = 0, rank(2P) = 1, genus 1
        let c = cycle(4);
        assert_eq!(c.rank(&[1, 0, 0, 0]), 0);
        assert_eq!(c.rank(&[2, 0, 0, 0]), 1);
        assert_eq!(c.rank(&[0, 0, 0, 0]), 0);
        assert_eq!(c.rank(&[-1, 0, 0, 0]), -1);
        // a point plus its antipode on an even cycle is not special
        assert_eq!(c.rank(&[1, 0, 1, 0]), 1);
    }

    #[test]
    fn rank_theta_graph() {
        // theta with unit-subdivided edges of lengths 2,2,2: genus 2
        // K = v1 + v2 has rank 1 (midpoint doubles are equivalent)
        let g = DiscreteGraph {
            n: 5,
            edges: vec![(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 1)],
        };
        assert_eq!(g.genus(), 2);
        assert_eq!(g.rank(&[1, 1, 0, 0, 0]), 1);
        let mut two_mid = vec![0; 5];
        two_mid[2] = 2;
        assert_eq!(g.rank(&two_mid), 1);
        // degree-1 divisors on a genus-2 graph have rank 0
        assert_eq!(g.rank(&[1, 0, 0, 0, 0]), 0);
    }

    #[test]
    fn unit_subdivision_roundtrip() {
        use crate::metric_graph::GraphBuilder;
        use crate::rat::rat_int;
        let mut gb = GraphBuilder::new();
        let v1 = gb.vertex("v1");
        let v2 = gb.vertex("v2");
        gb.edge("e0", v1, v2, rat_int(2));
        gb.edge("e1", v1, v2, rat_int(3));
        let g = gb.build().unwrap();
        let sub = UnitSubdivision::new(&g).unwrap();
        assert_eq!(sub.graph.n, 2 + 1 + 2);
        assert_eq!(sub.graph.edges.len(), 5);
        assert_eq!(sub.graph.genus(), g.genus());
        for (node, point) in sub.lattice() {
            assert_eq!(sub.node_of(&point), Some(node));
        }
    }
}
