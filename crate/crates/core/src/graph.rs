//! Difference graphs: vertices carry unknown potentials, directed edges carry
//! a measured integer difference `gamma` (target minus source) and a weight.
//!
//! Cycles are stored as signed edge walks. The constructors here emit one
//! cycle family per edge family so that every edge is covered:
//! hull triangles, inter-aural quadrilaterals, delta triangles and
//! inter-frequency quadrilaterals.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::hull::HullTriangulation;

/// Smallest weight any edge may carry.
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    IntraAural,
    InterAural,
    AbsoluteDelta,
    InterFrequency,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::IntraAural => "intra",
            EdgeKind::InterAural => "inter",
            EdgeKind::AbsoluteDelta => "delta",
            EdgeKind::InterFrequency => "freq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub gamma: i64,
    pub weight: f64,
    pub kind: EdgeKind,
}

/// One step of a cycle walk: traverse `edge` forward (u to v) or backward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleStep {
    pub edge: usize,
    pub forward: bool,
}

impl CycleStep {
    pub fn fwd(edge: usize) -> Self {
        Self { edge, forward: true }
    }

    pub fn rev(edge: usize) -> Self {
        Self { edge, forward: false }
    }

    pub fn sign(&self) -> i64 {
        if self.forward {
            1
        } else {
            -1
        }
    }
}

pub type Cycle = Vec<CycleStep>;

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceGraph {
    pub num_vertices: usize,
    pub edges: Vec<Edge>,
    /// Auxiliary vertex pinned to zero.
    pub delta_vertex: Option<usize>,
    pub cycles: Option<Vec<Cycle>>,
}

impl DifferenceGraph {
    pub fn new(num_vertices: usize, edges: Vec<Edge>) -> Self {
        Self {
            num_vertices,
            edges,
            delta_vertex: None,
            cycles: None,
        }
    }

    pub fn with_cycles(mut self, cycles: Vec<Cycle>) -> Self {
        self.cycles = Some(cycles);
        self
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Whether every vertex is reachable ignoring edge direction.
    pub fn is_connected(&self) -> bool {
        if self.num_vertices == 0 {
            return true;
        }
        let mut uf = UnionFind::new(self.num_vertices);
        let mut parts = self.num_vertices;
        for e in &self.edges {
            if uf.union(e.u, e.v) {
                parts -= 1;
            }
        }
        parts == 1
    }

    /// Undirected adjacency lists of `(neighbor, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, k));
            adj[e.v].push((e.u, k));
        }
        adj
    }

    /// Start and end vertex of a signed walk, or `None` if consecutive steps do not meet.
    pub fn walk_endpoints(&self, cycle: &[CycleStep]) -> Option<(usize, usize)> {
        let ends = |s: &CycleStep| {
            let e = &self.edges[s.edge];
            if s.forward {
                (e.u, e.v)
            } else {
                (e.v, e.u)
            }
        };
        let first = ends(cycle.first()?);
        let mut at = first.1;
        for s in &cycle[1..] {
            let (a, b) = ends(s);
            if a != at {
                return None;
            }
            at = b;
        }
        Some((first.0, at))
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (k, e) in self.edges.iter().enumerate() {
            if e.u >= self.num_vertices || e.v >= self.num_vertices {
                return Err(Error::SizeMismatch(format!("edge {k} references a missing vertex")));
            }
            if e.u == e.v {
                return Err(Error::SizeMismatch(format!("edge {k} is a self-loop")));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v), e.kind)) {
                return Err(Error::SizeMismatch(format!("edge {k} duplicates an earlier pair")));
            }
            if !(e.weight >= WEIGHT_FLOOR) {
                return Err(Error::SizeMismatch(format!("edge {k} weight {} below floor", e.weight)));
            }
        }
        if !self.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        if let Some(cycles) = &self.cycles {
            for (c, cycle) in cycles.iter().enumerate() {
                if cycle.iter().any(|s| s.edge >= self.edges.len()) {
                    return Err(Error::MissingCycles(format!("cycle {c} references a missing edge")));
                }
                match self.walk_endpoints(cycle) {
                    Some((a, b)) if a == b => {}
                    _ => return Err(Error::MissingCycles(format!("cycle {c} does not close"))),
                }
            }
        }
        Ok(())
    }

    /// Whether every edge appears in at least one cycle.
    pub fn cycles_cover_edges(&self) -> bool {
        let Some(cycles) = &self.cycles else {
            return false;
        };
        let mut covered = vec![false; self.edges.len()];
        for s in cycles.iter().flatten() {
            covered[s.edge] = true;
        }
        covered.into_iter().all(|c| c)
    }

    /// Debug dump. Cycle entries are `+(e+1)` for forward and `-(e+1)` for reversed steps.
    pub fn to_json(&self) -> serde_json::Value {
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| json!([e.u, e.v, e.gamma, e.weight, e.kind.as_str()]))
            .collect();
        let cycles: Vec<Vec<i64>> = self
            .cycles
            .iter()
            .flatten()
            .map(|c| c.iter().map(|s| s.sign() * (s.edge as i64 + 1)).collect())
            .collect();
        json!({
            "num_vertices": self.num_vertices,
            "delta": self.delta_vertex,
            "edges": edges,
            "cycles": cycles,
        })
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Oriented triangle walks over `edges` (which are `i < j` pairs, indexed by position).
fn triangle_cycles(hull: &HullTriangulation) -> Vec<Cycle> {
    let index = hull.edge_index();
    hull.triangles
        .iter()
        .map(|t| {
            [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                .iter()
                .map(|&(a, b)| {
                    let k = index[&(a.min(b), a.max(b))];
                    if a < b {
                        CycleStep::fwd(k)
                    } else {
                        CycleStep::rev(k)
                    }
                })
                .collect()
        })
        .collect()
}

/// One ear's graph over the hull edges, with hull triangles as cycles.
pub fn build_intra_graph(hull: &HullTriangulation, gammas: &[i64], weights: &[f64]) -> Result<DifferenceGraph> {
    let m = hull.edges.len();
    for len in [gammas.len(), weights.len()] {
        if len != m {
            return Err(Error::LengthMismatch { expected: m, got: len });
        }
    }
    let edges = hull
        .edges
        .iter()
        .zip(gammas.iter().zip(weights))
        .map(|(&(u, v), (&gamma, &w))| Edge {
            u,
            v,
            gamma,
            weight: w.max(WEIGHT_FLOOR),
            kind: EdgeKind::IntraAural,
        })
        .collect();
    Ok(DifferenceGraph::new(hull.num_vertices(), edges).with_cycles(triangle_cycles(hull)))
}

/// Joins left and right ear graphs; right vertex `i` becomes `i + N`.
pub fn join_ears(
    left: &DifferenceGraph,
    right: &DifferenceGraph,
    interaural_gammas: &[i64],
    interaural_weights: &[f64],
) -> Result<DifferenceGraph> {
    let n = left.num_vertices;
    if right.num_vertices != n || left.delta_vertex.is_some() || right.delta_vertex.is_some() {
        return Err(Error::SizeMismatch("ear graphs must have equal size and no delta".into()));
    }
    if left.edges.len() != right.edges.len()
        || left.edges.iter().zip(&right.edges).any(|(a, b)| (a.u, a.v) != (b.u, b.v))
    {
        return Err(Error::SizeMismatch("ear graphs have different edge sets".into()));
    }
    for len in [interaural_gammas.len(), interaural_weights.len()] {
        if len != n {
            return Err(Error::SizeMismatch(format!("expected {n} inter-aural values, got {len}")));
        }
    }
    let m = left.edges.len();
    let mut edges = left.edges.clone();
    edges.extend(right.edges.iter().map(|e| Edge {
        u: e.u + n,
        v: e.v + n,
        ..*e
    }));
    edges.extend((0..n).map(|i| Edge {
        u: i,
        v: i + n,
        gamma: interaural_gammas[i],
        weight: interaural_weights[i].max(WEIGHT_FLOOR),
        kind: EdgeKind::InterAural,
    }));

    let shift = |c: &Cycle, by: usize| -> Cycle {
        c.iter()
            .map(|s| CycleStep {
                edge: s.edge + by,
                forward: s.forward,
            })
            .collect()
    };
    let mut cycles: Vec<Cycle> = Vec::new();
    if let Some(c) = &left.cycles {
        cycles.extend(c.iter().cloned());
    }
    if let Some(c) = &right.cycles {
        cycles.extend(c.iter().map(|c| shift(c, m)));
    }
    let inter = |i: usize| 2 * m + i;
    for (k, e) in left.edges.iter().enumerate() {
        cycles.push(vec![
            CycleStep::fwd(k),
            CycleStep::fwd(inter(e.v)),
            CycleStep::rev(k + m),
            CycleStep::rev(inter(e.u)),
        ]);
    }
    Ok(DifferenceGraph::new(2 * n, edges).with_cycles(cycles))
}

/// Adds the pinned auxiliary vertex with one edge to every existing vertex.
pub fn add_delta(g: &DifferenceGraph, delta_gammas: &[i64], delta_weights: &[f64]) -> Result<DifferenceGraph> {
    if g.delta_vertex.is_some() {
        return Err(Error::DeltaAlreadyPresent);
    }
    let n = g.num_vertices;
    for len in [delta_gammas.len(), delta_weights.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let delta = n;
    let m = g.edges.len();
    let mut edges = g.edges.clone();
    edges.extend((0..n).map(|i| Edge {
        u: delta,
        v: i,
        gamma: delta_gammas[i],
        weight: delta_weights[i].max(WEIGHT_FLOOR),
        kind: EdgeKind::AbsoluteDelta,
    }));
    let mut cycles = g.cycles.clone().unwrap_or_default();
    for (k, e) in g.edges.iter().enumerate() {
        cycles.push(vec![CycleStep::fwd(m + e.u), CycleStep::fwd(k), CycleStep::rev(m + e.v)]);
    }
    Ok(DifferenceGraph {
        num_vertices: n + 1,
        edges,
        delta_vertex: Some(delta),
        cycles: Some(cycles),
    })
}

/// Stacks `num_freqs` copies of a single-ear graph; vertex `(i, f)` is `f * N + i`.
///
/// `spherical[f][e]` is the `(gamma, weight)` of base edge `e` at bin `f`;
/// `freq[f][i]` is the datum on the edge from `(i, f)` to `(i, f + 1)`.
pub fn stack_frequencies(
    base: &DifferenceGraph,
    num_freqs: usize,
    spherical: &[Vec<(i64, f64)>],
    freq: &[Vec<(i64, f64)>],
) -> Result<DifferenceGraph> {
    let n = base.num_vertices;
    let m = base.edges.len();
    if num_freqs == 0 || base.delta_vertex.is_some() {
        return Err(Error::ShapeMismatch("need at least one bin and a delta-free base".into()));
    }
    if spherical.len() != num_freqs || spherical.iter().any(|r| r.len() != m) {
        return Err(Error::ShapeMismatch(format!("spherical data must be {num_freqs} x {m}")));
    }
    if freq.len() != num_freqs - 1 || freq.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(format!("frequency data must be {} x {n}", num_freqs - 1)));
    }
    let mut edges = Vec::with_capacity(num_freqs * m + (num_freqs - 1) * n);
    for (f, row) in spherical.iter().enumerate() {
        edges.extend(base.edges.iter().zip(row).map(|(e, &(gamma, w))| Edge {
            u: e.u + f * n,
            v: e.v + f * n,
            gamma,
            weight: w.max(WEIGHT_FLOOR),
            kind: e.kind,
        }));
    }
    for (f, row) in freq.iter().enumerate() {
        edges.extend(row.iter().enumerate().map(|(i, &(gamma, w))| Edge {
            u: f * n + i,
            v: (f + 1) * n + i,
            gamma,
            weight: w.max(WEIGHT_FLOOR),
            kind: EdgeKind::InterFrequency,
        }));
    }

    let freq_edge = |f: usize, i: usize| num_freqs * m + f * n + i;
    let mut cycles: Vec<Cycle> = Vec::new();
    if let Some(base_cycles) = &base.cycles {
        for f in 0..num_freqs {
            cycles.extend(base_cycles.iter().map(|c| {
                c.iter()
                    .map(|s| CycleStep {
                        edge: s.edge + f * m,
                        forward: s.forward,
                    })
                    .collect::<Cycle>()
            }));
        }
    }
    for f in 0..num_freqs.saturating_sub(1) {
        for (k, e) in base.edges.iter().enumerate() {
            cycles.push(vec![
                CycleStep::fwd(f * m + k),
                CycleStep::fwd(freq_edge(f, e.v)),
                CycleStep::rev((f + 1) * m + k),
                CycleStep::rev(freq_edge(f, e.u)),
            ]);
        }
    }
    Ok(DifferenceGraph::new(num_freqs * n, edges).with_cycles(cycles))
}
