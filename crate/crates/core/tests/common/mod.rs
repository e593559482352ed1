#![allow(dead_code)]

use hrtf_graph::graph::{add_delta, build_intra_graph, join_ears, DifferenceGraph, Edge, EdgeKind};
use hrtf_graph::hrir::Direction;
use hrtf_graph::hull::convex_hull_graph;
use rand::seq::SliceRandom;
use rand::Rng;

/// Exhaustive minimum of `sum w |x_v - x_u - gamma|` over integer node values
/// in `[-bound, bound]` with vertex 0 fixed to zero. Partial sums only grow,
/// so branches already worse than the incumbent are cut.
pub fn brute_force_l1(graph: &DifferenceGraph, bound: i64) -> f64 {
    let n = graph.num_vertices;
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in graph.edges.iter().enumerate() {
        closing[e.u.max(e.v)].push(k);
    }
    let mut values = vec![0i64; n];
    let mut best = f64::INFINITY;
    fn recurse(
        g: &DifferenceGraph,
        closing: &[Vec<usize>],
        k: usize,
        partial: f64,
        bound: i64,
        values: &mut [i64],
        best: &mut f64,
    ) {
        if k == g.num_vertices {
            *best = best.min(partial);
            return;
        }
        let range: Vec<i64> = if k == 0 { vec![0] } else { (-bound..=bound).collect() };
        for x in range {
            values[k] = x;
            let mut cost = partial;
            for &e in &closing[k] {
                let edge = &g.edges[e];
                cost += edge.weight * ((values[edge.v] - values[edge.u] - edge.gamma).abs() as f64);
            }
            if cost < *best {
                recurse(g, closing, k + 1, cost, bound, values, best);
            }
        }
    }
    recurse(graph, &closing, 0, 0.0, bound, &mut values, &mut best);
    best
}

/// Some optimum lies on a spanning tree of exact edges, so node values never
/// need to exceed the longest tree path times the largest datum.
pub fn oracle_bound(graph: &DifferenceGraph) -> i64 {
    let g = graph.edges.iter().map(|e| e.gamma.abs()).max().unwrap_or(0);
    (10i64).max((graph.num_vertices as i64 - 1) * g)
}

/// Random connected graph without repeated vertex pairs.
pub fn random_graph<R: Rng>(rng: &mut R, max_vertices: usize, max_edges: usize, max_gamma: i64, unit_weights: bool) -> DifferenceGraph {
    let n = rng.random_range(2..=max_vertices);
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.random_range(0..v), v));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|p| !pairs.contains(p))
        .collect();
    candidates.shuffle(rng);
    let extra = rng.random_range(0..=max_edges.saturating_sub(n - 1)).min(candidates.len());
    pairs.extend(candidates.into_iter().take(extra));
    let edges = pairs
        .into_iter()
        .map(|(a, b)| {
            let (u, v) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            Edge {
                u,
                v,
                gamma: rng.random_range(-max_gamma..=max_gamma),
                weight: if unit_weights { 1.0 } else { rng.random_range(0.05..2.0) },
                kind: EdgeKind::IntraAural,
            }
        })
        .collect();
    DifferenceGraph::new(n, edges)
}

pub fn random_directions<R: Rng>(rng: &mut R, n: usize) -> Vec<Direction> {
    let mut out: Vec<Direction> = Vec::with_capacity(n);
    while out.len() < n {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let r2: f64 = v.iter().map(|x| x * x).sum();
        if !(0.01..=1.0).contains(&r2) {
            continue;
        }
        let d = Direction::from_vector(v).unwrap();
        if out.iter().all(|o| o.angle_to(&d) > 1e-3) {
            out.push(d);
        }
    }
    out
}

/// Random hull graph with random gammas and weights, optionally joined
/// across two ears and anchored to a delta vertex.
pub fn hull_graph<R: Rng>(rng: &mut R, n: usize, max_gamma: i64, with_delta: bool, two_ears: bool) -> DifferenceGraph {
    let dirs = random_directions(rng, n);
    let hull = convex_hull_graph(&dirs).unwrap();
    let m = hull.edges.len();
    let mut draw = |count: usize| -> (Vec<i64>, Vec<f64>) {
        (
            (0..count).map(|_| rng.random_range(-max_gamma..=max_gamma)).collect(),
            (0..count).map(|_| rng.random_range(0.05..2.0)).collect(),
        )
    };
    let (g, w) = draw(m);
    let mut graph = build_intra_graph(&hull, &g, &w).unwrap();
    if two_ears {
        let (g2, w2) = draw(m);
        let right = build_intra_graph(&hull, &g2, &w2).unwrap();
        let (gi, wi) = draw(n);
        graph = join_ears(&graph, &right, &gi, &wi).unwrap();
    }
    if with_delta {
        let (gd, wd) = draw(graph.num_vertices);
        graph = add_delta(&graph, &gd, &wd).unwrap();
    }
    graph
}
