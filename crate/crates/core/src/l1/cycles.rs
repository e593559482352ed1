//! Cycle-space bookkeeping for the cycle formulation.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::DifferenceGraph;

const PRIME: i64 = 2_147_483_647;

/// Signed sum of `values` around every stored cycle.
pub fn cycle_residues(graph: &DifferenceGraph, values: &[i64]) -> Vec<i64> {
    graph
        .cycles
        .iter()
        .flatten()
        .map(|c| c.iter().map(|s| s.sign() * values[s.edge]).sum())
        .collect()
}

/// Breadth-first spanning tree from `root`: `(parent edge per vertex, visiting order)`.
pub fn spanning_tree(graph: &DifferenceGraph, root: usize) -> (Vec<Option<usize>>, Vec<usize>) {
    let adj = graph.adjacency();
    let mut parent_edge = vec![None; graph.num_vertices];
    let mut seen = vec![false; graph.num_vertices];
    let mut order = Vec::with_capacity(graph.num_vertices);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &(v, e) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent_edge[v] = Some(e);
                queue.push_back(v);
            }
        }
    }
    (parent_edge, order)
}

/// Integrates per-edge differences along a spanning tree, pinning `root` to zero.
pub fn integrate(graph: &DifferenceGraph, differences: &[i64], root: usize) -> Result<Vec<i64>> {
    let (parent_edge, order) = spanning_tree(graph, root);
    if order.len() != graph.num_vertices {
        return Err(Error::DisconnectedGraph);
    }
    let mut values = vec![0i64; graph.num_vertices];
    for &v in &order[1..] {
        let e = parent_edge[v].expect("non-root vertex has a tree edge");
        let edge = &graph.edges[e];
        values[v] = if edge.v == v {
            values[edge.u] + differences[e]
        } else {
            values[edge.v] - differences[e]
        };
    }
    Ok(values)
}

/// How the stored cycles were shown to span the cycle space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanCertificate {
    pub dimension: usize,
    /// Chord coordinates fixed by cycles with a single unknown chord.
    pub propagated: usize,
    /// Coordinates that needed elimination over a prime field.
    pub eliminated: usize,
}

/// Proves that the stored cycles span the whole cycle space.
///
/// A cycle is determined by its chord coordinates relative to a spanning
/// tree. A stored cycle with one unknown chord fixes that chord; whatever is
/// left is settled by rank over GF(p), which bounds the rational rank from below.
pub fn prove_span(graph: &DifferenceGraph) -> Result<SpanCertificate> {
    let n = graph.num_vertices;
    let m = graph.num_edges();
    let Some(cycles) = &graph.cycles else {
        return Err(Error::MissingCycles("graph has no cycle list".into()));
    };
    let (parent_edge, order) = spanning_tree(graph, 0);
    if order.len() != n {
        return Err(Error::DisconnectedGraph);
    }
    let mut is_tree = vec![false; m];
    parent_edge.iter().flatten().for_each(|&e| is_tree[e] = true);
    let dimension = m + 1 - n;

    let rows: Vec<Vec<(usize, i64)>> = cycles
        .iter()
        .map(|c| {
            let mut coeff: HashMap<usize, i64> = HashMap::new();
            for s in c.iter().filter(|s| !is_tree[s.edge]) {
                *coeff.entry(s.edge).or_default() += s.sign();
            }
            let mut row: Vec<_> = coeff.into_iter().filter(|&(_, a)| a != 0).collect();
            row.sort_unstable();
            row
        })
        .collect();

    let mut known = is_tree.clone();
    let mut unknown_count: Vec<usize> = rows.iter().map(|r| r.len()).collect();
    let mut rows_of = vec![Vec::new(); m];
    for (r, row) in rows.iter().enumerate() {
        for &(e, _) in row {
            rows_of[e].push(r);
        }
    }
    let mut queue: VecDeque<usize> = (0..rows.len()).filter(|&r| unknown_count[r] == 1).collect();
    let mut propagated = 0;
    while let Some(r) = queue.pop_front() {
        if unknown_count[r] != 1 {
            continue;
        }
        let Some(&(e, _)) = rows[r].iter().find(|&&(e, _)| !known[e]) else {
            continue;
        };
        known[e] = true;
        propagated += 1;
        for &r2 in &rows_of[e] {
            unknown_count[r2] -= 1;
            if unknown_count[r2] == 1 {
                queue.push_back(r2);
            }
        }
    }

    let rest: Vec<usize> = (0..m).filter(|&e| !known[e]).collect();
    if rest.is_empty() {
        return Ok(SpanCertificate {
            dimension,
            propagated,
            eliminated: 0,
        });
    }
    let col: HashMap<usize, usize> = rest.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut matrix: Vec<Vec<i64>> = rows
        .iter()
        .zip(&unknown_count)
        .filter(|(_, &k)| k >= 2)
        .map(|(row, _)| {
            let mut dense = vec![0i64; rest.len()];
            for &(e, a) in row {
                if let Some(&j) = col.get(&e) {
                    dense[j] = a.rem_euclid(PRIME);
                }
            }
            dense
        })
        .collect();
    let rank = rank_mod_p(&mut matrix, rest.len());
    if rank < rest.len() {
        return Err(Error::MissingCycles(format!(
            "cycles span {} of {dimension} cycle-space dimensions",
            dimension - (rest.len() - rank)
        )));
    }
    Ok(SpanCertificate {
        dimension,
        propagated,
        eliminated: rest.len(),
    })
}

fn pow_mod(mut b: i64, mut e: i64) -> i64 {
    let mut r = 1i64;
    b %= PRIME;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % PRIME;
        }
        b = b * b % PRIME;
        e >>= 1;
    }
    r
}

fn rank_mod_p(matrix: &mut [Vec<i64>], cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..matrix.len()).find(|&r| matrix[r][c] != 0) else {
            continue;
        };
        matrix.swap(rank, p);
        let inv = pow_mod(matrix[rank][c], PRIME - 2);
        let pivot_row = matrix[rank].clone();
        for row in matrix.iter_mut().skip(rank + 1) {
            if row[c] == 0 {
                continue;
            }
            let f = row[c] * inv % PRIME;
            for j in c..cols {
                row[j] = (row[j] - f * pivot_row[j]).rem_euclid(PRIME);
            }
        }
        rank += 1;
    }
    rank
}
