//! Weighted least-squares fit of real node values to a difference graph.
//!
//! Minimises `sum_e w_e (tau[v] - tau[u] - gamma_e)^2 + lambda (sum_i tau_i)^2`.
//! The normal equations are `L tau = b` with the weighted Laplacian `L` and
//! `b = B^T W gamma`. Without a delta vertex `L` is singular along the
//! all-ones vector and `b` is orthogonal to it, so the minimiser is a line;
//! the regulariser selects its zero-sum point for every `lambda > 0`, and the
//! same point is taken for `lambda = 0`. With a delta vertex `tau_delta = 0`
//! is substituted and the remaining matrix is the real-vertex Laplacian plus
//! `diag(w_delta)`, which is positive definite.

use crate::error::{Error, Result};
use crate::graph::DifferenceGraph;

/// Relative residual the conjugate-gradient solve must reach.
pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsProblem<'a> {
    pub graph: &'a DifferenceGraph,
    /// Weight of the zero-sum term; unused when a delta vertex is present.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub node_values: Vec<f64>,
    /// `tau[v] - tau[u] - gamma_e`.
    pub residuals: Vec<f64>,
    /// Weighted sum of squared residuals.
    pub objective: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

struct System<'a> {
    graph: &'a DifferenceGraph,
    /// Penalty along the all-ones direction, zero when the delta vertex anchors the gauge.
    ones_penalty: f64,
    delta: Option<usize>,
}

impl System<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for e in &self.graph.edges {
            let d = e.weight * (x[e.v] - x[e.u]);
            out[e.v] += d;
            out[e.u] -= d;
        }
        if self.ones_penalty > 0.0 {
            let s: f64 = x.iter().sum::<f64>() * self.ones_penalty;
            out.iter_mut().for_each(|o| *o += s);
        }
        if let Some(d) = self.delta {
            out[d] = x[d];
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![self.ones_penalty; self.graph.num_vertices];
        for e in &self.graph.edges {
            diag[e.u] += e.weight;
            diag[e.v] += e.weight;
        }
        if let Some(d) = self.delta {
            diag[d] = 1.0;
        }
        diag
    }
}

/// Right-hand side `B^T W gamma`.
fn rhs(graph: &DifferenceGraph) -> Vec<f64> {
    let mut b = vec![0.0; graph.num_vertices];
    for e in &graph.edges {
        let wg = e.weight * e.gamma as f64;
        b[e.v] += wg;
        b[e.u] -= wg;
    }
    b
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients.
fn conjugate_gradient(sys: &System, b: &[f64]) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let inv_diag: Vec<f64> = sys.diagonal().iter().map(|d| 1.0 / d).collect();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n + 100;
    for it in 1..=max_iter {
        sys.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem(format!("non-positive curvature {pap} at iteration {it}")));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        let rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= CG_TOLERANCE {
            // report the true residual rather than the recurrence
            sys.apply(&x, &mut ap);
            let true_rel = b.iter().zip(&ap).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt() / b_norm;
            return Ok((x, it, true_rel));
        }
        z.iter_mut().zip(r.iter().zip(&inv_diag)).for_each(|(z, (r, d))| *z = r * d);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::SingularSystem(format!("conjugate gradients did not converge in {max_iter} iterations")))
}

pub fn solve_ls(problem: &LsProblem) -> Result<LsSolution> {
    let graph = problem.graph;
    if !(problem.lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {}", problem.lambda)));
    }
    if graph.num_vertices == 0 {
        return Err(Error::DegenerateInput("graph has no vertices".into()));
    }
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let mut b = rhs(graph);
    let ones_penalty = if graph.delta_vertex.is_some() {
        0.0
    } else {
        // any positive multiple pins the zero-sum point; the mean degree keeps it well scaled
        let total: f64 = graph.edges.iter().map(|e| 2.0 * e.weight).sum();
        total / (graph.num_vertices as f64).powi(2)
    };
    if let Some(d) = graph.delta_vertex {
        b[d] = 0.0;
    }
    let sys = System {
        graph,
        ones_penalty,
        delta: graph.delta_vertex,
    };
    let (node_values, iterations, relative_residual) = conjugate_gradient(&sys, &b)?;
    let residuals: Vec<f64> = graph.edges.iter().map(|e| node_values[e.v] - node_values[e.u] - e.gamma as f64).collect();
    let objective = graph.edges.iter().zip(&residuals).map(|(e, r)| e.weight * r * r).sum();
    Ok(LsSolution {
        node_values,
        residuals,
        objective,
        iterations,
        relative_residual,
    })
}

/// Gradient of the data term with respect to every free node value; the
/// delta vertex, if any, is fixed and reports zero.
pub fn gradient(graph: &DifferenceGraph, node_values: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; graph.num_vertices];
    for e in &graph.edges {
        let r = node_values[e.v] - node_values[e.u] - e.gamma as f64;
        g[e.v] += 2.0 * e.weight * r;
        g[e.u] -= 2.0 * e.weight * r;
    }
    if let Some(d) = graph.delta_vertex {
        g[d] = 0.0;
    }
    g
}
