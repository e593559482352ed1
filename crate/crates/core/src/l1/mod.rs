//! Exact weighted-L1 fits of integer node values to a difference graph.
//!
//! Both formulations minimise `sum_e w_e |K_e|` where
//! `K_e = tau[v] - tau[u] - gamma_e`. Their shared dual is a min-cost
//! circulation with arc costs `-gamma_e` and flow bounds `[-w_e, w_e]`; the
//! optimal potentials are `-tau` and the reduced costs are the residuals.
//!
//! The cycle formulation proves that the stored cycles span the cycle space,
//! solves the dual by successive shortest paths and integrates `gamma + K`
//! over a spanning tree. The edgelist formulation runs a primal network
//! simplex and reads the node values off its potentials.

pub mod cycles;
pub mod flow;
pub mod network_simplex;
pub mod ssp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DifferenceGraph;
use flow::{Arc, FlowNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formulation {
    /// Residuals constrained to close around every stored cycle.
    Simplices,
    /// Node values as free variables, one residual per edge.
    Edgelist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    /// Integer node values; the delta vertex (or vertex 0) is zero.
    pub node_values: Vec<i64>,
    /// `K_e = tau[v] - tau[u] - gamma_e`.
    pub residuals: Vec<i64>,
    pub objective: f64,
    /// Dual circulation certifying optimality.
    pub dual_flow: Vec<f64>,
    pub iterations: usize,
}

/// Weighted L1 norm of a residual vector.
pub fn objective(graph: &DifferenceGraph, residuals: &[i64]) -> f64 {
    graph.edges.iter().zip(residuals).map(|(e, &k)| e.weight * k.unsigned_abs() as f64).sum()
}

/// The vertex pinned to zero.
pub fn gauge_vertex(graph: &DifferenceGraph) -> usize {
    graph.delta_vertex.unwrap_or(0)
}

fn dual_network(graph: &DifferenceGraph) -> FlowNetwork {
    FlowNetwork {
        num_nodes: graph.num_vertices,
        arcs: graph
            .edges
            .iter()
            .map(|e| Arc {
                from: e.u,
                to: e.v,
                cost: -e.gamma,
                lower: -e.weight,
                upper: e.weight,
            })
            .collect(),
    }
}

fn residuals_of(graph: &DifferenceGraph, values: &[i64]) -> Vec<i64> {
    graph.edges.iter().map(|e| values[e.v] - values[e.u] - e.gamma).collect()
}

/// Solves the weighted L1 problem exactly.
pub fn solve_l1(graph: &DifferenceGraph, formulation: Formulation) -> Result<L1Solution> {
    if graph.num_vertices == 0 {
        return Err(Error::DegenerateInput("graph has no vertices".into()));
    }
    graph.validate()?;
    match formulation {
        Formulation::Edgelist => solve_edgelist(graph),
        Formulation::Simplices => solve_simplices(graph),
    }
}

fn solve_edgelist(graph: &DifferenceGraph) -> Result<L1Solution> {
    let net = dual_network(graph);
    let sol = network_simplex::solve(&net)?;
    let pin = sol.potentials[gauge_vertex(graph)];
    let node_values: Vec<i64> = sol.potentials.iter().map(|p| pin - p).collect();
    let residuals = residuals_of(graph, &node_values);
    Ok(L1Solution {
        objective: objective(graph, &residuals),
        node_values,
        residuals,
        dual_flow: sol.flows,
        iterations: sol.iterations,
    })
}

fn solve_simplices(graph: &DifferenceGraph) -> Result<L1Solution> {
    if !graph.cycles_cover_edges() {
        return Err(Error::MissingCycles("some edge lies on no stored cycle".into()));
    }
    let cert = cycles::prove_span(graph)?;
    log::debug!(
        "cycle span: dimension {}, {} propagated, {} eliminated",
        cert.dimension,
        cert.propagated,
        cert.eliminated
    );
    let gammas: Vec<i64> = graph.edges.iter().map(|e| e.gamma).collect();
    let root = gauge_vertex(graph);

    if cycles::cycle_residues(graph, &gammas).iter().all(|&r| r == 0) {
        let node_values = cycles::integrate(graph, &gammas, root)?;
        return Ok(L1Solution {
            node_values,
            residuals: vec![0; graph.num_edges()],
            objective: 0.0,
            dual_flow: vec![0.0; graph.num_edges()],
            iterations: 0,
        });
    }

    let net = dual_network(graph);
    let sol = ssp::solve(&net)?;
    let pi = &sol.potentials;
    let residuals: Vec<i64> = graph.edges.iter().map(|e| -e.gamma + pi[e.u] - pi[e.v]).collect();
    if cycles::cycle_residues(graph, &residuals.iter().zip(&gammas).map(|(k, g)| k + g).collect::<Vec<_>>())
        .iter()
        .any(|&r| r != 0)
    {
        return Err(Error::SolverFailure("corrected differences do not close around a cycle".into()));
    }
    let corrected: Vec<i64> = gammas.iter().zip(&residuals).map(|(g, k)| g + k).collect();
    let node_values = cycles::integrate(graph, &corrected, root)?;
    Ok(L1Solution {
        objective: objective(graph, &residuals),
        node_values,
        residuals,
        dual_flow: sol.flows,
        iterations: sol.iterations,
    })
}

/// Outcome of an independent check of an [`L1Solution`].
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub ok: bool,
    pub reasons: Vec<String>,
}

/// Checks consistency, gauge, the objective value and the dual optimality certificate.
pub fn verify_solution(graph: &DifferenceGraph, sol: &L1Solution) -> Verification {
    let mut reasons = Vec::new();
    let m = graph.num_edges();
    if sol.node_values.len() != graph.num_vertices || sol.residuals.len() != m || sol.dual_flow.len() != m {
        reasons.push("solution vectors have the wrong length".to_string());
        return Verification { ok: false, reasons };
    }
    if sol.node_values[gauge_vertex(graph)] != 0 {
        reasons.push(format!("gauge vertex {} is not zero", gauge_vertex(graph)));
    }
    let expected = residuals_of(graph, &sol.node_values);
    if let Some(k) = (0..m).find(|&k| expected[k] != sol.residuals[k]) {
        reasons.push(format!("edge {k}: residual {} but node values give {}", sol.residuals[k], expected[k]));
    }
    let corrected: Vec<i64> = graph.edges.iter().zip(&sol.residuals).map(|(e, k)| e.gamma + k).collect();
    if let Some(c) = cycles::cycle_residues(graph, &corrected).iter().position(|&r| r != 0) {
        reasons.push(format!("cycle {c} does not close after correction"));
    }
    let obj = objective(graph, &sol.residuals);
    if (obj - sol.objective).abs() > 1e-9 * obj.max(1.0) {
        reasons.push(format!("reported objective {} differs from {obj}", sol.objective));
    }

    let scale = graph.edges.iter().map(|e| e.weight).fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let mut balance = vec![0.0; graph.num_vertices];
    for (k, (e, &f)) in graph.edges.iter().zip(&sol.dual_flow).enumerate() {
        balance[e.u] -= f;
        balance[e.v] += f;
        if f.abs() > e.weight + tol {
            reasons.push(format!("edge {k}: dual flow {f} exceeds weight {}", e.weight));
        }
        let k_e = sol.residuals[k];
        if k_e > 0 && (f + e.weight).abs() > tol || k_e < 0 && (f - e.weight).abs() > tol {
            reasons.push(format!("edge {k}: residual {k_e} with dual flow {f} breaks complementary slackness"));
        }
    }
    if let Some(v) = balance.iter().position(|b| b.abs() > tol * graph.num_edges().max(1) as f64) {
        reasons.push(format!("dual flow does not balance at vertex {v}"));
    }
    let dual_value: f64 = graph.edges.iter().zip(&sol.dual_flow).map(|(e, f)| e.gamma as f64 * f).sum();
    if (dual_value - sol.objective).abs() > 1e-6 * sol.objective.max(1.0) {
        reasons.push(format!("duality gap: primal {} vs dual {dual_value}", sol.objective));
    }
    Verification {
        ok: reasons.is_empty(),
        reasons,
    }
}
