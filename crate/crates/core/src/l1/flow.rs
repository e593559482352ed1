//! Min-cost flow network shared by the two exact engines.

/// Arc with integer cost and real flow bounds `lower <= f <= upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub cost: i64,
    pub lower: f64,
    pub upper: f64,
}

/// Circulation problem: every node must balance.
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    pub num_nodes: usize,
    pub arcs: Vec<Arc>,
}

/// Optimal flows and node potentials with `cost + pi[from] - pi[to] >= 0`
/// on every arc that can still increase.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub potentials: Vec<i64>,
    pub flows: Vec<f64>,
    pub iterations: usize,
}

impl FlowNetwork {
    pub fn cost(&self, flows: &[f64]) -> f64 {
        self.arcs.iter().zip(flows).map(|(a, f)| a.cost as f64 * f).sum()
    }

    /// Largest net imbalance over all nodes.
    pub fn imbalance(&self, flows: &[f64]) -> f64 {
        let mut b = vec![0.0; self.num_nodes];
        for (a, f) in self.arcs.iter().zip(flows) {
            b[a.from] -= f;
            b[a.to] += f;
        }
        b.into_iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}
