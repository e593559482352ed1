//! Successive shortest paths for circulations with real capacities and
//! integer costs.
//!
//! Every arc starts at its cheaper bound, which leaves all residual arcs
//! with non-negative cost, so zero potentials are feasible and Dijkstra
//! applies from the first round.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::flow::{FlowNetwork, FlowSolution};
use crate::error::{Error, Result};

struct Residual {
    head: Vec<usize>,
    cost: Vec<i64>,
    cap: Vec<f64>,
    out: Vec<Vec<usize>>,
}

impl Residual {
    fn push(&mut self, r: usize, amount: f64) {
        self.cap[r] -= amount;
        self.cap[r ^ 1] += amount;
    }
}

/// Solves the circulation problem; potentials are gauged so node 0 is zero.
pub fn solve(net: &FlowNetwork) -> Result<FlowSolution> {
    let n = net.num_nodes;
    let m = net.arcs.len();
    let scale = net.arcs.iter().map(|a| a.upper - a.lower).fold(1.0, f64::max);
    let eps = 1e-12 * scale;

    let mut res = Residual {
        head: Vec::with_capacity(2 * m),
        cost: Vec::with_capacity(2 * m),
        cap: Vec::with_capacity(2 * m),
        out: vec![Vec::new(); n],
    };
    let mut flow = Vec::with_capacity(m);
    let mut excess = vec![0.0; n];
    for (k, a) in net.arcs.iter().enumerate() {
        if a.upper < a.lower {
            return Err(Error::SolverFailure(format!("arc {k} has empty bounds")));
        }
        let f = if a.cost >= 0 { a.lower } else { a.upper };
        flow.push(f);
        excess[a.to] += f;
        excess[a.from] -= f;
        res.head.extend([a.to, a.from]);
        res.cost.extend([a.cost, -a.cost]);
        res.cap.extend([a.upper - f, f - a.lower]);
        res.out[a.from].push(2 * k);
        res.out[a.to].push(2 * k + 1);
    }

    let mut pi = vec![0i64; n];
    let mut dist = vec![i64::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut iterations = 0;
    loop {
        let sources: Vec<usize> = (0..n).filter(|&v| excess[v] > eps).collect();
        if sources.is_empty() {
            break;
        }
        iterations += 1;
        dist.iter_mut().for_each(|d| *d = i64::MAX);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        let mut heap = BinaryHeap::new();
        for &s in &sources {
            dist[s] = 0;
            heap.push(Reverse((0i64, s)));
        }
        let mut sink = None;
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if excess[u] < -eps {
                sink = Some(u);
                break;
            }
            for &r in &res.out[u] {
                if res.cap[r] <= eps {
                    continue;
                }
                let v = res.head[r];
                let rc = res.cost[r] + pi[u] - pi[v];
                debug_assert!(rc >= 0);
                let nd = d + rc;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = r;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        let Some(t) = sink else {
            // leftovers from rounding are not worth another pass
            if sources.iter().all(|&s| excess[s] <= 1e-9 * scale) {
                break;
            }
            return Err(Error::SolverFailure("circulation is infeasible".into()));
        };
        let dt = dist[t];
        for v in 0..n {
            if dist[v] != i64::MAX {
                pi[v] += dist[v].min(dt);
            } else {
                pi[v] += dt;
            }
        }

        let mut amount = -excess[t];
        let mut v = t;
        while prev[v] != usize::MAX {
            let r = prev[v];
            amount = amount.min(res.cap[r]);
            v = res.head[r ^ 1];
        }
        amount = amount.min(excess[v]);
        let s = v;
        let mut v = t;
        while prev[v] != usize::MAX {
            let r = prev[v];
            res.push(r, amount);
            let k = r / 2;
            flow[k] += if r % 2 == 0 { amount } else { -amount };
            v = res.head[r ^ 1];
        }
        excess[s] -= amount;
        excess[t] += amount;
        if excess[s].abs() <= eps {
            excess[s] = 0.0;
        }
        if excess[t].abs() <= eps {
            excess[t] = 0.0;
        }
    }

    if n > 0 {
        let p0 = pi[0];
        pi.iter_mut().for_each(|p| *p -= p0);
    }
    Ok(FlowSolution {
        potentials: pi,
        flows: flow,
        iterations,
    })
}
