//! Primal network simplex for min-cost flow with real bounds and integer costs.
//!
//! The spanning tree keeps explicit child lists, so re-rooting the subtree
//! cut off by a pivot is a walk along the reversed path followed by one
//! traversal to shift potentials and depths. Potentials stay integral
//! because costs are integral.

use super::flow::{FlowNetwork, FlowSolution};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

const LOWER: i8 = 1;
const TREE: i8 = 0;
const UPPER: i8 = -1;

struct Simplex<'a> {
    net: &'a FlowNetwork,
    num_nodes: usize,
    root: usize,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<i64>,
    cap: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_up: Vec<bool>,
    depth: Vec<usize>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    pi: Vec<i64>,
    eps: f64,
    next_arc: usize,
    block: usize,
}

impl<'a> Simplex<'a> {
    fn new(net: &'a FlowNetwork) -> Self {
        let n = net.num_nodes;
        let m = net.arcs.len();
        let root = n;
        let max_cost = net.arcs.iter().map(|a| a.cost.abs()).max().unwrap_or(0);
        let art_cost = (max_cost + 1).saturating_mul(n as i64 + 1);
        let max_cap = net.arcs.iter().map(|a| a.upper - a.lower).fold(0.0, f64::max);

        let mut source = Vec::with_capacity(m + n);
        let mut target = Vec::with_capacity(m + n);
        let mut cost = Vec::with_capacity(m + n);
        let mut cap = Vec::with_capacity(m + n);
        let mut flow = Vec::with_capacity(m + n);
        let mut state = Vec::with_capacity(m + n);
        // net outflow each node must still emit, in shifted variables
        let mut supply = vec![0.0; n];
        for a in &net.arcs {
            source.push(a.from);
            target.push(a.to);
            cost.push(a.cost);
            let c = a.upper - a.lower;
            cap.push(c);
            // start each arc at its cheaper bound
            let (g, s) = if a.cost < 0 { (c, UPPER) } else { (0.0, LOWER) };
            flow.push(g);
            state.push(s);
            let f = a.lower + g;
            supply[a.from] += f;
            supply[a.to] -= f;
        }
        let mut parent = vec![NONE; n + 1];
        let mut pred = vec![NONE; n + 1];
        let mut pred_up = vec![false; n + 1];
        let mut depth = vec![0; n + 1];
        let mut pi = vec![0i64; n + 1];
        for v in 0..n {
            let e = source.len();
            // supply[v] > 0 means v has surplus outflow committed; the
            // artificial arc carries the opposite imbalance
            let s = -supply[v];
            if s >= 0.0 {
                source.push(v);
                target.push(root);
                flow.push(s);
                pi[v] = -art_cost;
                pred_up[v] = true;
            } else {
                source.push(root);
                target.push(v);
                flow.push(-s);
                pi[v] = art_cost;
            }
            cost.push(art_cost);
            cap.push(f64::INFINITY);
            state.push(TREE);
            parent[v] = root;
            pred[v] = e;
            depth[v] = 1;
        }
        let mut first_child = vec![NONE; n + 1];
        let mut next_sib = vec![NONE; n + 1];
        let mut prev_sib = vec![NONE; n + 1];
        for v in 0..n {
            next_sib[v] = if v + 1 < n { v + 1 } else { NONE };
            prev_sib[v] = if v > 0 { v - 1 } else { NONE };
        }
        if n > 0 {
            first_child[root] = 0;
        }
        let total = source.len();
        Self {
            net,
            num_nodes: n,
            root,
            source,
            target,
            cost,
            cap,
            flow,
            state,
            parent,
            pred,
            pred_up,
            depth,
            first_child,
            next_sib,
            prev_sib,
            pi,
            eps: 1e-9 * max_cap.max(1.0),
            next_arc: 0,
            block: ((total as f64).sqrt() as usize).max(10),
        }
    }

    fn reduced_cost(&self, e: usize) -> i64 {
        self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]
    }

    /// Block search: best violation within the first block that has one.
    fn find_entering(&mut self) -> Option<usize> {
        let total = self.source.len();
        let mut best = None;
        let mut best_val = 0i64;
        let mut scanned_in_block = 0;
        for k in 0..total {
            let e = (self.next_arc + k) % total;
            let s = self.state[e];
            if s != TREE {
                let v = s as i64 * self.reduced_cost(e);
                if v < best_val {
                    best_val = v;
                    best = Some(e);
                }
            }
            scanned_in_block += 1;
            if scanned_in_block == self.block {
                scanned_in_block = 0;
                if best.is_some() {
                    self.next_arc = (e + 1) % total;
                    return best;
                }
            }
        }
        if let Some(e) = best {
            self.next_arc = (e + 1) % total;
        }
        best
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        u
    }

    fn residual_toward_child(&self, u: usize) -> f64 {
        let e = self.pred[u];
        if self.pred_up[u] {
            self.flow[e]
        } else {
            self.cap[e] - self.flow[e]
        }
        .max(0.0)
    }

    fn residual_toward_parent(&self, u: usize) -> f64 {
        let e = self.pred[u];
        if self.pred_up[u] {
            self.cap[e] - self.flow[e]
        } else {
            self.flow[e]
        }
        .max(0.0)
    }

    fn detach(&mut self, v: usize) {
        let p = self.parent[v];
        let (prev, next) = (self.prev_sib[v], self.next_sib[v]);
        if prev == NONE {
            self.first_child[p] = next;
        } else {
            self.next_sib[prev] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[v] = NONE;
        self.next_sib[v] = NONE;
    }

    fn attach(&mut self, v: usize, p: usize) {
        let head = self.first_child[p];
        self.next_sib[v] = head;
        self.prev_sib[v] = NONE;
        if head != NONE {
            self.prev_sib[head] = v;
        }
        self.first_child[p] = v;
        self.parent[v] = p;
    }

    fn pivot(&mut self, e_in: usize) -> Result<()> {
        let (first, second) = if self.state[e_in] == LOWER {
            (self.source[e_in], self.target[e_in])
        } else {
            (self.target[e_in], self.source[e_in])
        };
        let join = self.join(first, second);

        let mut delta = self.cap[e_in];
        let mut u_out = NONE;
        let mut side = 0;
        let mut u = first;
        while u != join {
            let d = self.residual_toward_child(u);
            if d < delta {
                delta = d;
                u_out = u;
                side = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            let d = self.residual_toward_parent(u);
            if d <= delta {
                delta = d;
                u_out = u;
                side = 2;
            }
            u = self.parent[u];
        }
        if !delta.is_finite() {
            return Err(Error::SolverFailure("unbounded flow cycle".into()));
        }

        if delta > 0.0 {
            if self.state[e_in] == LOWER {
                self.flow[e_in] += delta;
            } else {
                self.flow[e_in] -= delta;
            }
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += if self.pred_up[u] { -delta } else { delta };
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += if self.pred_up[u] { delta } else { -delta };
                u = self.parent[u];
            }
        }

        if side == 0 {
            self.state[e_in] = -self.state[e_in];
            self.snap(e_in);
            return Ok(());
        }

        let e_out = self.pred[u_out];
        let (u_in, v_in) = if side == 1 { (first, second) } else { (second, first) };

        // reverse the tree path from u_in up to u_out and hang it below v_in
        let mut child = u_in;
        let mut new_parent = v_in;
        let mut new_arc = e_in;
        loop {
            let old_parent = self.parent[child];
            let old_arc = self.pred[child];
            self.detach(child);
            self.attach(child, new_parent);
            self.pred[child] = new_arc;
            self.pred_up[child] = self.source[new_arc] == child;
            if child == u_out {
                break;
            }
            new_parent = child;
            new_arc = old_arc;
            child = old_parent;
        }

        let shift = if self.source[e_in] == u_in {
            self.pi[v_in] - self.cost[e_in] - self.pi[u_in]
        } else {
            self.cost[e_in] + self.pi[v_in] - self.pi[u_in]
        };
        let mut stack = vec![u_in];
        while let Some(v) = stack.pop() {
            self.pi[v] += shift;
            self.depth[v] = self.depth[self.parent[v]] + 1;
            let mut c = self.first_child[v];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c];
            }
        }

        self.state[e_in] = TREE;
        let f = self.flow[e_out];
        self.state[e_out] = if f <= self.cap[e_out] - f { LOWER } else { UPPER };
        self.snap(e_out);
        Ok(())
    }

    fn snap(&mut self, e: usize) {
        match self.state[e] {
            LOWER => self.flow[e] = 0.0,
            UPPER => self.flow[e] = self.cap[e],
            _ => {}
        }
    }

    fn run(mut self) -> Result<FlowSolution> {
        let max_iter = 50 * (self.source.len() + 10) * ((self.num_nodes as f64).sqrt() as usize + 10);
        let mut iterations = 0;
        while let Some(e) = self.find_entering() {
            self.pivot(e)?;
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::SolverFailure("network simplex iteration limit".into()));
            }
        }
        let m = self.net.arcs.len();
        let art_flow = self.flow[m..].iter().fold(0.0f64, |a, &f| a.max(f.abs()));
        if art_flow > self.eps {
            return Err(Error::SolverFailure(format!("infeasible circulation (artificial flow {art_flow})")));
        }
        let flows = self.net.arcs.iter().zip(&self.flow).map(|(a, &g)| a.lower + g).collect();
        let root_pi = self.pi[self.root];
        Ok(FlowSolution {
            potentials: self.pi[..self.num_nodes].iter().map(|p| p - root_pi).collect(),
            flows,
            iterations,
        })
    }
}

/// Solves the min-cost flow problem; every node must balance exactly.
pub fn solve(net: &FlowNetwork) -> Result<FlowSolution> {
    Simplex::new(net).run()
}
