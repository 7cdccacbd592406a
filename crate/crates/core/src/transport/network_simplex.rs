//! Exact discrete optimal transport by the primal network simplex method.
//!
//! The bipartite network has `M` supply nodes (weights `w_i`), `M` demand
//! nodes (`1/M` each) and an artificial root. The initial basis routes all
//! mass through the root; the spanning tree is kept strongly feasible so
//! degenerate pivots cannot cycle. Entering arcs are chosen by block
//! search. After every pivot the tree is re-walked from the root to
//! refresh parents, depths and node potentials, which costs `O(M)`.

use nalgebra::DMatrix;

use super::plan::{CostMatrix, TransportPlan};
use crate::ensemble::WeightVector;
use crate::error::{ensure_dims, Error, Result};

const UP: i8 = 1; // tree arc points from the node to its parent
const DOWN: i8 = -1; // tree arc points from the parent to the node

struct Network<'a> {
    m: usize,
    cost: &'a DMatrix<f64>,
    art_cost: f64,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    stack: Vec<usize>,
}

impl<'a> Network<'a> {
    fn num_real(&self) -> usize {
        self.m * self.m
    }

    fn root(&self) -> usize {
        2 * self.m
    }

    // Real arc e = j * m + i runs from supply node i to demand node m + j,
    // so arc order matches the column-major cost storage.
    fn endpoints(&self, e: usize) -> (usize, usize) {
        let m = self.m;
        if e < m * m {
            (e % m, m + e / m)
        } else {
            let u = e - m * m;
            if u < m {
                (u, self.root())
            } else {
                (self.root(), u)
            }
        }
    }

    fn arc_cost(&self, e: usize) -> f64 {
        let m = self.m;
        if e < m * m {
            self.cost.as_slice()[e]
        } else if e - m * m < m {
            0.0
        } else {
            self.art_cost
        }
    }

    fn new(cost: &'a DMatrix<f64>, w: &[f64]) -> Self {
        let m = w.len();
        let nodes = 2 * m + 1;
        let arcs = m * m + 2 * m;
        let max_cost = cost.iter().copied().fold(0.0, f64::max);
        let mut net = Network {
            m,
            cost,
            art_cost: (max_cost + 1.0) * nodes as f64,
            flow: vec![0.0; arcs],
            in_tree: vec![false; arcs],
            adj: vec![Vec::new(); nodes],
            parent: vec![0; nodes],
            pred: vec![0; nodes],
            pred_dir: vec![0; nodes],
            depth: vec![0; nodes],
            pi: vec![0.0; nodes],
            stack: Vec::with_capacity(nodes),
        };
        let root = net.root();
        for u in 0..2 * m {
            let e = m * m + u;
            net.flow[e] = if u < m { w[u] } else { 1.0 / m as f64 };
            net.in_tree[e] = true;
            net.adj[u].push(e);
            net.adj[root].push(e);
        }
        net.refresh_tree();
        net
    }

    fn other(&self, e: usize, u: usize) -> usize {
        let (s, t) = self.endpoints(e);
        if s == u {
            t
        } else {
            s
        }
    }

    fn refresh_tree(&mut self) {
        let root = self.root();
        self.pi[root] = 0.0;
        self.depth[root] = 0;
        self.parent[root] = root;
        self.stack.clear();
        self.stack.push(root);
        while let Some(u) = self.stack.pop() {
            for k in 0..self.adj[u].len() {
                let e = self.adj[u][k];
                if u != root && e == self.pred[u] {
                    continue;
                }
                let v = self.other(e, u);
                let (s, _) = self.endpoints(e);
                self.parent[v] = u;
                self.pred[v] = e;
                self.depth[v] = self.depth[u] + 1;
                if s == v {
                    self.pred_dir[v] = UP;
                    self.pi[v] = self.pi[u] - self.arc_cost(e);
                } else {
                    self.pred_dir[v] = DOWN;
                    self.pi[v] = self.pi[u] + self.arc_cost(e);
                }
                self.stack.push(v);
            }
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        let (s, t) = self.endpoints(e);
        self.arc_cost(e) + self.pi[s] - self.pi[t]
    }

    fn join(&self, mut a: usize, mut b: usize) -> usize {
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        a
    }

    fn pivot(&mut self, entering: usize) -> Result<()> {
        let (first, second) = self.endpoints(entering);
        let join = self.join(first, second);

        let mut delta = f64::INFINITY;
        let mut leaving_node = usize::MAX;
        let mut u = first;
        while u != join {
            if self.pred_dir[u] == UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    leaving_node = u;
                }
            }
            u = self.parent[u];
        }
        u = second;
        while u != join {
            if self.pred_dir[u] == DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    leaving_node = u;
                }
            }
            u = self.parent[u];
        }
        if !delta.is_finite() {
            return Err(Error::InvalidInput("unbounded transport problem".into()));
        }

        if delta > 0.0 {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
            u = second;
            while u != join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * delta;
                u = self.parent[u];
            }
        }
        let leaving = self.pred[leaving_node];
        // blocking arcs end at exactly zero
        self.flow[leaving] = 0.0;

        self.in_tree[leaving] = false;
        let (ls, lt) = self.endpoints(leaving);
        for node in [ls, lt] {
            let pos = self.adj[node].iter().position(|&x| x == leaving).expect("tree arc in adjacency");
            self.adj[node].swap_remove(pos);
        }
        self.in_tree[entering] = true;
        let (es, et) = self.endpoints(entering);
        self.adj[es].push(entering);
        self.adj[et].push(entering);
        self.refresh_tree();
        Ok(())
    }

    fn solve(&mut self) -> Result<()> {
        let n_arcs = self.num_real();
        let block = ((n_arcs as f64).sqrt().ceil() as usize).max(10).min(n_arcs.max(1));
        let tol = 1e-13 * self.art_cost;
        let mut next = 0usize;
        let max_pivots = 50 * n_arcs + 1000;
        for _ in 0..max_pivots {
            let mut best = -tol;
            let mut best_arc = usize::MAX;
            let mut scanned = 0;
            let mut cnt = 0;
            let mut e = next;
            while scanned < n_arcs {
                if !self.in_tree[e] {
                    let rc = self.reduced_cost(e);
                    if rc < best {
                        best = rc;
                        best_arc = e;
                    }
                }
                scanned += 1;
                cnt += 1;
                e += 1;
                if e == n_arcs {
                    e = 0;
                }
                if cnt == block {
                    if best_arc != usize::MAX {
                        break;
                    }
                    cnt = 0;
                }
            }
            if best_arc == usize::MAX {
                return Ok(());
            }
            next = e;
            self.pivot(best_arc)?;
        }
        Err(Error::NonConvergence { iterations: max_pivots, residual: f64::NAN })
    }
}

/// Exact solution of the transport problem between weighted sources and
/// uniform targets under the given cost.
pub fn solve_ot(cost: &CostMatrix, w: &WeightVector) -> Result<TransportPlan> {
    let m = w.len();
    ensure_dims(cost.size() == m, || format!("cost of size {} for {} weights", cost.size(), m))?;
    let sum: f64 = w.as_slice().iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InfeasibleMarginals(format!("weights sum to {sum}")));
    }
    if cost.matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite cost".into()));
    }
    if m == 1 {
        return Ok(TransportPlan::from_parts(DMatrix::from_element(1, 1, 1.0), vec![1.0]));
    }

    let mut net = Network::new(cost.matrix(), w.as_slice());
    net.solve()?;

    let residual: f64 = net.flow[m * m..].iter().sum();
    if residual > 1e-10 {
        return Err(Error::InfeasibleMarginals(format!("artificial flow {residual:e} remains")));
    }
    let mut entries = DMatrix::zeros(m, m);
    for (e, x) in entries.as_mut_slice().iter_mut().enumerate() {
        *x = net.flow[e].max(0.0);
    }
    Ok(TransportPlan::from_parts(entries, w.as_slice().to_vec()))
}
