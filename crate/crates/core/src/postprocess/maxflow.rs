//! Dinic max-flow on graphs with terminal links, used for binary labeling.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: f64,
}

/// Directed flow network. Nodes `0..n` are user nodes; the source and sink are added
/// internally.
#[derive(Clone, Debug)]
pub struct FlowGraph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    /// Flow pushed straight through a node's two terminal links.
    base_flow: f64,
}

const EPS: f64 = 1e-12;

impl FlowGraph {
    pub fn new(n: usize) -> Self {
        FlowGraph {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n + 2],
            base_flow: 0.0,
        }
    }

    fn source(&self) -> usize {
        self.n
    }

    fn sink(&self) -> usize {
        self.n + 1
    }

    fn add_arc(&mut self, a: usize, b: usize, cap_ab: f64, cap_ba: f64) {
        self.adj[a].push(self.edges.len());
        self.edges.push(Edge { to: b, cap: cap_ab });
        self.adj[b].push(self.edges.len());
        self.edges.push(Edge { to: a, cap: cap_ba });
    }

    /// Capacity `to_source` on source->node and `to_sink` on node->sink. The common part
    /// of the two is saturated up front; it only shifts the cut value.
    pub fn add_terminal(&mut self, node: usize, to_source: f64, to_sink: f64) {
        let m = to_source.min(to_sink);
        self.base_flow += m;
        let (s, t) = (to_source - m, to_sink - m);
        if s > 0.0 {
            let src = self.source();
            self.add_arc(src, node, s, 0.0);
        }
        if t > 0.0 {
            let snk = self.sink();
            self.add_arc(node, snk, t, 0.0);
        }
    }

    /// Undirected link: capacity `w` each way.
    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        if w > 0.0 {
            self.add_arc(a, b, w, w);
        }
    }

    fn levels(&self) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.n + 2];
        let mut q = VecDeque::new();
        level[self.source()] = 0;
        q.push_back(self.source());
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > EPS && level[to] == u32::MAX {
                    level[to] = level[u] + 1;
                    q.push_back(to);
                }
            }
        }
        (level[self.sink()] != u32::MAX).then_some(level)
    }

    /// Iterative blocking-flow search along the level graph.
    fn augment(&mut self, level: &[u32], iter: &mut [usize]) -> f64 {
        let (s, t) = (self.source(), self.sink());
        let mut total = 0.0;
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let f = path
                    .iter()
                    .map(|&e| self.edges[e].cap)
                    .fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.edges[e].cap -= f;
                    self.edges[e ^ 1].cap += f;
                }
                total += f;
                // restart from the tail of the first saturated edge
                let cut = path
                    .iter()
                    .position(|&e| self.edges[e].cap <= EPS)
                    .unwrap_or(0);
                path.truncate(cut);
                u = if cut == 0 { s } else { self.edges[path[cut - 1]].to };
                continue;
            }
            let mut advanced = false;
            while iter[u] < self.adj[u].len() {
                let e = self.adj[u][iter[u]];
                let Edge { to, cap } = self.edges[e];
                if cap > EPS && level[to] == level[u] + 1 {
                    path.push(e);
                    u = to;
                    advanced = true;
                    break;
                }
                iter[u] += 1;
            }
            if !advanced {
                if u == s {
                    break;
                }
                let e = path.pop().expect("non-source node has an incoming path edge");
                u = self.edges[e ^ 1].to;
                iter[u] += 1;
            }
        }
        total
    }

    /// Runs max-flow; returns the flow value (= min-cut capacity).
    pub fn max_flow(&mut self) -> f64 {
        let mut flow = self.base_flow;
        while let Some(level) = self.levels() {
            let mut iter = vec![0usize; self.n + 2];
            let f = self.augment(&level, &mut iter);
            if f <= EPS {
                break;
            }
            flow += f;
        }
        flow
    }

    /// After `max_flow`: nodes still reachable from the source in the residual graph.
    pub fn source_side(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n + 2];
        let mut q = VecDeque::new();
        seen[self.source()] = true;
        q.push_back(self.source());
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > EPS && !seen[to] {
                    seen[to] = true;
                    q.push_back(to);
                }
            }
        }
        seen.truncate(self.n);
        seen
    }
}

/// Minimizes `sum_i unary[i][label_i] + sum_(a,b,w) w * [label_a != label_b]` over binary
/// labels with non-negative costs. Returns `true` for label 1.
pub fn min_cut_labeling(unary: &[[f64; 2]], pairwise: &[(usize, usize, f64)]) -> Vec<bool> {
    // label 1 = source side: cutting source->i costs the label-0 cost
    let mut g = FlowGraph::new(unary.len());
    for (i, u) in unary.iter().enumerate() {
        g.add_terminal(i, u[0], u[1]);
    }
    for &(a, b, w) in pairwise {
        g.add_edge(a, b, w);
    }
    g.max_flow();
    g.source_side()
}

/// Energy of a labeling under the model of [`min_cut_labeling`].
pub fn labeling_energy(unary: &[[f64; 2]], pairwise: &[(usize, usize, f64)], labels: &[bool]) -> f64 {
    let u: f64 = unary
        .iter()
        .zip(labels)
        .map(|(c, &l)| c[l as usize])
        .sum();
    let p: f64 = pairwise
        .iter()
        .filter(|(a, b, _)| labels[*a] != labels[*b])
        .map(|(_, _, w)| w)
        .sum();
    u + p
}
