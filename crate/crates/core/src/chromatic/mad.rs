//! Maximum average degree `mad(G) = max_S 2|E(G[S])| / |S|`, exactly.
//!
//! Small graphs are handled by enumerating every vertex subset. Larger ones use
//! Goldberg's reduction: with a density guess `a/b`, a subset with
//! `b|E(S)| - a|S| > 0` exists iff the max-closure problem (edges worth `b`,
//! vertices costing `a`) has positive value, decided by one min cut. Each
//! positive answer yields a strictly denser subset, so iterating from the whole
//! graph ends at the densest subgraph.

use num_rational::Ratio;

use crate::graph::SbmGraph;

/// Largest vertex count sent to subset enumeration by [`max_avg_degree`].
pub const BRUTE_FORCE_MAX_N: usize = 20;

/// Exact `mad(g)`; 0 for graphs without edges or vertices.
pub fn max_avg_degree(g: &SbmGraph) -> Ratio<u64> {
    if g.n() <= BRUTE_FORCE_MAX_N {
        max_avg_degree_bruteforce(g)
    } else {
        max_avg_degree_flow(g)
    }
}

/// Subset enumeration. Panics beyond 30 vertices.
pub fn max_avg_degree_bruteforce(g: &SbmGraph) -> Ratio<u64> {
    let n = g.n();
    assert!(n <= 30, "subset enumeration needs n <= 30");
    if g.edge_count() == 0 {
        return Ratio::from_integer(0);
    }
    let mut adj = vec![0u32; n];
    for &(u, v) in g.edges() {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    let mut edges_in = vec![0u32; 1 << n];
    let (mut best_e, mut best_s) = (0u64, 1u64);
    for mask in 1u32..(1u32 << n) {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let e = edges_in[rest as usize] + (adj[low] & rest).count_ones();
        edges_in[mask as usize] = e;
        let s = mask.count_ones() as u64;
        if (e as u64) * best_s > best_e * s {
            best_e = e as u64;
            best_s = s;
        }
    }
    Ratio::new(2 * best_e, best_s)
}

struct FlowNet {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<u64>,
    next: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl FlowNet {
    fn new(nodes: usize) -> Self {
        Self { head: vec![NONE; nodes], to: Vec::new(), cap: Vec::new(), next: Vec::new() }
    }

    fn add_edge(&mut self, a: usize, b: usize, c: u64) {
        for (x, y, cc) in [(a, b, c), (b, a, 0)] {
            self.to.push(y);
            self.cap.push(cc);
            self.next.push(self.head[x]);
            self.head[x] = self.to.len() - 1;
        }
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.head.len()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            let mut e = self.head[x];
            while e != NONE {
                let y = self.to[e];
                if self.cap[e] > 0 && level[y] == u32::MAX {
                    level[y] = level[x] + 1;
                    queue.push_back(y);
                }
                e = self.next[e];
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    fn push(&mut self, x: usize, t: usize, limit: u64, level: &[u32], iter: &mut [usize]) -> u64 {
        if x == t {
            return limit;
        }
        while iter[x] != NONE {
            let e = iter[x];
            let y = self.to[e];
            if self.cap[e] > 0 && level[y] == level[x] + 1 {
                let d = self.push(y, t, limit.min(self.cap[e]), level, iter);
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            iter[x] = self.next[e];
        }
        0
    }

    /// Dinic max flow; afterwards `reachable` gives the source side of a min cut.
    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut flow = 0;
        while let Some(level) = self.levels(s, t) {
            let mut iter = self.head.clone();
            loop {
                let f = self.push(s, t, u64::MAX, &level, &mut iter);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            let mut e = self.head[x];
            while e != NONE {
                let y = self.to[e];
                if self.cap[e] > 0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
                e = self.next[e];
            }
        }
        seen
    }
}

/// Vertex set `S` maximising `b|E(S)| - a|S|` when that maximum is positive.
fn denser_subset(g: &SbmGraph, a: u64, b: u64) -> Option<Vec<usize>> {
    let n = g.n();
    let m = g.edge_count();
    // nodes: source, edges 1..=m, vertices m+1..=m+n, sink
    let source = 0;
    let sink = m + n + 1;
    let mut net = FlowNet::new(m + n + 2);
    for (i, &(u, v)) in g.edges().iter().enumerate() {
        net.add_edge(source, 1 + i, b);
        net.add_edge(1 + i, 1 + m + u, u64::MAX / 4);
        net.add_edge(1 + i, 1 + m + v, u64::MAX / 4);
    }
    for v in 0..n {
        net.add_edge(1 + m + v, sink, a);
    }
    let cut = net.max_flow(source, sink);
    let total = b * m as u64;
    if total <= cut {
        return None;
    }
    let side = net.reachable(source);
    Some((0..n).filter(|&v| side[1 + m + v]).collect())
}

/// Densest-subgraph search through repeated min cuts.
pub fn max_avg_degree_flow(g: &SbmGraph) -> Ratio<u64> {
    if g.edge_count() == 0 {
        return Ratio::from_integer(0);
    }
    // current density e/s of the best known subset
    let (mut e, mut s) = (g.edge_count() as u64, g.n() as u64);
    while let Some(set) = denser_subset(g, e, s) {
        let ne = g.induced_edge_count(&set) as u64;
        let ns = set.len() as u64;
        debug_assert!(ne * s > e * ns);
        e = ne;
        s = ns;
    }
    Ratio::new(2 * e, s)
}

#[cfg(test)]
mod tests {
    use super::super::testgraphs::*;
    use super::*;
    use crate::graph::sample_sbm;
    use crate::model::{ModelInstance, ProbMatrix};

    #[test]
    fn examples() {
        assert_eq!(max_avg_degree(&complete(3)), Ratio::from_integer(2));
        assert_eq!(max_avg_degree(&from_edges(3, &[(0, 1), (1, 2)])), Ratio::new(4, 3));
        assert_eq!(max_avg_degree(&from_edges(4, &[])), Ratio::from_integer(0));
        assert_eq!(max_avg_degree_flow(&from_edges(3, &[(0, 1), (1, 2)])), Ratio::new(4, 3));
        assert_eq!(max_avg_degree_flow(&complete(6)), Ratio::from_integer(5));
    }

    #[test]
    fn flow_agrees_with_enumeration() {
        for seed in 0..60 {
            let n = 4 + (seed as usize % 13);
            let p = [0.1, 0.25, 0.5, 0.8][seed as usize % 4];
            let m = ModelInstance::new(&[n], ProbMatrix::uniform(1, p).unwrap()).unwrap();
            let g = sample_sbm(&m, seed);
            assert_eq!(max_avg_degree_bruteforce(&g), max_avg_degree_flow(&g), "seed {seed}");
        }
    }

    #[test]
    fn dense_core_plus_pendant_path() {
        // K5 with a long tail: the core wins
        let mut edges: Vec<(usize, usize)> = (0..5).flat_map(|u| ((u + 1)..5).map(move |v| (u, v))).collect();
        for i in 4..30 {
            edges.push((i, i + 1));
        }
        let g = from_edges(31, &edges);
        assert_eq!(max_avg_degree(&g), Ratio::from_integer(4));
    }
}
