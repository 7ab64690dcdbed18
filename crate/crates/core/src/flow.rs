//! Dinic max-flow on integer capacities.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: i64,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> FlowNetwork {
        FlowNetwork { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    /// Adds `u -> v` and returns the edge id, usable with [`FlowNetwork::flow_on`].
    pub fn add_edge(&mut self, u: usize, v: usize, cap: i64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to: v, cap });
        self.edges.push(Edge { to: u, cap: 0 });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Flow pushed through an edge so far (the residual of its twin).
    pub fn flow_on(&self, id: usize) -> i64 {
        self.edges[id ^ 1].cap
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > 0 && level[to] == u32::MAX {
                    level[to] = level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    fn augment(&mut self, u: usize, t: usize, limit: i64, level: &[u32], next: &mut [usize]) -> i64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let Edge { to, cap } = self.edges[e];
            if cap > 0 && level[to] == level[u] + 1 {
                let pushed = self.augment(to, t, limit.min(cap), level, next);
                if pushed > 0 {
                    self.edges[e].cap -= pushed;
                    self.edges[e ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.augment(s, t, i64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1, max flow 23
        let mut g = FlowNetwork::new(6);
        for (u, v, c) in
            [(0, 1, 16), (0, 2, 13), (1, 3, 12), (2, 1, 4), (2, 4, 14), (3, 2, 9), (3, 5, 20), (4, 3, 7), (4, 5, 4)]
        {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23);
    }

    fn min_cut_brute(n: usize, edges: &[(usize, usize, i64)]) -> i64 {
        // enumerate s-side sets containing 0 and not n-1
        let mut best = i64::MAX;
        for mask in 0u32..(1 << n) {
            if mask & 1 == 0 || mask >> (n - 1) & 1 == 1 {
                continue;
            }
            let cut = edges.iter().filter(|(u, v, _)| mask >> u & 1 == 1 && mask >> v & 1 == 0).map(|e| e.2).sum();
            best = best.min(cut);
        }
        best
    }

    #[test]
    fn matches_min_cut_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(2..8);
            let edges: Vec<(usize, usize, i64)> = (0..rng.gen_range(0..20))
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..10)))
                .filter(|(u, v, _)| u != v)
                .collect();
            let mut g = FlowNetwork::new(n);
            let ids: Vec<usize> = edges.iter().map(|&(u, v, c)| g.add_edge(u, v, c)).collect();
            let f = g.max_flow(0, n - 1);
            assert_eq!(f, min_cut_brute(n, &edges));
            for (id, e) in ids.iter().zip(&edges) {
                let x = g.flow_on(*id);
                assert!(0 <= x && x <= e.2);
            }
        }
    }
}
