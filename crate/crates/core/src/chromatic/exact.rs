//! Exact chromatic number by DSATUR branch and bound.
//!
//! The lower bound is a greedily grown clique, whose vertices are precoloured
//! with distinct colours; the initial upper bound is a DSATUR colouring. The
//! search branches on the most saturated uncoloured vertex (largest degree on
//! ties) and tries every used colour before opening a new one.

use super::dsatur::dsatur_on;
use super::{Colouring, ColouringMethod};
use crate::error::{Error, Result};
use crate::graph::SbmGraph;

pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Greedy clique: for every start vertex, repeatedly add the common neighbour
/// of largest degree. Returns the largest clique found.
fn greedy_clique(g: &SbmGraph) -> Vec<usize> {
    let n = g.n();
    let mut best: Vec<usize> = Vec::new();
    let mut adj = vec![vec![false; n]; n];
    for &(u, v) in g.edges() {
        adj[u][v] = true;
        adj[v][u] = true;
    }
    for start in 0..n {
        let mut clique = vec![start];
        let mut cand: Vec<usize> = g.neighbours(start).to_vec();
        while !cand.is_empty() {
            let &v = cand
                .iter()
                .max_by_key(|&&v| (cand.iter().filter(|&&u| adj[v][u]).count(), g.degree(v), std::cmp::Reverse(v)))
                .expect("nonempty");
            clique.push(v);
            cand.retain(|&u| u != v && adj[v][u]);
        }
        if clique.len() > best.len() {
            best = clique;
        }
    }
    best
}

struct Search<'a> {
    g: &'a SbmGraph,
    colour: Vec<usize>,
    /// neighbour_colours[v * n + c] = number of neighbours of v coloured c
    neighbour_colours: Vec<u32>,
    saturation: Vec<usize>,
    best: usize,
    best_colouring: Vec<usize>,
    lower: usize,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn assign(&mut self, v: usize, c: usize) {
        let n = self.g.n();
        self.colour[v] = c;
        for &u in self.g.neighbours(v) {
            let slot = &mut self.neighbour_colours[u * n + c];
            if *slot == 0 {
                self.saturation[u] += 1;
            }
            *slot += 1;
        }
    }

    fn unassign(&mut self, v: usize) {
        let n = self.g.n();
        let c = self.colour[v];
        for &u in self.g.neighbours(v) {
            let slot = &mut self.neighbour_colours[u * n + c];
            *slot -= 1;
            if *slot == 0 {
                self.saturation[u] -= 1;
            }
        }
        self.colour[v] = usize::MAX;
    }

    fn pick(&self) -> Option<usize> {
        (0..self.g.n()).filter(|&v| self.colour[v] == usize::MAX).max_by(|&a, &b| {
            (self.saturation[a], self.g.degree(a), std::cmp::Reverse(a)).cmp(&(
                self.saturation[b],
                self.g.degree(b),
                std::cmp::Reverse(b),
            ))
        })
    }

    fn run(&mut self, used: usize) {
        if self.exhausted || self.best == self.lower {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        let Some(v) = self.pick() else {
            if used < self.best {
                self.best = used;
                self.best_colouring = self.colour.clone();
            }
            return;
        };
        let n = self.g.n();
        for c in 0..used {
            if self.neighbour_colours[v * n + c] == 0 {
                self.assign(v, c);
                self.run(used);
                self.unassign(v);
                if self.exhausted || self.best == self.lower {
                    return;
                }
            }
        }
        if used + 1 < self.best {
            self.assign(v, used);
            self.run(used + 1);
            self.unassign(v);
        }
    }
}

/// An optimal colouring, or [`Error::BudgetExceeded`] with the bracket found
/// when more than `budget` search nodes are expanded.
pub fn exact_colouring(g: &SbmGraph, budget: u64) -> Result<Colouring> {
    let n = g.n();
    if n == 0 {
        return Ok(Colouring { colour_of: Vec::new(), num_colours: 0, method: ColouringMethod::Exact });
    }
    let clique = greedy_clique(g);
    let upper_colouring = dsatur_on(g, None, 0);
    let upper = upper_colouring.iter().max().map_or(0, |&c| c + 1);
    let lower = clique.len();
    if lower == upper {
        return Ok(Colouring::normalised(upper_colouring, ColouringMethod::Exact));
    }
    let mut s = Search {
        g,
        colour: vec![usize::MAX; n],
        neighbour_colours: vec![0; n * n],
        saturation: vec![0; n],
        best: upper,
        best_colouring: upper_colouring,
        lower,
        nodes: 0,
        budget,
        exhausted: false,
    };
    for (c, &v) in clique.iter().enumerate() {
        s.assign(v, c);
    }
    s.run(lower);
    if s.exhausted {
        return Err(Error::BudgetExceeded { lower, upper: s.best });
    }
    Ok(Colouring::normalised(s.best_colouring, ColouringMethod::Exact))
}

/// Exact chromatic number; see [`exact_colouring`].
pub fn exact_chromatic(g: &SbmGraph, budget: u64) -> Result<usize> {
    exact_colouring(g, budget).map(|c| c.num_colours)
}

#[cfg(test)]
mod tests {
    use super::super::testgraphs::*;
    use super::*;

    /// Independent oracle: smallest c admitting a proper colouring, by
    /// exhaustive backtracking in index order.
    fn brute_chi(g: &SbmGraph) -> usize {
        fn ok(g: &SbmGraph, col: &mut Vec<usize>, v: usize, c: usize) -> bool {
            if v == g.n() {
                return true;
            }
            for x in 0..c {
                if g.neighbours(v).iter().all(|&u| u >= v || col[u] != x) {
                    col[v] = x;
                    if ok(g, col, v + 1, c) {
                        return true;
                    }
                }
            }
            false
        }
        (0..=g.n()).find(|&c| ok(g, &mut vec![0; g.n()], 0, c)).unwrap()
    }

    #[test]
    fn classic_graphs() {
        assert_eq!(exact_chromatic(&complete(4), DEFAULT_BUDGET).unwrap(), 4);
        assert_eq!(exact_chromatic(&cycle(5), DEFAULT_BUDGET).unwrap(), 3);
        assert_eq!(exact_chromatic(&petersen(), DEFAULT_BUDGET).unwrap(), 3);
        assert_eq!(brute_chi(&petersen()), 3);
        assert_eq!(exact_chromatic(&from_edges(3, &[]), DEFAULT_BUDGET).unwrap(), 1);
        assert_eq!(exact_chromatic(&from_edges(0, &[]), DEFAULT_BUDGET).unwrap(), 0);
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        use crate::graph::sample_sbm;
        use crate::model::{ModelInstance, ProbMatrix};
        for seed in 0..40 {
            let p = 0.2 + 0.15 * (seed % 5) as f64;
            let m = ModelInstance::new(&[11], ProbMatrix::uniform(1, p).unwrap()).unwrap();
            let g = sample_sbm(&m, seed);
            let c = exact_colouring(&g, DEFAULT_BUDGET).unwrap();
            assert!(c.is_proper(&g));
            assert_eq!(c.num_colours, brute_chi(&g), "seed {seed}");
        }
    }

    #[test]
    fn budget_exhaustion_reports_bracket() {
        use crate::graph::sample_sbm;
        use crate::model::{ModelInstance, ProbMatrix};
        let m = ModelInstance::new(&[40], ProbMatrix::uniform(1, 0.5).unwrap()).unwrap();
        let g = sample_sbm(&m, 1);
        match exact_chromatic(&g, 1) {
            Err(Error::BudgetExceeded { lower, upper }) => assert!(lower < upper),
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
