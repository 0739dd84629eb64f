//! Independence probabilities and the weighted independence number
//! `alpha_h(G) = max over nonempty independent U of h(U)`, where
//! `h(U) = -ln Pr(U independent) / |U|`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SbmGraph;
use crate::model::ModelInstance;
use crate::rng::{mix, rng_from_seed, Rng};

/// Vertex-count guard for exact `alpha_h` without a set-count check.
pub const EXACT_ALPHA_MAX_N: usize = 40;
/// Above [`EXACT_ALPHA_MAX_N`], exact mode is allowed while the graph has at
/// most this many independent sets (and at most 64 vertices).
pub const EXACT_ALPHA_MAX_SETS: u64 = 10_000_000;

const HEURISTIC_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedIndepResult {
    /// Sorted vertex list.
    pub best_set: Vec<usize>,
    /// `h(best_set)` in nats per vertex.
    pub h_value: f64,
    pub exact: bool,
}

/// Sum of `q(u, v)` over pairs of the sorted set, accumulated column by
/// column (`for j, for i < j`). Appending a larger vertex extends the sum in
/// the same order, which keeps incremental and from-scratch values bitwise
/// equal.
fn pair_sum(m: &ModelInstance, blocks: &[usize], set: &[usize]) -> f64 {
    let mut acc = 0.0;
    for j in 0..set.len() {
        for i in 0..j {
            acc += m.q.get(blocks[set[i]], blocks[set[j]]);
        }
    }
    acc
}

/// `ln Pr(U is independent)` in the model, i.e. `sum over pairs of ln(1 - p)`.
pub fn independent_set_probability(m: &ModelInstance, set: &[usize]) -> f64 {
    let blocks = m.block_map();
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    -pair_sum(m, &blocks, &sorted)
}

/// `h(U)`; 0 for the empty set.
pub fn h_value(m: &ModelInstance, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let blocks = m.block_map();
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    pair_sum(m, &blocks, &sorted) / sorted.len() as f64
}

fn check_model_graph(m: &ModelInstance, g: &SbmGraph) -> Result<()> {
    if m.n_total() != g.n() {
        return Err(Error::StructureMismatch(format!("model has {} vertices, graph {}", m.n_total(), g.n())));
    }
    Ok(())
}

/// Weighted independence number in the chosen mode.
pub fn alpha_h(m: &ModelInstance, g: &SbmGraph, mode: AlphaMode, seed: u64) -> Result<WeightedIndepResult> {
    alpha_h_with(m, g, mode, seed, HEURISTIC_ITERATIONS)
}

/// [`alpha_h`] with an explicit iteration budget for the heuristic.
pub fn alpha_h_with(
    m: &ModelInstance,
    g: &SbmGraph,
    mode: AlphaMode,
    seed: u64,
    iterations: usize,
) -> Result<WeightedIndepResult> {
    check_model_graph(m, g)?;
    if g.n() == 0 {
        return Ok(WeightedIndepResult { best_set: Vec::new(), h_value: 0.0, exact: mode == AlphaMode::Exact });
    }
    match mode {
        AlphaMode::Exact => exact_alpha(m, g),
        AlphaMode::Heuristic => Ok(heuristic_alpha(m, g, seed, iterations)),
    }
}

fn count_independent_sets(adj: &[u64], cand: u64, limit: u64, count: &mut u64) {
    let mut rest = cand;
    while rest != 0 {
        if *count > limit {
            return;
        }
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        *count += 1;
        count_independent_sets(adj, rest & !adj[v], limit, count);
    }
}

struct ExactSearch<'a> {
    m: &'a ModelInstance,
    blocks: Vec<usize>,
    adj: Vec<u64>,
    q_max: f64,
    best: f64,
    best_set: Vec<usize>,
    current: Vec<usize>,
}

impl ExactSearch<'_> {
    fn run(&mut self, cand: u64, pairs: f64) {
        let size = self.current.len();
        if size > 0 {
            let h = pairs / size as f64;
            if h > self.best || self.best_set.is_empty() {
                self.best = h;
                self.best_set = self.current.clone();
            }
        }
        // h(U') <= (|U'| - 1) q_max / 2 for any extension U'
        let reach = size + cand.count_ones() as usize;
        if reach == 0 || (reach as f64 - 1.0) * self.q_max / 2.0 <= self.best {
            return;
        }
        let mut rest = cand;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let mut next = pairs;
            for &u in &self.current {
                next += self.m.q.get(self.blocks[u], self.blocks[v]);
            }
            self.current.push(v);
            self.run(rest & !self.adj[v], next);
            self.current.pop();
        }
    }
}

fn exact_alpha(m: &ModelInstance, g: &SbmGraph) -> Result<WeightedIndepResult> {
    let n = g.n();
    if n > 64 {
        return Err(Error::TooLarge(format!("exact alpha_h needs n <= 64, got {n}")));
    }
    let mut adj = vec![0u64; n];
    for &(u, v) in g.edges() {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    if n > EXACT_ALPHA_MAX_N {
        let mut count = 0;
        count_independent_sets(&adj, all, EXACT_ALPHA_MAX_SETS, &mut count);
        if count > EXACT_ALPHA_MAX_SETS {
            return Err(Error::TooLarge(format!("more than {EXACT_ALPHA_MAX_SETS} independent sets on {n} vertices")));
        }
    }
    let mut s = ExactSearch {
        m,
        blocks: m.block_map(),
        adj,
        q_max: m.q.q_max(),
        best: 0.0,
        best_set: Vec::new(),
        current: Vec::new(),
    };
    s.run(all, 0.0);
    let h = h_value(m, &s.best_set);
    Ok(WeightedIndepResult { best_set: s.best_set, h_value: h, exact: true })
}

/// Add / drop / swap local search with random restarts and kicks.
///
/// The state keeps, for each vertex, the number of chosen neighbours and the
/// pair weight it would add, so every move is evaluated in `O(1)` and applied
/// in `O(deg + n)`.
fn heuristic_alpha(m: &ModelInstance, g: &SbmGraph, seed: u64, iterations: usize) -> WeightedIndepResult {
    let n = g.n();
    let blocks = m.block_map();
    let mut rng = rng_from_seed(seed);

    let mut in_set = vec![false; n];
    let mut conflicts = vec![0u32; n];
    // gain[v] = sum over u in set of q(u, v)
    let mut gain = vec![0.0f64; n];
    let mut size = 0usize;
    let mut pairs = 0.0f64;

    let add =
        |v: usize, in_set: &mut [bool], conflicts: &mut [u32], gain: &mut [f64], size: &mut usize, pairs: &mut f64| {
            *pairs += gain[v];
            in_set[v] = true;
            *size += 1;
            for &u in g.neighbours(v) {
                conflicts[u] += 1;
            }
            for (u, gu) in gain.iter_mut().enumerate() {
                *gu += m.q.get(blocks[u], blocks[v]);
            }
        };
    let remove =
        |v: usize, in_set: &mut [bool], conflicts: &mut [u32], gain: &mut [f64], size: &mut usize, pairs: &mut f64| {
            in_set[v] = false;
            *size -= 1;
            for &u in g.neighbours(v) {
                conflicts[u] -= 1;
            }
            for (u, gu) in gain.iter_mut().enumerate() {
                *gu -= m.q.get(blocks[u], blocks[v]);
            }
            *pairs -= gain[v];
        };

    let score = |pairs: f64, size: usize| if size == 0 { f64::NEG_INFINITY } else { pairs / size as f64 };

    let mut best_set: Vec<usize> = vec![0];
    let mut best = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut tabu = vec![0usize; n];

    for it in 0..iterations.max(1) {
        if size == 0 {
            order.shuffle(&mut rng);
            for &v in &order {
                if conflicts[v] == 0 && !in_set[v] {
                    add(v, &mut in_set, &mut conflicts, &mut gain, &mut size, &mut pairs);
                }
            }
        }
        let current = score(pairs, size);
        // best improving add, else best improving drop, else a swap or a kick
        let mut moved = false;
        let mut best_add: Option<(usize, f64)> = None;
        for v in 0..n {
            if !in_set[v] && conflicts[v] == 0 {
                let s = score(pairs + gain[v], size + 1);
                if s > current + 1e-12 && best_add.is_none_or(|(_, b)| s > b) {
                    best_add = Some((v, s));
                }
            }
        }
        if let Some((v, _)) = best_add {
            add(v, &mut in_set, &mut conflicts, &mut gain, &mut size, &mut pairs);
            moved = true;
        } else if size > 1 {
            let mut best_drop: Option<(usize, f64)> = None;
            for v in 0..n {
                if in_set[v] {
                    let s = score(pairs - gain[v], size - 1);
                    if s > current + 1e-12 && best_drop.is_none_or(|(_, b)| s > b) {
                        best_drop = Some((v, s));
                    }
                }
            }
            if let Some((v, _)) = best_drop {
                remove(v, &mut in_set, &mut conflicts, &mut gain, &mut size, &mut pairs);
                moved = true;
            }
        }
        if !moved {
            // (1,1)-swap onto a plateau or better: v outside with one chosen neighbour u
            let mut swaps: Vec<(usize, usize)> = Vec::new();
            for v in 0..n {
                if !in_set[v] && conflicts[v] == 1 && tabu[v] <= it {
                    let u = *g.neighbours(v).iter().find(|&&u| in_set[u]).expect("one conflict");
                    let after = pairs - gain[u] + gain[v] - m.q.get(blocks[u], blocks[v]);
                    if score(after, size) >= current - 1e-12 {
                        swaps.push((v, u));
                    }
                }
            }
            if let Some(&(v, u)) = swaps.get(rng.random_range(0..swaps.len().max(1))) {
                remove(u, &mut in_set, &mut conflicts, &mut gain, &mut size, &mut pairs);
                add(v, &mut in_set, &mut conflicts, &mut gain, &mut size, &mut pairs);
                tabu[u] = it + 7;
            } else {
                kick(&mut rng, n, &mut |v| {
                    if in_set[v] {
                        return;
                    }
                    let clash: Vec<usize> = g.neighbours(v).iter().copied().filter(|&u| in_set[u]).collect();
                    for u in clash {
                        remove(u, &mut in_set, &mut conflicts, &mut gain, &mut size, &mut pairs);
                        tabu[u] = it + 7;
                    }
                    add(v, &mut in_set, &mut conflicts, &mut gain, &mut size, &mut pairs);
                });
            }
        }
        let s = score(pairs, size);
        if s > best + 1e-12 {
            best = s;
            best_set = (0..n).filter(|&v| in_set[v]).collect();
        }
    }
    let h = h_value(m, &best_set);
    WeightedIndepResult { best_set, h_value: h, exact: false }
}

fn kick(rng: &mut Rng, n: usize, force_in: &mut dyn FnMut(usize)) {
    let v = rng.random_range(0..n);
    force_in(v);
}

/// An independent set among `remaining` with exactly `target[i]` vertices in
/// block `i`, or `None` after `effort` failed restarts.
///
/// Each restart fills the set greedily, always serving the block furthest
/// from its quota, with random vertex order; when a block has no free vertex
/// left, a vertex of that block with a single chosen neighbour is swapped in.
pub fn find_balanced_independent_set(
    g: &SbmGraph,
    remaining: &[usize],
    target: &[usize],
    seed: u64,
    effort: usize,
) -> Option<Vec<usize>> {
    let k = target.len();
    let total: usize = target.iter().sum();
    if total == 0 {
        return Some(Vec::new());
    }
    let mut by_block: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &v in remaining {
        let b = g.block_of()[v];
        if b < k {
            by_block[b].push(v);
        }
    }
    if (0..k).any(|b| by_block[b].len() < target[b]) {
        return None;
    }
    let n = g.n();
    for restart in 0..effort.max(1) {
        let mut rng = rng_from_seed(mix(seed, restart as u64));
        for list in by_block.iter_mut() {
            list.shuffle(&mut rng);
        }
        let mut chosen = vec![false; n];
        let mut conflicts = vec![0u32; n];
        let mut have = vec![0usize; k];
        let mut set: Vec<usize> = Vec::with_capacity(total);
        let mut tabu_until = vec![0usize; n];
        let mut repairs = 0usize;
        let max_repairs = 4 * total + 20;
        let mut step = 0usize;
        loop {
            step += 1;
            // block with the largest unmet fraction of its quota
            let Some(b) = (0..k).filter(|&b| have[b] < target[b]).max_by(|&a, &c| {
                let fa = (target[a] - have[a]) as f64 / target[a] as f64;
                let fc = (target[c] - have[c]) as f64 / target[c] as f64;
                fa.partial_cmp(&fc).expect("finite").then(c.cmp(&a))
            }) else {
                set.sort_unstable();
                return Some(set);
            };
            if let Some(&v) = by_block[b].iter().find(|&&v| !chosen[v] && conflicts[v] == 0) {
                chosen[v] = true;
                have[b] += 1;
                set.push(v);
                for &u in g.neighbours(v) {
                    conflicts[u] += 1;
                }
                continue;
            }
            if repairs >= max_repairs {
                break;
            }
            repairs += 1;
            let swappable: Vec<usize> = by_block[b]
                .iter()
                .copied()
                .filter(|&v| !chosen[v] && conflicts[v] == 1 && tabu_until[v] <= step)
                .collect();
            let Some(&v) = swappable.get(rng.random_range(0..swappable.len().max(1))) else {
                break;
            };
            let u = *g.neighbours(v).iter().find(|&&u| chosen[u]).expect("single conflict");
            chosen[u] = false;
            have[g.block_of()[u]] -= 1;
            set.retain(|&x| x != u);
            for &w in g.neighbours(u) {
                conflicts[w] -= 1;
            }
            tabu_until[u] = step + 3;
            chosen[v] = true;
            have[b] += 1;
            set.push(v);
            for &w in g.neighbours(v) {
                conflicts[w] += 1;
            }
        }
    }
    None
}
