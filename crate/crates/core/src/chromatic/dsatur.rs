use rand::seq::SliceRandom;

use super::{Colouring, ColouringMethod};
use crate::graph::SbmGraph;
use crate::rng::rng_from_seed;

/// Brélaz's DSATUR: repeatedly colour the vertex with the most distinct
/// neighbour colours, breaking ties by degree among uncoloured vertices, then
/// by a seeded random priority, then by index. Each vertex takes the smallest
/// free colour.
pub fn dsatur_colouring(g: &SbmGraph, seed: u64) -> Colouring {
    let colour_of = dsatur_on(g, None, seed);
    Colouring::normalised(colour_of, ColouringMethod::Dsatur)
}

/// DSATUR restricted to `subset` (all vertices when `None`). Vertices outside
/// the subset get `usize::MAX`.
pub(crate) fn dsatur_on(g: &SbmGraph, subset: Option<&[usize]>, seed: u64) -> Vec<usize> {
    let n = g.n();
    let mut active = vec![subset.is_none(); n];
    if let Some(s) = subset {
        for &v in s {
            active[v] = true;
        }
    }
    let vertices: Vec<usize> = (0..n).filter(|&v| active[v]).collect();
    let mut priority: Vec<usize> = (0..n).collect();
    priority.shuffle(&mut rng_from_seed(seed));

    let mut colour = vec![usize::MAX; n];
    // distinct neighbour colours per vertex
    let mut seen: Vec<Vec<bool>> = vec![Vec::new(); n];
    let mut saturation = vec![0usize; n];
    let mut free_degree: Vec<usize> =
        (0..n).map(|v| if active[v] { g.neighbours(v).iter().filter(|&&u| active[u]).count() } else { 0 }).collect();

    for _ in 0..vertices.len() {
        let v = *vertices
            .iter()
            .filter(|&&v| colour[v] == usize::MAX)
            .max_by(|&&a, &&b| {
                (saturation[a], free_degree[a], priority[a], std::cmp::Reverse(a)).cmp(&(
                    saturation[b],
                    free_degree[b],
                    priority[b],
                    std::cmp::Reverse(b),
                ))
            })
            .expect("uncoloured vertex remains");
        let c = (0..).find(|&c| seen[v].get(c).is_none_or(|&s| !s)).expect("free colour");
        colour[v] = c;
        for &u in g.neighbours(v) {
            if !active[u] || colour[u] != usize::MAX {
                continue;
            }
            free_degree[u] -= 1;
            if seen[u].len() <= c {
                seen[u].resize(c + 1, false);
            }
            if !seen[u][c] {
                seen[u][c] = true;
                saturation[u] += 1;
            }
        }
    }
    colour
}
