//! Colourings, maximum average degree, and weighted independent sets.

mod dsatur;
mod exact;
mod extraction;
mod independent;
mod mad;

pub use dsatur::dsatur_colouring;
pub use exact::{exact_chromatic, exact_colouring, DEFAULT_BUDGET};
pub use extraction::{balanced_extraction_colouring, DEFAULT_EPSILON, DEGRADE_FACTOR};
pub use independent::{
    alpha_h, alpha_h_with, find_balanced_independent_set, h_value, independent_set_probability, AlphaMode,
    WeightedIndepResult, EXACT_ALPHA_MAX_N, EXACT_ALPHA_MAX_SETS,
};
pub use mad::{max_avg_degree, max_avg_degree_bruteforce, max_avg_degree_flow, BRUTE_FORCE_MAX_N};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SbmGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColouringMethod {
    Exact,
    Dsatur,
    Extraction,
}

/// A proper vertex colouring with colours `0..num_colours`, each used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colouring {
    pub colour_of: Vec<usize>,
    pub num_colours: usize,
    pub method: ColouringMethod,
}

impl Colouring {
    /// Relabels colours in order of first appearance.
    pub(crate) fn normalised(colour_of: Vec<usize>, method: ColouringMethod) -> Self {
        let mut map = std::collections::HashMap::new();
        let colour_of: Vec<usize> = colour_of
            .into_iter()
            .map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
            .collect();
        Self { num_colours: map.len(), colour_of, method }
    }

    pub fn is_proper(&self, g: &SbmGraph) -> bool {
        self.colour_of.len() == g.n() && g.edges().iter().all(|&(u, v)| self.colour_of[u] != self.colour_of[v])
    }

    /// Size of each colour class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_colours];
        for &c in &self.colour_of {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.num_colours];
        for (v, &c) in self.colour_of.iter().enumerate() {
            classes[c].push(v);
        }
        classes
    }
}

/// `sum over parts S of (1 + mad(G[S]))`, exactly.
pub fn partition_objective_exact(g: &SbmGraph, partition: &[Vec<usize>]) -> Result<Ratio<u64>> {
    let mut seen = vec![false; g.n()];
    for part in partition {
        if part.is_empty() {
            return Err(Error::InvalidParameter("partition has an empty part".into()));
        }
        for &v in part {
            if v >= g.n() || seen[v] {
                return Err(Error::InvalidParameter(format!("vertex {v} repeated or out of range")));
            }
            seen[v] = true;
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidParameter(format!("vertex {v} not covered by the partition")));
    }
    Ok(partition
        .iter()
        .map(|part| Ratio::from_integer(1) + max_avg_degree(&g.induced(part)))
        .fold(Ratio::from_integer(0), |a, b| a + b))
}

/// Floating point value of [`partition_objective_exact`].
pub fn partition_objective(g: &SbmGraph, partition: &[Vec<usize>]) -> Result<f64> {
    let r = partition_objective_exact(g, partition)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}
