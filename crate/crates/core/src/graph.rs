//! Labelled simple graphs and the random graph constructors built on them.
//!
//! All samplers draw one Bernoulli per candidate pair (or per edge, for
//! percolation) in lexicographic `(u, v)` order with `u < v`, from a
//! [`ChaCha8Rng`](rand_chacha::ChaCha8Rng) seeded by the caller. The same
//! parameters and seed give the same graph on every platform.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{BlockVector, ModelInstance, ProbMatrix};
use crate::rng::rng_from_seed;

/// Where a graph came from: constructor name, parameters, seed, and parent
/// graphs for derived constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<Provenance>,
}

impl Provenance {
    pub fn new(kind: &str, params: Value, seed: Option<u64>) -> Self {
        Self { kind: kind.to_string(), params, seed, parents: Vec::new() }
    }
}

/// Undirected simple graph with a block label per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmGraph {
    block_of: Vec<usize>,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
    pub provenance: Provenance,
}

impl SbmGraph {
    /// Builds a graph from an edge list. Endpoints are normalised to `u < v`;
    /// self-loops, duplicate edges and out-of-range endpoints are rejected.
    pub fn from_edges(block_of: Vec<usize>, edges: &[(usize, usize)], provenance: Provenance) -> Result<Self> {
        let n = block_of.len();
        let mut list: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Self::from_sorted_unique(block_of, list, provenance))
    }

    fn from_sorted_unique(block_of: Vec<usize>, edges: Vec<(usize, usize)>, provenance: Provenance) -> Self {
        let n = block_of.len();
        let mut neighbours = vec![Vec::new(); n];
        for &(u, v) in &edges {
            neighbours[u].push(v);
            neighbours[v].push(u);
        }
        for nb in &mut neighbours {
            nb.sort_unstable();
        }
        Self { block_of, edges, neighbours, provenance }
    }

    /// Graph without edges.
    pub fn empty(block_of: Vec<usize>, provenance: Provenance) -> Self {
        Self::from_sorted_unique(block_of, Vec::new(), provenance)
    }

    pub fn n(&self) -> usize {
        self.block_of.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.neighbours[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbours[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbours[u].binary_search(&v).is_ok()
    }

    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    pub fn num_blocks(&self) -> usize {
        self.block_of.iter().map(|&b| b + 1).max().unwrap_or(0)
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_blocks()];
        for &b in &self.block_of {
            sizes[b] += 1;
        }
        sizes
    }

    /// Per-block counts of a vertex set, over `k` blocks.
    pub fn profile(&self, set: &[usize], k: usize) -> Vec<usize> {
        let mut b = vec![0; k];
        for &v in set {
            b[self.block_of[v]] += 1;
        }
        b
    }

    /// Number of edges with both endpoints in `set`.
    pub fn induced_edge_count(&self, set: &[usize]) -> usize {
        let mut inside = vec![false; self.n()];
        for &v in set {
            inside[v] = true;
        }
        self.edges.iter().filter(|&&(u, v)| inside[u] && inside[v]).count()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        self.induced_edge_count(set) == 0
    }

    /// Induced subgraph on `set` (vertices renumbered in the given order).
    pub fn induced(&self, set: &[usize]) -> SbmGraph {
        let mut index = vec![usize::MAX; self.n()];
        for (i, &v) in set.iter().enumerate() {
            index[v] = i;
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(u, v)| index[u] != usize::MAX && index[v] != usize::MAX)
            .map(|&(u, v)| (index[u].min(index[v]), index[u].max(index[v])))
            .collect();
        edges.sort_unstable();
        let blocks = set.iter().map(|&v| self.block_of[v]).collect();
        Self::from_sorted_unique(blocks, edges, Provenance::new("induced", json!({}), None))
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n(),
            blocks: self.block_of.clone(),
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        file.into_graph()
    }
}

/// On-disk graph: `{"n", "blocks", "edges", "provenance"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub blocks: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    pub provenance: Provenance,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<SbmGraph> {
        if self.blocks.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: self.blocks.len() });
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        SbmGraph::from_edges(self.blocks, &edges, self.provenance)
    }
}

/// Template graph `H` on `[k]` and block sizes for its blow-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpSpec {
    pub h_adjacency: Vec<Vec<bool>>,
    pub sizes: Vec<usize>,
}

impl BlowUpSpec {
    pub fn new(h_adjacency: Vec<Vec<bool>>, sizes: Vec<usize>) -> Result<Self> {
        let k = h_adjacency.len();
        if sizes.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: sizes.len() });
        }
        for (i, row) in h_adjacency.iter().enumerate() {
            if row.len() != k {
                return Err(Error::BadShape { k });
            }
            if row[i] {
                return Err(Error::InvalidParameter(format!("template has a loop at {i}")));
            }
            for (j, &e) in row.iter().enumerate() {
                if e != h_adjacency[j][i] {
                    return Err(Error::Asymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { h_adjacency, sizes })
    }

    /// Template given by an edge list on `[k]`.
    pub fn from_edges(k: usize, edges: &[(usize, usize)], sizes: Vec<usize>) -> Result<Self> {
        let mut adj = vec![vec![false; k]; k];
        for &(a, b) in edges {
            if a >= k || b >= k {
                return Err(Error::InvalidParameter(format!("template edge ({a}, {b}) out of range")));
            }
            adj[a][b] = true;
            adj[b][a] = true;
        }
        Self::new(adj, sizes)
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    /// `I + A_H` as a matrix of integers.
    pub fn q_tilde(&self) -> Vec<Vec<i64>> {
        let k = self.k();
        (0..k).map(|i| (0..k).map(|j| if i == j || self.h_adjacency[i][j] { 1 } else { 0 }).collect()).collect()
    }

    fn block_map(&self) -> Vec<usize> {
        self.sizes.iter().enumerate().flat_map(|(b, &n)| std::iter::repeat_n(b, n)).collect()
    }
}

fn check_unit_open(p: f64, what: &str) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("{what} = {p} must lie in (0, 1)")));
    }
    Ok(())
}

/// One draw from the block model: each pair `{u, v}` is an edge
/// independently with probability `p[block(u)][block(v)]`.
pub fn sample_sbm(m: &ModelInstance, seed: u64) -> SbmGraph {
    let block_of = m.block_map();
    let n = block_of.len();
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = m.probs.get(block_of[u], block_of[v]);
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let prov = Provenance::new("sbm", json!({ "sizes": m.block_sizes(), "P": m.probs.rows() }), Some(seed));
    SbmGraph::from_sorted_unique(block_of, edges, prov)
}

/// Deterministic blow-up: block `i` is a clique on `n_i` vertices, blocks `i`
/// and `j` are completely joined iff `ij` is an edge of `H`.
pub fn blow_up(spec: &BlowUpSpec) -> SbmGraph {
    let block_of = spec.block_map();
    let n = block_of.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let (a, b) = (block_of[u], block_of[v]);
            if a == b || spec.h_adjacency[a][b] {
                edges.push((u, v));
            }
        }
    }
    let prov = Provenance::new("blowup", json!({ "H": spec.h_adjacency, "sizes": spec.sizes }), None);
    SbmGraph::from_sorted_unique(block_of, edges, prov)
}

/// Keeps each edge of `g` independently with probability `p`.
pub fn percolate(g: &SbmGraph, p: f64, seed: u64) -> Result<SbmGraph> {
    check_unit_open(p, "percolation probability")?;
    let mut rng = rng_from_seed(seed);
    let edges: Vec<(usize, usize)> = g.edges.iter().copied().filter(|_| rng.random::<f64>() < p).collect();
    let mut prov = Provenance::new("percolate", json!({ "p": p }), Some(seed));
    prov.parents.push(g.provenance.clone());
    Ok(SbmGraph::from_sorted_unique(g.block_of.clone(), edges, prov))
}

/// The block model with `P = p (I + A_H)`, whose samples are distributed as
/// percolated blow-ups.
pub fn blow_up_as_model(spec: &BlowUpSpec, p: f64) -> Result<ModelInstance> {
    check_unit_open(p, "percolation probability")?;
    let rows: Vec<Vec<f64>> = spec.q_tilde().iter().map(|r| r.iter().map(|&e| p * e as f64).collect()).collect();
    ModelInstance::new(&spec.sizes, ProbMatrix::new(&rows)?)
}

/// Chung-Lu kernels: `p u_a u_b` or `p (u_a + u_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChungLuKind {
    Times,
    Plus,
}

impl ChungLuKind {
    #[inline]
    pub fn probability(self, p: f64, a: f64, b: f64) -> f64 {
        match self {
            ChungLuKind::Times => p * a * b,
            ChungLuKind::Plus => p * (a + b),
        }
    }

    fn check(self, p: f64) -> Result<()> {
        check_unit_open(p, "Chung-Lu p")?;
        if self == ChungLuKind::Plus && p > 0.5 {
            return Err(Error::InvalidParameter(format!("plus kernel needs p <= 1/2, got {p}")));
        }
        Ok(())
    }
}

fn check_weights(u: &[f64]) -> Result<()> {
    for (index, &value) in u.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParameter(format!("weight u[{index}] = {value} outside [0, 1]")));
        }
    }
    Ok(())
}

/// 1-based cell of `value` among `buckets` half-open cells `((i-1)/b, i/b]`,
/// with 0 in cell 1.
pub fn bucket_of(value: f64, buckets: usize) -> usize {
    ((value * buckets as f64).ceil() as usize).clamp(1, buckets)
}

/// Largest probability representable below 1; upper bucket entries are
/// clamped to it.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON;

/// Bucketed block models sandwiching the Chung-Lu graph.
///
/// Vertices are grouped by the cell of their weight. The lower (upper) model
/// uses the left (right) cell endpoints in the kernel, so every exact pair
/// probability lies between the two entries of its cell pair.
pub fn chung_lu_model(u: &[f64], p: f64, kind: ChungLuKind, buckets: usize) -> Result<(ModelInstance, ModelInstance)> {
    kind.check(p)?;
    check_weights(u)?;
    if buckets == 0 {
        return Err(Error::InvalidParameter("buckets must be at least 1".into()));
    }
    let b = buckets as f64;
    let mut sizes = vec![0usize; buckets];
    for &value in u {
        sizes[bucket_of(value, buckets) - 1] += 1;
    }
    let mut lower = vec![vec![0.0; buckets]; buckets];
    let mut upper = vec![vec![0.0; buckets]; buckets];
    for i in 1..=buckets {
        for j in 1..=buckets {
            let (lo, hi) = match kind {
                ChungLuKind::Times => (p * ((i - 1) * (j - 1)) as f64 / (b * b), p * (i * j) as f64 / (b * b)),
                ChungLuKind::Plus => (p * ((i - 1) + (j - 1)) as f64 / b, p * (i + j) as f64 / b),
            };
            lower[i - 1][j - 1] = lo;
            upper[i - 1][j - 1] = hi.min(BELOW_ONE);
        }
    }
    Ok((ModelInstance::new(&sizes, ProbMatrix::new(&lower)?)?, ModelInstance::new(&sizes, ProbMatrix::new(&upper)?)?))
}

/// Exact Chung-Lu sampler. Without a block map every vertex is its own block.
pub fn sample_chung_lu(
    u: &[f64],
    p: f64,
    kind: ChungLuKind,
    seed: u64,
    block_of: Option<Vec<usize>>,
) -> Result<SbmGraph> {
    kind.check(p)?;
    check_weights(u)?;
    let n = u.len();
    let block_of = match block_of {
        Some(b) if b.len() != n => return Err(Error::DimensionMismatch { expected: n, got: b.len() }),
        Some(b) => b,
        None => (0..n).collect(),
    };
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for c in (a + 1)..n {
            let prob = kind.probability(p, u[a], u[c]);
            if prob >= 1.0 {
                return Err(Error::InvalidProbability { row: a, col: c, value: prob });
            }
            if rng.random::<f64>() < prob {
                edges.push((a, c));
            }
        }
    }
    let name = match kind {
        ChungLuKind::Times => "chunglu-times",
        ChungLuKind::Plus => "chunglu-plus",
    };
    let prov = Provenance::new(name, json!({ "u": u, "p": p }), Some(seed));
    Ok(SbmGraph::from_sorted_unique(block_of, edges, prov))
}

/// Edge-set union of two graphs on the same labelled vertex set.
pub fn union_graphs(g1: &SbmGraph, g2: &SbmGraph) -> Result<SbmGraph> {
    if g1.block_of != g2.block_of {
        return Err(Error::StructureMismatch(format!("vertex/block maps differ (n = {} vs {})", g1.n(), g2.n())));
    }
    let mut edges = Vec::with_capacity(g1.edge_count() + g2.edge_count());
    let (mut i, mut j) = (0, 0);
    while i < g1.edges.len() || j < g2.edges.len() {
        let next = match (g1.edges.get(i), g2.edges.get(j)) {
            (Some(a), Some(b)) if a == b => {
                i += 1;
                j += 1;
                *a
            }
            (Some(a), Some(b)) if a < b => {
                i += 1;
                *a
            }
            (Some(_), Some(b)) => {
                j += 1;
                *b
            }
            (Some(a), None) => {
                i += 1;
                *a
            }
            (None, Some(b)) => {
                j += 1;
                *b
            }
            (None, None) => unreachable!(),
        };
        edges.push(next);
    }
    let mut prov = Provenance::new("union", json!({}), None);
    prov.parents = vec![g1.provenance.clone(), g2.provenance.clone()];
    Ok(SbmGraph::from_sorted_unique(g1.block_of.clone(), edges, prov))
}

/// Block profile `b(U)` as a [`BlockVector`].
pub fn profile_vector(g: &SbmGraph, set: &[usize], k: usize) -> BlockVector {
    BlockVector::from_counts(&g.profile(set, k))
}
