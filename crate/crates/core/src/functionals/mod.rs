//! The functionals `w(x, Q)` and `w*(x, Q)`.
//!
//! `w(x)` is the maximum of `y^T Q y / ||y||` over the box `0 <= y <= x`. The
//! maximum is attained at a corner of the box, so [`w_value`] enumerates the
//! `2^k` corners. `w*(x)` is the infimum of `sum_t w(x_t)` over finite systems
//! of nonnegative vectors summing to `x`; [`w_star_solve`] searches real
//! systems of at most `k` parts and [`w_star_bruteforce`] solves the integer
//! version exactly by dynamic programming.

mod oracle;
mod search;

pub use oracle::{w_star_bruteforce, ORACLE_WORK_LIMIT};
pub use search::{near_optimal_integer_system, w_ell, w_ell_sequence, w_star_solve, DEFAULT_RESTARTS};

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::{BlockVector, QMatrix};
use crate::rng::rng_from_seed;

/// Largest `k` accepted by exact corner enumeration.
pub const MAX_CORNER_K: usize = 30;

/// Tolerance on the smallest eigenvalue of `Q` restricted to zero-sum vectors.
pub const PSEUDODEFINITE_TOL: f64 = 1e-9;

/// A maximizing corner of the box `[0, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerSolution {
    pub value: f64,
    /// Indices `i` with `maximizer_i = x_i`, ascending.
    pub support: Vec<usize>,
    pub maximizer: BlockVector,
}

/// A system of nonzero vectors summing to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub parts: Vec<BlockVector>,
    pub target: BlockVector,
    pub w_sum: f64,
}

impl Decomposition {
    /// Builds a decomposition from raw part rows, dropping empty rows and
    /// recomputing `w_sum`.
    pub fn from_rows(rows: Vec<Vec<f64>>, target: BlockVector, q: &QMatrix) -> Result<Self> {
        let mut parts = Vec::with_capacity(rows.len());
        let mut w_sum = 0.0;
        for row in rows {
            if row.iter().all(|&v| v <= 0.0) {
                continue;
            }
            w_sum += corner_max(q, &row).0;
            parts.push(BlockVector::new(row)?);
        }
        Ok(Self { parts, target, w_sum })
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Largest componentwise deviation of `sum_t parts[t]` from the target.
    pub fn residual(&self) -> f64 {
        let k = self.target.k();
        (0..k)
            .map(|j| {
                let s: f64 = self.parts.iter().map(|p| p.values()[j]).sum();
                (s - self.target.values()[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Maximum of `z^T Q z / ||z||` over corners of `[0, x]`, with the bitmask of
/// a maximizing corner. Zero components are skipped, so the cost is
/// `O(m 2^m)` in the number `m` of positive components.
///
/// No tie-breaking; [`w_value`] is the deterministic public entry point.
pub(crate) fn corner_max(q: &QMatrix, x: &[f64]) -> (f64, u64) {
    let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    let m = active.len();
    if m == 0 {
        return (0.0, 0);
    }
    let k = x.len();
    let mut qy = vec![0.0; k];
    let mut quad = 0.0;
    let mut norm = 0.0;
    let mut best = 0.0;
    let mut best_mask = 0u64;
    let mut gray = 0u64;
    let q_max = q.q_max();
    for step in 1u64..(1u64 << m) {
        let bit = step.trailing_zeros() as usize;
        let i = active[bit];
        let xi = x[i];
        gray ^= 1 << bit;
        let sign = if gray & (1 << bit) != 0 { 1.0 } else { -1.0 };
        let d = sign * xi;
        quad += 2.0 * d * qy[i] + d * d * q.get(i, i);
        for (j, v) in qy.iter_mut().enumerate() {
            *v += d * q.get(j, i);
        }
        norm += d;
        if gray != 0 && norm > 0.0 {
            // a corner's ratio never exceeds q_max * norm; the clamp stops
            // drift from inflating corners of near-zero mass
            let r = (quad / norm).min(q_max * norm);
            if r > best {
                best = r;
                best_mask = active
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| gray & (1 << b) != 0)
                    .fold(0u64, |acc, (_, &idx)| acc | (1 << idx));
            }
        }
    }
    // The running sums drift; re-evaluate the winning corner directly.
    let z: Vec<f64> = (0..k).map(|i| if best_mask & (1 << i) != 0 { x[i] } else { 0.0 }).collect();
    (q.ratio(&z), best_mask)
}

/// `w(x)` by corner enumeration.
///
/// Ties are broken towards the smallest support, then the lexicographically
/// smallest index list. The zero corner scores 0.
pub fn w_value(x: &BlockVector, q: &QMatrix) -> Result<CornerSolution> {
    let k = q.k();
    if x.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: x.k() });
    }
    if k > MAX_CORNER_K {
        return Err(Error::TooLarge(format!(
            "corner enumeration needs k <= {MAX_CORNER_K}, got {k}; use w_value_sampled"
        )));
    }
    let xs = x.values();
    let active: Vec<usize> = (0..k).filter(|&i| xs[i] > 0.0).collect();
    let (approx, _) = corner_max(q, xs);
    let tol = 1e-12 * approx.abs().max(1.0);

    let mut best_value = 0.0;
    let mut best_support: Vec<usize> = Vec::new();
    if approx > tol {
        // Any corner within `tol` of the maximum is a candidate; pick the
        // smallest support, then the lexicographically smallest.
        let m = active.len();
        let mut z = vec![0.0; k];
        for mask in 1u64..(1u64 << m) {
            let support: Vec<usize> = (0..m).filter(|b| mask & (1 << b) != 0).map(|b| active[b]).collect();
            if !best_support.is_empty() && support.len() > best_support.len() {
                continue;
            }
            z.iter_mut().for_each(|v| *v = 0.0);
            for &i in &support {
                z[i] = xs[i];
            }
            let r = q.ratio(&z);
            if r < approx - tol {
                continue;
            }
            let better = best_support.is_empty()
                || support.len() < best_support.len()
                || (support.len() == best_support.len() && support < best_support);
            if better {
                best_value = r;
                best_support = support;
            }
        }
    }
    let mut maximizer = vec![0.0; k];
    for &i in &best_support {
        maximizer[i] = xs[i];
    }
    Ok(CornerSolution { value: best_value, support: best_support, maximizer: BlockVector::new(maximizer)? })
}

/// Lower bound on `w(x)` from uniform samples of the box plus the singleton
/// corners. Used to cross-check the corner property numerically.
pub fn w_value_sampled(x: &BlockVector, q: &QMatrix, trials: usize, seed: u64) -> f64 {
    let xs = x.values();
    let k = xs.len();
    let mut best: f64 = 0.0;
    let mut z = vec![0.0; k];
    for i in 0..k {
        z.iter_mut().for_each(|v| *v = 0.0);
        z[i] = xs[i];
        best = best.max(q.ratio(&z));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..trials.max(1) {
        for (zi, &xi) in z.iter_mut().zip(xs) {
            *zi = rng.random::<f64>() * xi;
        }
        best = best.max(q.ratio(&z));
    }
    best
}

/// Whether `y^T Q y >= 0` for every `y` with `sum_i y_i = 0`.
///
/// Decided through the spectrum of `P Q P` with `P` the projector onto the
/// zero-sum subspace. The all-ones direction contributes a zero eigenvalue,
/// which does not affect the sign test.
pub fn is_pseudodefinite(q: &QMatrix) -> bool {
    smallest_projected_eigenvalue(q) >= -PSEUDODEFINITE_TOL
}

pub(crate) fn smallest_projected_eigenvalue(q: &QMatrix) -> f64 {
    let k = q.k();
    if k <= 1 {
        return 0.0;
    }
    let qm = DMatrix::from_fn(k, k, |i, j| q.get(i, j));
    let inv = 1.0 / k as f64;
    let p = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 - inv } else { -inv });
    let m = &p * qm * &p;
    let m = (&m + m.transpose()) * 0.5;
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Certified bounds `lower <= w*(x) <= upper`.
///
/// `upper = sum_i x_i q_ii`, `lower = q_hat(x)^2 ||x|| / trace(Q)`, and the
/// lower bound is 0 when the diagonal vanishes.
pub fn w_star_bounds(x: &BlockVector, q: &QMatrix) -> (f64, f64) {
    let upper = q.q_hat(x) * x.norm();
    let lower = if q.q_star() > 0.0 {
        let qh = q.q_hat(x);
        qh * qh * x.norm() / q.trace()
    } else {
        0.0
    };
    (lower, upper)
}
