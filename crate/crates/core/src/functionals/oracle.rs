//! Exact `w*` over integer systems, by dynamic programming on the lattice
//! box `0 <= y <= x`.
//!
//! `best[s] = min over parts y <= s, y != 0, of w(y) + best[s - y]`, where
//! the part is required to contain the first nonzero coordinate of `s`. Every
//! system of `s` has such a part, so the restriction loses nothing and each
//! multiset of parts is visited along fewer paths.

use super::{corner_max, Decomposition};
use crate::error::{Error, Result};
use crate::model::{BlockVector, QMatrix};

/// Upper limit on (state, part) pairs visited by [`w_star_bruteforce`].
pub const ORACLE_WORK_LIMIT: u128 = 200_000_000;

/// Minimum of `sum_t w(parts[t])` over all systems of nonzero integer vectors
/// summing to the integer vector `x`.
///
/// The number of parts is not capped; the optimum over integer systems can
/// need more than `k` parts.
pub fn w_star_bruteforce(x: &BlockVector, q: &QMatrix) -> Result<Decomposition> {
    let k = q.k();
    if x.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: x.k() });
    }
    let counts = x.counts().ok_or_else(|| {
        let index = x.values().iter().position(|v| v.fract() != 0.0).unwrap_or(0);
        Error::NotInteger { index, value: x.values()[index] }
    })?;

    let work: u128 = counts.iter().map(|&c| (c as u128 + 1) * (c as u128 + 2) / 2).product();
    if work > ORACLE_WORK_LIMIT {
        return Err(Error::TooLarge(format!(
            "integer decomposition of {counts:?} needs ~{work} steps (limit {ORACLE_WORK_LIMIT})"
        )));
    }

    let radix: Vec<usize> = counts.iter().map(|&c| c + 1).collect();
    let mut stride = vec![1usize; k];
    for i in 1..k {
        stride[i] = stride[i - 1] * radix[i - 1];
    }
    let states: usize = radix.iter().product();

    let decode = |mut idx: usize, out: &mut [usize]| {
        for i in 0..k {
            out[i] = idx % radix[i];
            idx /= radix[i];
        }
    };

    let mut w = vec![0.0f64; states];
    let mut coords = vec![0usize; k];
    let mut real = vec![0.0f64; k];
    for (idx, slot) in w.iter_mut().enumerate() {
        decode(idx, &mut coords);
        for i in 0..k {
            real[i] = coords[i] as f64;
        }
        *slot = corner_max(q, &real).0;
    }

    let mut best = vec![f64::INFINITY; states];
    let mut choice = vec![0usize; states];
    best[0] = 0.0;
    let mut part = vec![0usize; k];
    // States in increasing index order: every `s - y` precedes `s`.
    for s in 1..states {
        decode(s, &mut coords);
        let lead = coords.iter().position(|&c| c > 0).expect("nonzero state");
        // Enumerate parts y <= s with y[lead] >= 1 via a mixed-radix counter.
        part.iter_mut().for_each(|v| *v = 0);
        part[lead] = 1;
        let mut y_idx = stride[lead];
        loop {
            let cand = w[y_idx] + best[s - y_idx];
            if cand < best[s] {
                best[s] = cand;
                choice[s] = y_idx;
            }
            // increment
            let mut i = 0;
            loop {
                if i == k {
                    break;
                }
                let floor = if i == lead { 1 } else { 0 };
                if part[i] < coords[i] {
                    part[i] += 1;
                    y_idx += stride[i];
                    break;
                }
                y_idx -= (part[i] - floor) * stride[i];
                part[i] = floor;
                i += 1;
            }
            if i == k {
                break;
            }
        }
    }

    let mut rows = Vec::new();
    let mut s = states - 1;
    while s != 0 {
        let y = choice[s];
        decode(y, &mut coords);
        rows.push(coords.iter().map(|&c| c as f64).collect::<Vec<f64>>());
        s -= y;
    }
    let mut d = Decomposition::from_rows(rows, x.clone(), q)?;
    d.w_sum = best[states - 1];
    Ok(d)
}
