//! Local search for `w*` and its `l`-part relaxation `w_l`.
//!
//! A system of `l` parts is an `l x k` allocation matrix whose columns sum to
//! `x`, so every move keeps the system feasible. Two move families are tried:
//! shifting mass of one block between two parts, and shifting a fraction of a
//! whole part into another. The step size follows a geometric schedule and the
//! search stops once it falls below `MIN_STEP`.

use rand::Rng as _;
use rayon::prelude::*;

use super::{corner_max, is_pseudodefinite, w_value, Decomposition};
use crate::error::{Error, Result};
use crate::model::{BlockVector, QMatrix};
use crate::rng::{mix, rng_from_seed, Rng};

pub const DEFAULT_RESTARTS: usize = 8;

const INITIAL_STEP: f64 = 0.5;
const COOLING: f64 = 0.5;
const MIN_STEP: f64 = 1e-10;
const MAX_SWEEPS: usize = 20_000;

#[derive(Clone)]
struct System {
    rows: Vec<Vec<f64>>,
    values: Vec<f64>,
    total: f64,
}

impl System {
    fn new(rows: Vec<Vec<f64>>, q: &QMatrix) -> Self {
        let values: Vec<f64> = rows.iter().map(|r| corner_max(q, r).0).collect();
        let total = values.iter().sum();
        Self { rows, values, total }
    }

    fn refresh_total(&mut self) {
        self.total = self.values.iter().sum();
    }
}

fn improvement_tol(scale: f64) -> f64 {
    1e-13 * scale.max(1e-300)
}

/// Descends from `start` until no move at any step size improves.
fn descend(mut sys: System, x: &[f64], q: &QMatrix) -> System {
    let l = sys.rows.len();
    let k = x.len();
    if l < 2 {
        return sys;
    }
    let tol = improvement_tol(sys.total);
    let mut step = INITIAL_STEP;
    let mut a_new = vec![0.0; k];
    let mut b_new = vec![0.0; k];
    for _ in 0..MAX_SWEEPS {
        let mut improved = false;
        for a in 0..l {
            for b in 0..l {
                if a == b || sys.values[a] == 0.0 && sys.rows[a].iter().all(|&v| v == 0.0) {
                    continue;
                }
                // single-block transfers: a partial step and the whole entry
                for j in 0..k {
                    let held = sys.rows[a][j];
                    if held <= 0.0 {
                        continue;
                    }
                    for delta in [held.min(step * x[j]), held] {
                        a_new.copy_from_slice(&sys.rows[a]);
                        b_new.copy_from_slice(&sys.rows[b]);
                        a_new[j] = if delta >= held { 0.0 } else { held - delta };
                        b_new[j] += delta;
                        let wa = corner_max(q, &a_new).0;
                        let wb = corner_max(q, &b_new).0;
                        if wa + wb < sys.values[a] + sys.values[b] - tol {
                            sys.rows[a].copy_from_slice(&a_new);
                            sys.rows[b].copy_from_slice(&b_new);
                            sys.values[a] = wa;
                            sys.values[b] = wb;
                            improved = true;
                            break;
                        }
                    }
                }
                // proportional transfer of a fraction of part a into part b
                if sys.values[a] > 0.0 || sys.rows[a].iter().any(|&v| v > 0.0) {
                    for frac in [step, 1.0] {
                        for j in 0..k {
                            let moved = sys.rows[a][j] * frac;
                            a_new[j] = if frac >= 1.0 { 0.0 } else { sys.rows[a][j] - moved };
                            b_new[j] = sys.rows[b][j] + moved;
                        }
                        let wa = corner_max(q, &a_new).0;
                        let wb = corner_max(q, &b_new).0;
                        if wa + wb < sys.values[a] + sys.values[b] - tol {
                            sys.rows[a].copy_from_slice(&a_new);
                            sys.rows[b].copy_from_slice(&b_new);
                            sys.values[a] = wa;
                            sys.values[b] = wb;
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
        if !improved {
            step *= COOLING;
            if step < MIN_STEP {
                break;
            }
        }
    }
    sys.refresh_total();
    sys
}

fn random_start(x: &[f64], l: usize, rng: &mut Rng, restart: usize) -> Vec<Vec<f64>> {
    let k = x.len();
    let mut rows = vec![vec![0.0; k]; l];
    if restart.is_multiple_of(2) {
        // whole blocks assigned to random parts
        for (j, &xj) in x.iter().enumerate() {
            rows[rng.random_range(0..l)][j] = xj;
        }
    } else {
        // each block split by exponential weights (flat Dirichlet)
        for j in 0..k {
            let w: Vec<f64> = (0..l).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = w.iter().sum();
            for t in 0..l {
                rows[t][j] = x[j] * w[t] / s;
            }
        }
    }
    rows
}

fn single_part(x: &[f64], l: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; x.len()]; l];
    rows[0].copy_from_slice(x);
    rows
}

fn pure_split(x: &[f64], l: usize) -> Vec<Vec<f64>> {
    let k = x.len();
    let mut rows = vec![vec![0.0; k]; l];
    for j in 0..k {
        rows[j % l][j] = x[j];
    }
    rows
}

fn pad(mut rows: Vec<Vec<f64>>, l: usize, k: usize) -> Vec<Vec<f64>> {
    rows.resize(l, vec![0.0; k]);
    rows
}

/// Best system of `l` parts reachable from the given warm start and from
/// `restarts` further starts. Restart `r` uses stream `mix(seed, r)`; ties go
/// to the lowest start index.
fn search_l(x: &[f64], q: &QMatrix, l: usize, warm: Option<Vec<Vec<f64>>>, restarts: usize, seed: u64) -> System {
    let k = x.len();
    let mut starts: Vec<Vec<Vec<f64>>> = Vec::new();
    if let Some(w) = warm {
        starts.push(pad(w, l, k));
    }
    starts.push(single_part(x, l));
    if l > 1 {
        starts.push(pure_split(x, l));
    }
    let fixed = starts.len();
    let randoms: Vec<Vec<Vec<f64>>> = (0..restarts)
        .map(|r| {
            let mut rng = rng_from_seed(mix(seed, r as u64));
            random_start(x, l, &mut rng, r)
        })
        .collect();
    starts.extend(randoms);
    debug_assert!(starts.len() >= fixed);

    let results: Vec<System> = starts.into_par_iter().map(|rows| descend(System::new(rows, q), x, q)).collect();
    results.into_iter().reduce(|best, s| if s.total < best.total { s } else { best }).expect("at least one start")
}

fn check_dims(x: &BlockVector, q: &QMatrix) -> Result<()> {
    if x.k() != q.k() {
        return Err(Error::DimensionMismatch { expected: q.k(), got: x.k() });
    }
    Ok(())
}

/// Heuristic values of `w_1, ..., w_max_l`.
///
/// Each level is warm-started from the previous level's best system, so the
/// sequence is nonincreasing. Level 1 is `w(x)` exactly.
pub fn w_ell_sequence(x: &BlockVector, q: &QMatrix, max_l: usize, restarts: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(ell_systems(x, q, max_l, restarts, seed)?.into_iter().map(|s| s.total).collect())
}

fn ell_systems(x: &BlockVector, q: &QMatrix, max_l: usize, restarts: usize, seed: u64) -> Result<Vec<System>> {
    check_dims(x, q)?;
    if max_l == 0 {
        return Err(Error::InvalidParameter("number of parts must be at least 1".into()));
    }
    let xs = x.values();
    let mut out: Vec<System> = Vec::with_capacity(max_l);
    let w1 = w_value(x, q)?.value;
    let mut first = System::new(vec![xs.to_vec()], q);
    first.values[0] = w1;
    first.total = w1;
    out.push(first);
    for l in 2..=max_l {
        let warm = out.last().map(|s| s.rows.clone());
        let mut s = search_l(xs, q, l, warm, restarts, mix(seed, l as u64));
        let prev = out.last().expect("nonempty");
        if s.total > prev.total {
            s = System { rows: pad(prev.rows.clone(), l, xs.len()), ..prev.clone() };
        }
        out.push(s);
    }
    Ok(out)
}

/// Heuristic `w_l(x)`: the best system of at most `l` parts found by local
/// search. Nonincreasing in `l`; equal to `w(x)` for `l = 1`. For `l >= k`
/// this is the `k`-part value, since `k` parts always suffice.
pub fn w_ell(x: &BlockVector, q: &QMatrix, ell: usize, seed: u64) -> Result<f64> {
    if ell == 0 {
        return Err(Error::InvalidParameter("ell must be at least 1".into()));
    }
    let l = ell.min(q.k().max(1));
    Ok(*w_ell_sequence(x, q, l, DEFAULT_RESTARTS, seed)?.last().expect("nonempty"))
}

/// Heuristic `w*(x)` over real systems of at most `k` parts.
///
/// Returns `w(x)` with the single-part system directly when `Q` is
/// pseudodefinite. Otherwise the result is `w_ell(x, Q, k)` for the same seed
/// and restart count, so it never exceeds `w(x)`.
pub fn w_star_solve(x: &BlockVector, q: &QMatrix, restarts: usize, seed: u64) -> Result<Decomposition> {
    check_dims(x, q)?;
    if x.is_zero() {
        return Ok(Decomposition { parts: Vec::new(), target: x.clone(), w_sum: 0.0 });
    }
    if is_pseudodefinite(q) {
        let w = w_value(x, q)?.value;
        return Ok(Decomposition { parts: vec![x.clone()], target: x.clone(), w_sum: w });
    }
    let k = q.k();
    let best = ell_systems(x, q, k, restarts, seed)?.pop().expect("nonempty");
    let mut d = Decomposition::from_rows(best.rows, x.clone(), q)?;
    d.w_sum = d.w_sum.min(best.total);
    Ok(d)
}

/// An integer system of at most `k` parts summing exactly to the integer
/// vector `x`.
///
/// The parts of a heuristic real optimum are floored, then each leftover unit
/// goes to the part whose `w` grows least. The pure per-block split and the
/// single part are kept as fallbacks; the cheapest of the three is returned.
pub fn near_optimal_integer_system(x: &BlockVector, q: &QMatrix, seed: u64) -> Result<Decomposition> {
    check_dims(x, q)?;
    let counts = x.counts().ok_or_else(|| {
        let index = x.values().iter().position(|v| v.fract() != 0.0).unwrap_or(0);
        Error::NotInteger { index, value: x.values()[index] }
    })?;
    let k = q.k();
    if x.is_zero() {
        return Ok(Decomposition { parts: Vec::new(), target: x.clone(), w_sum: 0.0 });
    }
    let real = w_star_solve(x, q, DEFAULT_RESTARTS, seed)?;

    let mut rows: Vec<Vec<f64>> = real.parts.iter().map(|p| p.values().iter().map(|v| v.floor()).collect()).collect();
    rows.resize(k, vec![0.0; k]);
    let mut values: Vec<f64> = rows.iter().map(|r| corner_max(q, r).0).collect();
    for j in 0..k {
        let placed: f64 = rows.iter().map(|r| r[j]).sum();
        let mut left = counts[j] as i64 - placed as i64;
        debug_assert!(left >= 0);
        while left > 0 {
            let mut best_t = 0;
            let mut best_inc = f64::INFINITY;
            let mut best_val = 0.0;
            for (t, row) in rows.iter_mut().enumerate() {
                row[j] += 1.0;
                let v = corner_max(q, row).0;
                row[j] -= 1.0;
                if v - values[t] < best_inc {
                    best_inc = v - values[t];
                    best_t = t;
                    best_val = v;
                }
            }
            rows[best_t][j] += 1.0;
            values[best_t] = best_val;
            left -= 1;
        }
    }
    let rounded = Decomposition::from_rows(rows, x.clone(), q)?;
    let pure = Decomposition::from_rows(pure_split(x.values(), k), x.clone(), q)?;
    let single = Decomposition::from_rows(vec![x.values().to_vec()], x.clone(), q)?;
    Ok([rounded, pure, single]
        .into_iter()
        .reduce(|best, d| if d.w_sum < best.w_sum { d } else { best })
        .expect("three candidates"))
}
