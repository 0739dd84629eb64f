//! Block model parameters: probability matrices, their log transform, and
//! block vectors.
//!
//! `Q` is always derived from `P` through `q_ij = -ln(1 - p_ij)`; it is never
//! read from or written to disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric `k x k` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
struct SymMatrix {
    k: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::BadShape { k });
        }
        let mut data = Vec::with_capacity(k * k);
        for row in rows {
            if row.len() != k {
                return Err(Error::BadShape { k });
            }
            data.extend_from_slice(row);
        }
        for i in 0..k {
            for j in (i + 1)..k {
                if data[i * k + j] != data[j * k + i] {
                    return Err(Error::Asymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { k, data })
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.k).map(|r| r.to_vec()).collect()
    }
}

/// Edge probability matrix `P`. Entries lie in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(SymMatrix);

impl ProbMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let m = SymMatrix::from_rows(rows)?;
        for i in 0..m.k {
            for j in 0..m.k {
                let p = m.get(i, j);
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::InvalidProbability { row: i, col: j, value: p });
                }
            }
        }
        Ok(Self(m))
    }

    /// Every entry equal to `p`.
    pub fn uniform(k: usize, p: f64) -> Result<Self> {
        Self::new(&vec![vec![p; k]; k])
    }

    /// Inverse of [`build_q`]: `p_ij = 1 - exp(-q_ij)`.
    pub fn from_q(q: &QMatrix) -> Result<Self> {
        let rows: Vec<Vec<f64>> =
            q.rows().into_iter().map(|r| r.into_iter().map(|v| -(-v).exp_m1()).collect()).collect();
        Self::new(&rows)
    }

    pub fn k(&self) -> usize {
        self.0.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows()
    }
}

/// `Q = (ln(1/(1 - p_ij)))`. Symmetric, finite, nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix(SymMatrix);

impl QMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let m = SymMatrix::from_rows(rows)?;
        for i in 0..m.k {
            for j in 0..m.k {
                let q = m.get(i, j);
                if !q.is_finite() || q < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "Q entry ({i}, {j}) = {q} is not a finite nonnegative number"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        Self(SymMatrix { k, data })
    }

    pub fn k(&self) -> usize {
        self.0.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows()
    }

    /// Largest diagonal entry.
    pub fn q_star(&self) -> f64 {
        (0..self.k()).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }

    /// Largest entry overall.
    pub fn q_max(&self) -> f64 {
        self.0.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.k()).map(|i| self.get(i, i)).sum()
    }

    /// Norm-weighted mean of the diagonal, `sum_i x_i q_ii / ||x||`.
    ///
    /// Falls back to `q_star` for the zero vector.
    pub fn q_hat(&self, x: &BlockVector) -> f64 {
        debug_assert_eq!(x.k(), self.k());
        if x.norm() <= 0.0 {
            return self.q_star();
        }
        let s: f64 = x.values().iter().enumerate().map(|(i, v)| v * self.get(i, i)).sum();
        s / x.norm()
    }

    /// `y^T Q y`.
    pub fn quadratic_form(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.k());
        let k = self.k();
        let mut total = 0.0;
        for i in 0..k {
            if y[i] == 0.0 {
                continue;
            }
            let row = &self.0.data[i * k..(i + 1) * k];
            let dot: f64 = row.iter().zip(y).map(|(q, v)| q * v).sum();
            total += y[i] * dot;
        }
        total
    }

    /// `y^T Q y / ||y||`, zero at the origin.
    pub fn ratio(&self, y: &[f64]) -> f64 {
        let norm: f64 = y.iter().sum();
        if norm <= 0.0 {
            0.0
        } else {
            self.quadratic_form(y) / norm
        }
    }

    /// Entrywise sum; the Q matrix of a union of independent graphs.
    pub fn add(&self, other: &QMatrix) -> Result<QMatrix> {
        if self.k() != other.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), got: other.k() });
        }
        let data = self.0.data.iter().zip(&other.0.data).map(|(a, b)| a + b).collect();
        Ok(Self(SymMatrix { k: self.k(), data }))
    }
}

/// Entrywise `q_ij = -ln(1 - p_ij)`.
pub fn build_q(p: &ProbMatrix) -> QMatrix {
    let data = p.0.data.iter().map(|&v| -(-v).ln_1p()).collect();
    QMatrix(SymMatrix { k: p.k(), data })
}

/// A nonnegative `k`-vector with its cached 1-norm.
///
/// Used both for block sizes (integer flagged) and for relaxed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    values: Vec<f64>,
    norm: f64,
    integer: bool,
}

impl BlockVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativeComponent { index, value });
            }
        }
        let integer = values.iter().all(|v| v.fract() == 0.0);
        let norm = values.iter().sum();
        Ok(Self { values, norm, integer })
    }

    /// Integer-flagged vector, rejecting fractional components.
    pub fn integer(values: Vec<f64>) -> Result<Self> {
        let v = Self::new(values)?;
        if let Some(index) = v.values.iter().position(|x| x.fract() != 0.0) {
            return Err(Error::NotInteger { index, value: v.values[index] });
        }
        Ok(v)
    }

    pub fn from_counts(counts: &[usize]) -> Self {
        let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let norm = values.iter().sum();
        Self { values, norm, integer: true }
    }

    pub fn zeros(k: usize) -> Self {
        Self { values: vec![0.0; k], norm: 0.0, integer: true }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_integer(&self) -> bool {
        self.integer
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    /// Components as counts, when integer flagged.
    pub fn counts(&self) -> Option<Vec<usize>> {
        self.integer.then(|| self.values.iter().map(|&v| v as usize).collect())
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * s).collect())
    }

    pub fn sum(&self, other: &BlockVector) -> Result<Self> {
        if self.k() != other.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), got: other.k() });
        }
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect())
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &BlockVector) -> bool {
        self.k() == other.k() && self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }
}

/// Block sizes, probabilities, the derived `Q`, and an optional density
/// exponent `sigma` in `[0, 1/4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance {
    pub sizes: BlockVector,
    pub probs: ProbMatrix,
    pub q: QMatrix,
    pub sigma_hint: Option<f64>,
}

impl ModelInstance {
    pub fn new(sizes: &[usize], probs: ProbMatrix) -> Result<Self> {
        if sizes.len() != probs.k() {
            return Err(Error::DimensionMismatch { expected: probs.k(), got: sizes.len() });
        }
        let q = build_q(&probs);
        Ok(Self { sizes: BlockVector::from_counts(sizes), probs, q, sigma_hint: None })
    }

    pub fn with_sigma_hint(mut self, sigma: f64) -> Result<Self> {
        if !(0.0..0.25).contains(&sigma) {
            return Err(Error::InvalidParameter(format!("sigma_hint {sigma} outside [0, 1/4)")));
        }
        self.sigma_hint = Some(sigma);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.probs.k()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.sizes.counts().expect("model block sizes are integer")
    }

    pub fn n_total(&self) -> usize {
        self.block_sizes().iter().sum()
    }

    /// Block index of every vertex, blocks laid out contiguously.
    pub fn block_map(&self) -> Vec<usize> {
        self.block_sizes().iter().enumerate().flat_map(|(b, &n)| std::iter::repeat_n(b, n)).collect()
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile { k: self.k(), sizes: self.block_sizes(), p: self.probs.rows(), sigma_hint: self.sigma_hint }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// On-disk model: `{"k": .., "sizes": [..], "P": [[..]..]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub k: usize,
    pub sizes: Vec<usize>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hint: Option<f64>,
}

impl ModelFile {
    pub fn into_model(self) -> Result<ModelInstance> {
        if self.sizes.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: self.sizes.len() });
        }
        if self.p.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, got: self.p.len() });
        }
        let m = ModelInstance::new(&self.sizes, ProbMatrix::new(&self.p)?)?;
        match self.sigma_hint {
            Some(s) => m.with_sigma_hint(s),
            None => Ok(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(rows: &[&[f64]]) -> QMatrix {
        QMatrix::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn build_q_examples() {
        assert_eq!(build_q(&ProbMatrix::new(&[vec![0.0]]).unwrap()).get(0, 0), 0.0);
        let half = build_q(&ProbMatrix::new(&[vec![0.5]]).unwrap());
        assert!((half.get(0, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        let e = std::f64::consts::E;
        let p = ProbMatrix::new(&[vec![1.0 - 1.0 / e, 0.0], vec![0.0, 1.0 - 1.0 / (e * e)]]).unwrap();
        let qm = build_q(&p);
        assert!((qm.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((qm.get(1, 1) - 2.0).abs() < 1e-14);
        assert_eq!(qm.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(matches!(ProbMatrix::new(&[vec![1.0]]), Err(Error::InvalidProbability { .. })));
        assert!(ProbMatrix::new(&[vec![-0.1]]).is_err());
        assert!(matches!(ProbMatrix::new(&[vec![0.1, 0.2], vec![0.3, 0.1]]), Err(Error::Asymmetric { .. })));
        assert!(ProbMatrix::new(&[vec![0.1, 0.2]]).is_err());
    }

    #[test]
    fn q_star_and_q_hat() {
        assert_eq!(q(&[&[1.0, 3.0], &[3.0, 1.0]]).q_star(), 1.0);
        assert_eq!(q(&[&[0.0]]).q_star(), 0.0);
        let d = q(&[&[1.0, 0.0], &[0.0, 2.0]]);
        assert_eq!(d.q_star(), 2.0);
        assert_eq!(d.q_hat(&BlockVector::new(vec![1.0, 1.0]).unwrap()), 1.5);
        assert_eq!(d.q_hat(&BlockVector::zeros(2)), 2.0);
        assert_eq!(d.q_hat(&BlockVector::new(vec![3.0, 1.0]).unwrap()), 1.25);
    }

    #[test]
    fn quadratic_form_examples() {
        assert_eq!(q(&[&[1.0, 3.0], &[3.0, 1.0]]).quadratic_form(&[1.0, 1.0]), 8.0);
        assert_eq!(q(&[&[1.0, 3.0], &[3.0, 1.0]]).quadratic_form(&[0.0, 0.0]), 0.0);
        assert_eq!(q(&[&[1.0, 1.0], &[1.0, 1.0]]).quadratic_form(&[2.0, 3.0]), 25.0);
    }

    #[test]
    fn block_vector_validation() {
        assert!(BlockVector::new(vec![1.0, -1.0]).is_err());
        assert!(BlockVector::new(vec![f64::NAN]).is_err());
        assert!(BlockVector::integer(vec![1.5]).is_err());
        let v = BlockVector::new(vec![1.0, 2.5]).unwrap();
        assert!(!v.is_integer());
        assert_eq!(v.norm(), 3.5);
        assert_eq!(BlockVector::from_counts(&[2, 3]).counts(), Some(vec![2, 3]));
    }

    #[test]
    fn model_file_roundtrip() {
        let text = r#"{"k": 2, "sizes": [3, 4], "P": [[0.5, 0.1], [0.1, 0.2]]}"#;
        let file: ModelFile = serde_json::from_str(text).unwrap();
        let m = file.clone().into_model().unwrap();
        assert_eq!(m.block_map(), vec![0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(m.to_file(), file);
        let bad = r#"{"k": 2, "sizes": [3], "P": [[0.5, 0.1], [0.1, 0.2]]}"#;
        let file: ModelFile = serde_json::from_str(bad).unwrap();
        assert!(file.into_model().is_err());
    }

    #[test]
    fn sigma_hint_range() {
        let m = ModelInstance::new(&[4], ProbMatrix::uniform(1, 0.5).unwrap()).unwrap();
        assert!(m.clone().with_sigma_hint(0.25).is_err());
        assert_eq!(m.with_sigma_hint(0.1).unwrap().sigma_hint, Some(0.1));
    }
}
