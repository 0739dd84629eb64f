//! Closed-form chromatic-number predictions.
//!
//! Block-model predictions divide a `w*` value by one of two logarithmic
//! normalisations: `2 (1 - sigma) ln ||n||` with a density exponent `sigma`,
//! or the finite-size form `2 ln(q* ||n||)`. Both are reported; the caller
//! picks the primary one.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::functionals::{w_star_bruteforce, w_star_solve, DEFAULT_RESTARTS};
use crate::graph::{bucket_of, BlowUpSpec, ChungLuKind};
use crate::model::{BlockVector, ModelInstance, QMatrix};

/// Upper end of the admissible density exponent range (exclusive).
pub const SIGMA_MAX: f64 = 0.25 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    SigmaForm,
    #[default]
    QstarForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Below,
    Middle,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub chi_predicted: f64,
    pub normalization: Normalization,
    pub sigma_used: f64,
    pub sigma_form: f64,
    /// `None` when `q* ||n|| <= 1`.
    pub qstar_form: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    pub inputs_echo: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoBlockThresholds {
    pub p_bar: f64,
    pub p_low: f64,
}

fn sigma_from(q_star: f64, norm: f64, hint: Option<f64>) -> Result<f64> {
    if let Some(s) = hint {
        return Ok(s);
    }
    if q_star <= 0.0 {
        return Err(Error::InvalidParameter("q* = 0: no within-block density".into()));
    }
    if norm < 2.0 {
        return Err(Error::InvalidParameter(format!("need ||n|| >= 2, got {norm}")));
    }
    Ok((-q_star.ln() / norm.ln()).clamp(0.0, SIGMA_MAX))
}

/// `clamp(-ln q* / ln ||n||, 0, 1/4)`, or the model's sigma hint.
pub fn sigma_estimate(m: &ModelInstance) -> Result<f64> {
    sigma_from(m.q.q_star(), m.n_total() as f64, m.sigma_hint)
}

/// Both normalisations of a `w*` value.
fn normalise(
    wstar: f64,
    q_star: f64,
    norm: f64,
    sigma: f64,
    normalization: Normalization,
    echo: Value,
) -> Result<Prediction> {
    if !(wstar >= 0.0 && wstar.is_finite()) {
        return Err(Error::InvalidParameter(format!("w* must be finite and nonnegative, got {wstar}")));
    }
    if norm < 2.0 {
        return Err(Error::InvalidParameter(format!("need ||n|| >= 2, got {norm}")));
    }
    let sigma_form = wstar / (2.0 * (1.0 - sigma) * norm.ln());
    let log_qn = (q_star * norm).ln();
    let qstar_form = (log_qn > 0.0).then(|| wstar / (2.0 * log_qn));
    let chi_predicted = match normalization {
        Normalization::SigmaForm => sigma_form,
        Normalization::QstarForm => qstar_form.ok_or_else(|| {
            Error::InvalidParameter(format!("q* ||n|| = {} <= 1: nonpositive denominator", q_star * norm))
        })?,
    };
    Ok(Prediction {
        chi_predicted,
        normalization,
        sigma_used: sigma,
        sigma_form,
        qstar_form,
        regime: None,
        inputs_echo: echo,
    })
}

/// `n ln(1/(1-p)) / (2 ln(pn))`.
pub fn predict_gnp(n: usize, p: f64) -> Result<Prediction> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    let nf = n as f64;
    if p * nf <= 1.0 {
        return Err(Error::InvalidParameter(format!("need p n > 1, got {}", p * nf)));
    }
    let q = -(-p).ln_1p();
    // (1 - sigma) ln n = ln(pn)
    let sigma = -p.ln() / nf.ln();
    let mut pred = normalise(nf * q, q, nf, sigma, Normalization::SigmaForm, json!({ "n": n, "p": p }))?;
    pred.chi_predicted = nf * q / (2.0 * (p * nf).ln());
    pred.sigma_form = pred.chi_predicted;
    Ok(pred)
}

/// Block-model prediction from a supplied `w*(n, Q)`.
///
/// A zero `w*` predicts zero colours even when `sigma` is undefined.
pub fn predict_sbm(m: &ModelInstance, wstar: f64, normalization: Normalization) -> Result<Prediction> {
    let echo = json!({ "sizes": m.block_sizes(), "P": m.probs.rows(), "wstar": wstar });
    let norm = m.n_total() as f64;
    if wstar == 0.0 {
        return Ok(Prediction {
            chi_predicted: 0.0,
            normalization,
            sigma_used: m.sigma_hint.unwrap_or(0.0),
            sigma_form: 0.0,
            qstar_form: Some(0.0),
            regime: None,
            inputs_echo: echo,
        });
    }
    let sigma = sigma_estimate(m)?;
    normalise(wstar, m.q.q_star(), norm, sigma, normalization, echo)
}

fn q_of(p: f64) -> f64 {
    -(-p).ln_1p()
}

fn check_open(p: f64, name: &str) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// `max(q11/2 - n2 q22/(2 n1), q22/2 - n1 q11/(2 n2))`, the lower threshold
/// in q-space. An empty block drops its term.
fn q_low(n1: usize, n2: usize, q11: f64, q22: f64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let mut best = f64::NEG_INFINITY;
    if n1 > 0 {
        best = best.max(q11 / 2.0 - b * q22 / (2.0 * a));
    }
    if n2 > 0 {
        best = best.max(q22 / 2.0 - a * q11 / (2.0 * b));
    }
    best
}

/// Thresholds `p_bar = 1 - sqrt((1-p11)(1-p22))` and `p_low` (at least 0).
pub fn two_block_thresholds(n1: usize, n2: usize, p11: f64, p22: f64) -> Result<TwoBlockThresholds> {
    check_open(p11, "p11")?;
    check_open(p22, "p22")?;
    if n1 == 0 && n2 == 0 {
        return Err(Error::InvalidParameter("both blocks are empty".into()));
    }
    let (q11, q22) = (q_of(p11), q_of(p22));
    let p_bar = -(-(q11 + q22) / 2.0).exp_m1();
    let p_low = -(-q_low(n1, n2, q11, q22).max(0.0)).exp_m1();
    Ok(TwoBlockThresholds { p_bar, p_low: p_low.min(p_bar) })
}

/// Regime of `p12`, compared in q-space; both boundaries belong to the middle.
pub fn two_block_regime(n1: usize, n2: usize, p11: f64, p22: f64, p12: f64) -> Result<Regime> {
    two_block_thresholds(n1, n2, p11, p22)?;
    if !(0.0..1.0).contains(&p12) {
        return Err(Error::InvalidParameter(format!("p12 must lie in [0, 1), got {p12}")));
    }
    let (q11, q22, q12) = (q_of(p11), q_of(p22), q_of(p12));
    let tol = 1e-12 * q11.max(q22).max(1.0);
    let upper = (q11 + q22) / 2.0;
    let lower = q_low(n1, n2, q11, q22);
    Ok(if q12 > upper + tol {
        Regime::Above
    } else if q12 < lower - tol {
        Regime::Below
    } else {
        Regime::Middle
    })
}

/// Two-block prediction with the case formula for `w*` selected by the regime
/// of `p12`.
pub fn predict_two_block(
    n1: usize,
    n2: usize,
    p11: f64,
    p22: f64,
    p12: f64,
    normalization: Normalization,
) -> Result<Prediction> {
    let regime = two_block_regime(n1, n2, p11, p22, p12)?;
    let (a, b) = (n1 as f64, n2 as f64);
    let (q11, q22, q12) = (q_of(p11), q_of(p22), q_of(p12));
    let wstar = match regime {
        Regime::Middle => (a * a * q11 + 2.0 * a * b * q12 + b * b * q22) / (a + b),
        Regime::Above => a * q11 + b * q22,
        Regime::Below => (a * q11).max(b * q22),
    };
    let norm = a + b;
    let q_star = q11.max(q22);
    let sigma = sigma_from(q_star, norm, None)?;
    let echo = json!({ "n1": n1, "n2": n2, "p11": p11, "p22": p22, "p12": p12, "wstar": wstar });
    let mut pred = normalise(wstar, q_star, norm, sigma, normalization, echo)?;
    pred.regime = Some(regime);
    Ok(pred)
}

/// `w*(n, I + A_H)`: the integer oracle when it fits its work guard, the
/// heuristic otherwise.
pub fn blow_up_wstar(spec: &BlowUpSpec) -> Result<f64> {
    let rows: Vec<Vec<f64>> = spec.q_tilde().iter().map(|r| r.iter().map(|&e| e as f64).collect()).collect();
    let q = QMatrix::new(&rows)?;
    let x = BlockVector::from_counts(&spec.sizes);
    match w_star_bruteforce(&x, &q) {
        Ok(d) => Ok(d.w_sum),
        Err(Error::TooLarge(_)) => Ok(w_star_solve(&x, &q, DEFAULT_RESTARTS, 0)?.w_sum),
        Err(e) => Err(e),
    }
}

/// `ln(1/(1-p)) / (2 ln(p ||n||)) * w*(n, I + A_H)`.
pub fn predict_percolation(spec: &BlowUpSpec, p: f64) -> Result<Prediction> {
    check_open(p, "p")?;
    let norm: f64 = spec.sizes.iter().sum::<usize>() as f64;
    if p * norm <= 1.0 {
        return Err(Error::InvalidParameter(format!("need p ||n|| > 1, got {}", p * norm)));
    }
    let chi_g = blow_up_wstar(spec)?;
    let q = q_of(p);
    let chi = q / (2.0 * (p * norm).ln()) * chi_g;
    let sigma = -p.ln() / norm.ln();
    Ok(Prediction {
        chi_predicted: chi,
        normalization: Normalization::SigmaForm,
        sigma_used: sigma,
        sigma_form: chi,
        qstar_form: ((q * norm).ln() > 0.0).then(|| q * chi_g / (2.0 * (q * norm).ln())),
        regime: None,
        inputs_echo: json!({ "sizes": spec.sizes, "h_adjacency": spec.h_adjacency, "p": p, "chi_g": chi_g }),
    })
}

/// `max over U of (sum_{i in U} u_i)^2 / |U|`, scanning prefixes of `u`
/// sorted in decreasing order. 0 for an empty vector.
pub fn chung_lu_prefix_max(u: &[f64]) -> f64 {
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut sum = 0.0;
    let mut best = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        sum += v;
        best = best.max(sum * sum / (i + 1) as f64);
    }
    best
}

fn chung_lu_value(u: &[f64], p: f64, kind: ChungLuKind) -> f64 {
    let ln_pn = (p * u.len() as f64).ln();
    match kind {
        ChungLuKind::Times => p / (2.0 * ln_pn) * chung_lu_prefix_max(u),
        ChungLuKind::Plus => p / ln_pn * u.iter().sum::<f64>(),
    }
}

fn check_chung_lu(u: &[f64], p: f64, kind: ChungLuKind) -> Result<()> {
    check_open(p, "p")?;
    if kind == ChungLuKind::Plus && p > 0.5 {
        return Err(Error::InvalidParameter(format!("plus kernel needs p <= 1/2, got {p}")));
    }
    if let Some(i) = u.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter(format!("weight u[{i}] = {} outside [0, 1]", u[i])));
    }
    if p * u.len() as f64 <= 1.0 {
        return Err(Error::InvalidParameter(format!("need p n > 1, got {}", p * u.len() as f64)));
    }
    Ok(())
}

/// Chung-Lu prediction for the `times` or `plus` kernel.
pub fn predict_chung_lu(u: &[f64], p: f64, kind: ChungLuKind) -> Result<Prediction> {
    check_chung_lu(u, p, kind)?;
    if u.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParameter("weights sum to zero".into()));
    }
    let chi = chung_lu_value(u, p, kind);
    let n = u.len() as f64;
    Ok(Prediction {
        chi_predicted: chi,
        normalization: Normalization::SigmaForm,
        sigma_used: -p.ln() / n.ln(),
        sigma_form: chi,
        qstar_form: None,
        regime: None,
        inputs_echo: json!({ "n": u.len(), "p": p, "kind": kind }),
    })
}

/// The Chung-Lu prediction evaluated on weights rounded down and up to the
/// cell endpoints used by the bucketed models; brackets [`predict_chung_lu`].
pub fn predict_chung_lu_bucketed(u: &[f64], p: f64, kind: ChungLuKind, buckets: usize) -> Result<(f64, f64)> {
    check_chung_lu(u, p, kind)?;
    if buckets == 0 {
        return Err(Error::InvalidParameter("buckets must be at least 1".into()));
    }
    let b = buckets as f64;
    let lower: Vec<f64> = u.iter().map(|&v| (bucket_of(v, buckets) - 1) as f64 / b).collect();
    let upper: Vec<f64> = u.iter().map(|&v| bucket_of(v, buckets) as f64 / b).collect();
    Ok((chung_lu_value(&lower, p, kind), chung_lu_value(&upper, p, kind)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProbMatrix;
    use std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sigma_examples() {
        let one = ModelInstance::new(&[10], ProbMatrix::uniform(1, 1.0 - (-1.0f64).exp()).unwrap()).unwrap();
        assert!(close(sigma_estimate(&one).unwrap(), 0.0, 1e-12));
        let q = 10000f64.powf(-0.2);
        let m = ModelInstance::new(&[10000], ProbMatrix::uniform(1, -(-q).exp_m1()).unwrap()).unwrap();
        assert!(close(sigma_estimate(&m).unwrap(), 0.2, 1e-12));
        let dense = ModelInstance::new(&[10], ProbMatrix::uniform(1, 0.9).unwrap()).unwrap();
        assert_eq!(sigma_estimate(&dense).unwrap(), 0.0);
        let hinted = m.clone().with_sigma_hint(0.1).unwrap();
        assert_eq!(sigma_estimate(&hinted).unwrap(), 0.1);
        let empty = ModelInstance::new(&[10], ProbMatrix::uniform(1, 0.0).unwrap()).unwrap();
        assert!(sigma_estimate(&empty).is_err());
    }

    #[test]
    fn gnp_examples() {
        let p = predict_gnp(1000, 0.5).unwrap();
        assert!(close(p.chi_predicted, 1000.0 * LN_2 / (2.0 * 500f64.ln()), 1e-9));
        assert!(close(p.chi_predicted, 55.77, 0.01));
        let p = predict_gnp(1000, 1.0 - (-1.0f64).exp()).unwrap();
        assert!(close(p.chi_predicted, 77.53, 0.01));
        assert!(predict_gnp(10, 0.1).is_err());
        assert!(predict_gnp(10, 0.0).is_err());
        assert!(close(predict_gnp(60, 0.5).unwrap().chi_predicted, 6.11, 0.01));
    }

    #[test]
    fn sbm_examples() {
        let m =
            ModelInstance::new(&[1000], ProbMatrix::uniform(1, 0.5).unwrap()).unwrap().with_sigma_hint(0.0).unwrap();
        let w = 1000.0 * LN_2;
        let p = predict_sbm(&m, w, Normalization::SigmaForm).unwrap();
        assert!(close(p.chi_predicted, 50.17, 0.01));
        assert!(close(p.qstar_form.unwrap(), 52.98, 0.01));
        let p = predict_sbm(&m, 0.0, Normalization::QstarForm).unwrap();
        assert_eq!(p.chi_predicted, 0.0);

        // sigma chosen so (1 - sigma) ln n = ln(pn) reproduces the G(n,p) formula
        let sigma = -(0.5f64).ln() / 1000f64.ln();
        let m = m.with_sigma_hint(sigma).unwrap();
        let p = predict_sbm(&m, w, Normalization::SigmaForm).unwrap();
        assert!(close(p.chi_predicted, predict_gnp(1000, 0.5).unwrap().chi_predicted, 1e-9));
    }

    #[test]
    fn threshold_examples() {
        let t = two_block_thresholds(5, 5, 0.3, 0.3).unwrap();
        assert!(close(t.p_bar, 0.3, 1e-12));
        assert_eq!(t.p_low, 0.0);
        for (i, p11) in (1..10).map(|i| i as f64 / 10.0).enumerate() {
            for p22 in (1..10).map(|i| i as f64 / 10.0) {
                for n2 in 1..10 {
                    let t = two_block_thresholds(1 + i, n2, p11, p22).unwrap();
                    assert!(0.0 <= t.p_low && t.p_low <= t.p_bar && t.p_bar <= 1.0);
                }
            }
        }
    }

    #[test]
    fn two_block_cases() {
        let (n1, n2, p11, p22) = (40, 60, 0.5, 0.3);
        let t = two_block_thresholds(n1, n2, p11, p22).unwrap();
        let at_bar = predict_two_block(n1, n2, p11, p22, t.p_bar, Normalization::SigmaForm).unwrap();
        assert_eq!(at_bar.regime, Some(Regime::Middle));
        let above = predict_two_block(n1, n2, p11, p22, t.p_bar + 1e-9, Normalization::SigmaForm).unwrap();
        assert_eq!(above.regime, Some(Regime::Above));
        assert!(close(at_bar.chi_predicted, above.chi_predicted, 1e-6));
        let below = predict_two_block(n1, n2, p11, p22, 0.0, Normalization::SigmaForm);
        // p_low here is positive, so p12 = 0 is below it
        assert!(t.p_low > 0.0);
        assert_eq!(below.unwrap().regime, Some(Regime::Below));
        let low_edge = predict_two_block(n1, n2, p11, p22, t.p_low, Normalization::SigmaForm).unwrap();
        assert_eq!(low_edge.regime, Some(Regime::Middle));

        let degenerate = predict_two_block(50, 0, 0.5, 0.5, 0.2, Normalization::SigmaForm).unwrap();
        let gnp = predict_gnp(50, 0.5).unwrap();
        assert!(close(degenerate.inputs_echo["wstar"].as_f64().unwrap(), 50.0 * LN_2, 1e-9));
        assert!(degenerate.chi_predicted > 0.0 && gnp.chi_predicted > 0.0);
    }

    #[test]
    fn percolation_examples() {
        let k1 = BlowUpSpec::from_edges(1, &[], vec![80]).unwrap();
        let a = predict_percolation(&k1, 0.3).unwrap();
        assert!(close(a.chi_predicted, predict_gnp(80, 0.3).unwrap().chi_predicted, 1e-9));
        let k2 = BlowUpSpec::from_edges(2, &[(0, 1)], vec![2, 3]).unwrap();
        assert!(close(blow_up_wstar(&k2).unwrap(), 5.0, 1e-12));
        let empty = BlowUpSpec::from_edges(2, &[], vec![2, 3]).unwrap();
        assert!(close(blow_up_wstar(&empty).unwrap(), 3.0, 1e-12));
        assert!(predict_percolation(&k2, 0.1).is_err());
    }

    #[test]
    fn chung_lu_examples() {
        let ones = vec![1.0; 100];
        let p = predict_chung_lu(&ones, 0.1, ChungLuKind::Times).unwrap();
        assert!(close(p.chi_predicted, 0.1 / (2.0 * 10f64.ln()) * 100.0, 1e-9));
        let halves = vec![0.5; 100];
        let p = predict_chung_lu(&halves, 0.1, ChungLuKind::Plus).unwrap();
        assert!(close(p.chi_predicted, 0.1 / 10f64.ln() * 50.0, 1e-9));
        assert!(predict_chung_lu(&[0.0; 100], 0.1, ChungLuKind::Times).is_err());
        assert!(predict_chung_lu(&halves, 0.6, ChungLuKind::Plus).is_err());

        let mut u = vec![0.1; 11];
        u.insert(0, 1.0);
        let brute = (1u32..1 << u.len())
            .map(|mask| {
                let s: f64 = (0..u.len()).filter(|i| mask >> i & 1 == 1).map(|i| u[i]).sum();
                s * s / mask.count_ones() as f64
            })
            .fold(0.0, f64::max);
        assert!(close(chung_lu_prefix_max(&u), brute, 1e-12));
    }

    #[test]
    fn bucketed_bracket_narrows() {
        let u: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let exact = predict_chung_lu(&u, 0.2, ChungLuKind::Times).unwrap().chi_predicted;
        let mut width = f64::INFINITY;
        for b in [2, 4, 8, 16] {
            let (lo, hi) = predict_chung_lu_bucketed(&u, 0.2, ChungLuKind::Times, b).unwrap();
            assert!(lo <= exact + 1e-12 && exact <= hi + 1e-12);
            assert!(hi - lo <= width);
            width = hi - lo;
        }
    }
}
