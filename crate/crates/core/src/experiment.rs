//! Seeded Monte Carlo driver: sample graphs over a grid of model points,
//! measure chromatic numbers, weighted independence numbers and edge counts,
//! and compare them with the closed-form predictions.
//!
//! The config schema is documented in `docs/experiment-config.md`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chromatic::{
    alpha_h, balanced_extraction_colouring, dsatur_colouring, exact_colouring, AlphaMode, ColouringMethod,
    DEFAULT_BUDGET, DEFAULT_EPSILON, EXACT_ALPHA_MAX_N,
};
use crate::error::{Error, Result};
use crate::functionals::{w_star_solve, DEFAULT_RESTARTS};
use crate::graph::{
    blow_up, blow_up_as_model, percolate, sample_chung_lu, sample_sbm, union_graphs, BlowUpSpec, ChungLuKind, SbmGraph,
};
use crate::model::{BlockVector, ModelInstance, ProbMatrix};
use crate::predictions::{
    predict_chung_lu, predict_gnp, predict_percolation, predict_sbm, predict_two_block, sigma_estimate, Normalization,
    Prediction,
};
use crate::rng::{grid_index, mix};

/// First line of every report file.
pub const REPORT_HEADER: &str = "# sbmchi-report v1";

/// Default largest vertex count for which the exact colouring may be requested.
pub const DEFAULT_EXACT_MAX_N: usize = 100;

/// One model constructor with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Sbm {
        sizes: Vec<usize>,
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_hint: Option<f64>,
    },
    Gnp {
        n: usize,
        p: f64,
    },
    TwoBlock {
        n1: usize,
        n2: usize,
        p11: f64,
        p22: f64,
        p12: f64,
    },
    Blowup {
        sizes: Vec<usize>,
        #[serde(default)]
        h_edges: Vec<(usize, usize)>,
    },
    Percolate {
        sizes: Vec<usize>,
        #[serde(default)]
        h_edges: Vec<(usize, usize)>,
        p: f64,
    },
    ChungluTimes {
        #[serde(flatten)]
        weights: Weights,
        p: f64,
    },
    ChungluPlus {
        #[serde(flatten)]
        weights: Weights,
        p: f64,
    },
    /// Edge union of two independent samples over the same blocks.
    Union {
        first: Box<ModelSpec>,
        second: Box<ModelSpec>,
    },
}

/// Chung-Lu weights, listed or generated as `u_i = ((i + 1) / n)^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    List { u: Vec<f64> },
    Power { n: usize, exponent: f64 },
}

impl Weights {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Weights::List { u } => u.clone(),
            Weights::Power { n, exponent } => (0..*n).map(|i| ((i + 1) as f64 / *n as f64).powf(*exponent)).collect(),
        }
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Sbm { .. } => "sbm",
            ModelSpec::Gnp { .. } => "gnp",
            ModelSpec::TwoBlock { .. } => "two-block",
            ModelSpec::Blowup { .. } => "blowup",
            ModelSpec::Percolate { .. } => "percolate",
            ModelSpec::ChungluTimes { .. } => "chunglu-times",
            ModelSpec::ChungluPlus { .. } => "chunglu-plus",
            ModelSpec::Union { .. } => "union",
        }
    }

    /// The block model behind the spec, when it is one (`sbm`, `gnp`,
    /// `two-block`, and unions of those).
    pub fn block_model(&self) -> Result<Option<ModelInstance>> {
        Ok(match self {
            ModelSpec::Sbm { sizes, p, sigma_hint } => {
                let m = ModelInstance::new(sizes, ProbMatrix::new(p)?)?;
                Some(match sigma_hint {
                    Some(s) => m.with_sigma_hint(*s)?,
                    None => m,
                })
            }
            ModelSpec::Gnp { n, p } => Some(ModelInstance::new(&[*n], ProbMatrix::uniform(1, *p)?)?),
            ModelSpec::TwoBlock { n1, n2, p11, p22, p12 } => {
                Some(ModelInstance::new(&[*n1, *n2], ProbMatrix::new(&[vec![*p11, *p12], vec![*p12, *p22]])?)?)
            }
            ModelSpec::Union { first, second } => {
                let (Some(a), Some(b)) = (first.block_model()?, second.block_model()?) else {
                    return Ok(None);
                };
                if a.block_sizes() != b.block_sizes() {
                    return Err(Error::StructureMismatch("union parts have different block sizes".into()));
                }
                // independent unions add in q-space
                Some(ModelInstance::new(&a.block_sizes(), ProbMatrix::from_q(&a.q.add(&b.q)?)?)?)
            }
            _ => None,
        })
    }

    fn blow_up_spec(sizes: &[usize], h_edges: &[(usize, usize)]) -> Result<BlowUpSpec> {
        BlowUpSpec::from_edges(sizes.len(), h_edges, sizes.to_vec())
    }

    /// Draws one graph.
    pub fn sample(&self, seed: u64) -> Result<SbmGraph> {
        match self {
            ModelSpec::Sbm { .. } | ModelSpec::Gnp { .. } | ModelSpec::TwoBlock { .. } => {
                Ok(sample_sbm(&self.block_model()?.expect("block model"), seed))
            }
            ModelSpec::Blowup { sizes, h_edges } => Ok(blow_up(&Self::blow_up_spec(sizes, h_edges)?)),
            ModelSpec::Percolate { sizes, h_edges, p } => {
                percolate(&blow_up(&Self::blow_up_spec(sizes, h_edges)?), *p, seed)
            }
            ModelSpec::ChungluTimes { weights, p } => {
                sample_chung_lu(&weights.values(), *p, ChungLuKind::Times, seed, None)
            }
            ModelSpec::ChungluPlus { weights, p } => {
                sample_chung_lu(&weights.values(), *p, ChungLuKind::Plus, seed, None)
            }
            ModelSpec::Union { first, second } => {
                union_graphs(&first.sample(mix(seed, 1))?, &second.sample(mix(seed, 2))?)
            }
        }
    }

    /// Vertex-level model used for `alpha_h` and the extraction colouring.
    fn probability_model(&self) -> Result<Option<ModelInstance>> {
        if let Some(m) = self.block_model()? {
            return Ok(Some(m));
        }
        Ok(match self {
            ModelSpec::Percolate { sizes, h_edges, p } => {
                Some(blow_up_as_model(&Self::blow_up_spec(sizes, h_edges)?, *p)?)
            }
            ModelSpec::ChungluTimes { weights, p } => {
                Some(chung_lu_vertex_model(&weights.values(), *p, ChungLuKind::Times)?)
            }
            ModelSpec::ChungluPlus { weights, p } => {
                Some(chung_lu_vertex_model(&weights.values(), *p, ChungLuKind::Plus)?)
            }
            _ => None,
        })
    }

    fn vertex_count(&self) -> Result<usize> {
        Ok(match self {
            ModelSpec::Sbm { sizes, .. } | ModelSpec::Blowup { sizes, .. } | ModelSpec::Percolate { sizes, .. } => {
                sizes.iter().sum()
            }
            ModelSpec::Gnp { n, .. } => *n,
            ModelSpec::TwoBlock { n1, n2, .. } => n1 + n2,
            ModelSpec::ChungluTimes { weights, .. } | ModelSpec::ChungluPlus { weights, .. } => weights.values().len(),
            ModelSpec::Union { first, .. } => first.vertex_count()?,
        })
    }
}

/// Every vertex in its own block.
fn chung_lu_vertex_model(u: &[f64], p: f64, kind: ChungLuKind) -> Result<ModelInstance> {
    let rows: Vec<Vec<f64>> =
        u.iter().map(|&a| u.iter().map(|&b| kind.probability(p, a, b).min(1.0 - f64::EPSILON)).collect()).collect();
    ModelInstance::new(&vec![1; u.len()], ProbMatrix::new(&rows)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    EdgeCount,
    Chi,
    AlphaH,
}

impl Measure {
    fn as_str(self) -> &'static str {
        match self {
            Measure::EdgeCount => "edge_count",
            Measure::Chi => "chi",
            Measure::AlphaH => "alpha_h",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlphaChoice {
    /// Exact up to the exact-mode vertex guard, heuristic above.
    #[default]
    Auto,
    Exact,
    Heuristic,
}

fn default_replicates() -> usize {
    1
}

fn default_methods() -> Vec<ColouringMethod> {
    vec![ColouringMethod::Dsatur]
}

fn default_measures() -> Vec<Measure> {
    vec![Measure::Chi]
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_exact_max_n() -> usize {
    DEFAULT_EXACT_MAX_N
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base model; swept keys are substituted into it.
    pub model: Value,
    /// Parameter name (dotted path into `model`) to list of values. Grid
    /// points are the Cartesian product in key order, last key fastest.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<Value>>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_methods")]
    pub chi_methods: Vec<ColouringMethod>,
    #[serde(default = "default_measures")]
    pub measures: Vec<Measure>,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub alpha_mode: AlphaChoice,
    #[serde(default = "default_exact_max_n")]
    pub exact_max_n: usize,
    #[serde(default = "default_budget")]
    pub exact_budget: u64,
    /// Write per-step wall-clock times; off by default because timings make
    /// reports differ between runs.
    #[serde(default)]
    pub record_timings: bool,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }

    /// Grid points in deterministic order.
    pub fn points(&self) -> Result<Vec<ModelSpec>> {
        let mut values = vec![self.model.clone()];
        for (key, options) in &self.sweep {
            if options.is_empty() {
                return Err(Error::InvalidParameter(format!("sweep `{key}` has no values")));
            }
            let mut next = Vec::with_capacity(values.len() * options.len());
            for base in &values {
                for option in options {
                    let mut v = base.clone();
                    set_path(&mut v, key, option.clone())?;
                    next.push(v);
                }
            }
            values = next;
        }
        values.into_iter().map(|v| Ok(serde_json::from_value(v)?)).collect()
    }

    /// Checks the invariants and returns the grid points.
    pub fn validate(&self) -> Result<Vec<ModelSpec>> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::InvalidParameter("at least one measure is required".into()));
        }
        if self.measures.contains(&Measure::Chi) && self.chi_methods.is_empty() {
            return Err(Error::InvalidParameter("measure chi needs at least one chi method".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        let points = self.points()?;
        if points.len() > u32::MAX as usize || self.replicates > u32::MAX as usize {
            return Err(Error::InvalidParameter("grid too large for the seed layout".into()));
        }
        for spec in &points {
            let n = spec.vertex_count()?;
            if self.measures.contains(&Measure::Chi)
                && self.chi_methods.contains(&ColouringMethod::Exact)
                && n > self.exact_max_n
            {
                return Err(Error::InvalidParameter(format!(
                    "exact colouring requested for n = {n} above exact_max_n = {}",
                    self.exact_max_n
                )));
            }
            // surfaces parameter errors before any work starts
            spec.block_model()?;
        }
        Ok(points)
    }
}

fn set_path(target: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = target;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::InvalidParameter(format!("sweep path `{path}` does not address an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .get_mut(*part)
            .ok_or_else(|| Error::InvalidParameter(format!("sweep path `{path}`: no field `{part}`")))?;
    }
    unreachable!("split yields at least one part")
}

/// One measurement of one sampled graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub point: usize,
    pub replicate: usize,
    pub seed: u64,
    pub model: String,
    pub n: usize,
    pub k: usize,
    /// Compact JSON of the grid point.
    pub params: String,
    pub regime: Option<String>,
    pub measure: String,
    pub method: Option<String>,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pred_sigma_form: Option<f64>,
    pub pred_qstar_form: Option<f64>,
    /// `value` over the prediction in the configured normalisation; empty
    /// unless that prediction is positive.
    pub ratio: Option<f64>,
    pub status: String,
    pub runtime_ms: Option<f64>,
}

/// Column names, in file order.
pub const REPORT_COLUMNS: [&str; 18] = [
    "point",
    "replicate",
    "seed",
    "model",
    "n",
    "k",
    "params",
    "regime",
    "measure",
    "method",
    "value",
    "lower",
    "upper",
    "pred_sigma_form",
    "pred_qstar_form",
    "ratio",
    "status",
    "runtime_ms",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// Predictions shared by all replicates of a point.
struct PointSetup {
    spec: ModelSpec,
    params: String,
    n: usize,
    k: usize,
    prob_model: Option<ModelInstance>,
    chi: std::result::Result<Prediction, String>,
    alpha: Option<(f64, Option<f64>)>,
    edges: Option<f64>,
}

fn chi_prediction(spec: &ModelSpec, normalization: Normalization, seed: u64) -> Result<Prediction> {
    match spec {
        ModelSpec::Gnp { n, p } => predict_gnp(*n, *p),
        ModelSpec::TwoBlock { n1, n2, p11, p22, p12 } => predict_two_block(*n1, *n2, *p11, *p22, *p12, normalization),
        ModelSpec::Sbm { .. } | ModelSpec::Union { .. } => {
            let m = spec
                .block_model()?
                .ok_or_else(|| Error::InvalidParameter("union of non-block models has no prediction".into()))?;
            let w = w_star_solve(&BlockVector::from_counts(&m.block_sizes()), &m.q, DEFAULT_RESTARTS, seed)?.w_sum;
            predict_sbm(&m, w, normalization)
        }
        ModelSpec::Blowup { sizes, h_edges } => {
            let chi_g = crate::predictions::blow_up_wstar(&ModelSpec::blow_up_spec(sizes, h_edges)?)?;
            Ok(Prediction {
                chi_predicted: chi_g,
                normalization,
                sigma_used: 0.0,
                sigma_form: chi_g,
                qstar_form: Some(chi_g),
                regime: None,
                inputs_echo: serde_json::json!({ "sizes": sizes, "h_edges": h_edges }),
            })
        }
        ModelSpec::Percolate { sizes, h_edges, p } => {
            predict_percolation(&ModelSpec::blow_up_spec(sizes, h_edges)?, *p)
        }
        ModelSpec::ChungluTimes { weights, p } => predict_chung_lu(&weights.values(), *p, ChungLuKind::Times),
        ModelSpec::ChungluPlus { weights, p } => predict_chung_lu(&weights.values(), *p, ChungLuKind::Plus),
    }
}

/// Prediction in the configured normalisation, falling back to the sigma form
/// when the q* form is undefined.
fn primary(sigma_form: Option<f64>, qstar_form: Option<f64>, normalization: Normalization) -> Option<f64> {
    match normalization {
        Normalization::QstarForm => qstar_form.or(sigma_form),
        Normalization::SigmaForm => sigma_form,
    }
}

fn expected_edges(m: &ModelInstance) -> f64 {
    let sizes = m.block_sizes();
    let mut total = 0.0;
    for (i, &ni) in sizes.iter().enumerate() {
        let ni = ni as f64;
        total += m.probs.get(i, i) * ni * (ni - 1.0) / 2.0;
        for (j, &nj) in sizes.iter().enumerate().skip(i + 1) {
            total += m.probs.get(i, j) * ni * nj as f64;
        }
    }
    total
}

fn setup_point(cfg: &ExperimentConfig, index: usize, spec: ModelSpec) -> Result<PointSetup> {
    let params = serde_json::to_string(&spec)?;
    let n = spec.vertex_count()?;
    let prob_model = spec.probability_model()?;
    let k = match &spec {
        ModelSpec::Blowup { sizes, .. } | ModelSpec::Percolate { sizes, .. } => sizes.len(),
        ModelSpec::ChungluTimes { .. } | ModelSpec::ChungluPlus { .. } => n,
        _ => prob_model.as_ref().map_or(0, |m| m.k()),
    };
    let chi = chi_prediction(&spec, cfg.normalization, mix(cfg.base_seed, u64::MAX - index as u64))
        .map_err(|e| e.to_string());
    let alpha = prob_model.as_ref().and_then(|m| {
        let norm = m.n_total() as f64;
        let sigma = sigma_estimate(m).ok()?;
        let log_qn = (m.q.q_star() * norm).ln();
        Some(((1.0 - sigma) * norm.ln(), (log_qn > 0.0).then_some(log_qn)))
    });
    let edges = match &spec {
        ModelSpec::Blowup { sizes, h_edges } => {
            Some(blow_up(&ModelSpec::blow_up_spec(sizes, h_edges)?).edge_count() as f64)
        }
        _ => prob_model.as_ref().map(expected_edges),
    };
    Ok(PointSetup { spec, params, n, k, prob_model, chi, alpha, edges })
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

fn run_replicate(cfg: &ExperimentConfig, index: usize, setup: &PointSetup, replicate: usize) -> Vec<ReportRow> {
    let seed = mix(cfg.base_seed, grid_index(index as u32, replicate as u32));
    let regime = setup
        .chi
        .as_ref()
        .ok()
        .and_then(|p| p.regime)
        .map(|r| serde_json::to_value(r).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default());
    let base = ReportRow {
        point: index,
        replicate,
        seed,
        model: setup.spec.name().to_string(),
        n: setup.n,
        k: setup.k,
        params: setup.params.clone(),
        regime,
        measure: String::new(),
        method: None,
        value: None,
        lower: None,
        upper: None,
        pred_sigma_form: None,
        pred_qstar_form: None,
        ratio: None,
        status: "ok".into(),
        runtime_ms: None,
    };
    let keep_time = |t: f64| cfg.record_timings.then_some(t);
    let finish = |mut row: ReportRow, sigma: Option<f64>, qstar: Option<f64>| {
        row.pred_sigma_form = sigma;
        row.pred_qstar_form = qstar;
        if let (Some(v), Some(p)) = (row.value, primary(sigma, qstar, cfg.normalization)) {
            if p > 0.0 {
                row.ratio = Some(v / p);
            }
        }
        row
    };

    let (graph, gen_ms) = timed(|| setup.spec.sample(seed));
    let graph = match graph {
        Ok(g) => g,
        Err(e) => {
            let mut row = base.clone();
            row.measure = "sample".into();
            row.status = format!("error: {e}");
            row.runtime_ms = keep_time(gen_ms);
            return vec![row];
        }
    };

    let mut measures = cfg.measures.clone();
    measures.sort_unstable();
    measures.dedup();
    let mut methods = cfg.chi_methods.clone();
    methods.sort_by_key(|m| *m as u8);
    methods.dedup();

    let mut rows = Vec::new();
    for measure in measures {
        let mut row = base.clone();
        row.measure = measure.as_str().into();
        match measure {
            Measure::EdgeCount => {
                row.value = Some(graph.edge_count() as f64);
                row.runtime_ms = keep_time(gen_ms);
                rows.push(finish(row, setup.edges, setup.edges));
            }
            Measure::Chi => {
                let (sigma, qstar) = match &setup.chi {
                    Ok(p) => (Some(p.sigma_form), p.qstar_form),
                    Err(_) => (None, None),
                };
                for &method in &methods {
                    let mut row = row.clone();
                    row.method = serde_json::to_value(method).ok().and_then(|v| v.as_str().map(str::to_string));
                    let method_seed = mix(seed, 10 + method as u64);
                    let (result, ms) = timed(|| match method {
                        ColouringMethod::Exact => exact_colouring(&graph, cfg.exact_budget),
                        ColouringMethod::Dsatur => Ok(dsatur_colouring(&graph, method_seed)),
                        ColouringMethod::Extraction => match &setup.prob_model {
                            Some(m) => balanced_extraction_colouring(m, &graph, cfg.epsilon, method_seed),
                            None => Err(Error::InvalidParameter("extraction needs edge probabilities".into())),
                        },
                    });
                    row.runtime_ms = keep_time(ms);
                    match result {
                        Ok(c) => {
                            row.value = Some(c.num_colours as f64);
                            row.lower = Some(c.num_colours as f64);
                            row.upper = Some(c.num_colours as f64);
                        }
                        Err(Error::BudgetExceeded { lower, upper }) => {
                            row.lower = Some(lower as f64);
                            row.upper = Some(upper as f64);
                            row.status = "budget_exceeded".into();
                        }
                        Err(e) => row.status = format!("error: {e}"),
                    }
                    if let Err(e) = &setup.chi {
                        if row.status == "ok" {
                            row.status = format!("no prediction: {e}");
                        }
                    }
                    rows.push(finish(row, sigma, qstar));
                }
            }
            Measure::AlphaH => {
                let Some(m) = &setup.prob_model else {
                    row.status = "error: alpha_h needs edge probabilities".into();
                    rows.push(row);
                    continue;
                };
                let mode = match cfg.alpha_mode {
                    AlphaChoice::Exact => AlphaMode::Exact,
                    AlphaChoice::Heuristic => AlphaMode::Heuristic,
                    AlphaChoice::Auto if graph.n() <= EXACT_ALPHA_MAX_N => AlphaMode::Exact,
                    AlphaChoice::Auto => AlphaMode::Heuristic,
                };
                row.method = Some(if mode == AlphaMode::Exact { "exact" } else { "heuristic" }.into());
                let (result, ms) = timed(|| alpha_h(m, &graph, mode, mix(seed, 20)));
                row.runtime_ms = keep_time(ms);
                match result {
                    Ok(r) => row.value = Some(r.h_value),
                    Err(e) => row.status = format!("error: {e}"),
                }
                let (sigma, qstar) = match setup.alpha {
                    Some((s, q)) => (Some(s), q),
                    None => (None, None),
                };
                rows.push(finish(row, sigma, qstar));
            }
        }
    }
    rows
}

/// Runs every grid point and replicate. Solver failures are recorded in the
/// rows; only config errors abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let points = cfg.validate()?;
    let work = || -> Result<Report> {
        let setups: Vec<PointSetup> =
            points.into_par_iter().enumerate().map(|(i, spec)| setup_point(cfg, i, spec)).collect::<Result<_>>()?;
        let tasks: Vec<(usize, usize)> =
            (0..setups.len()).flat_map(|p| (0..cfg.replicates).map(move |r| (p, r))).collect();
        // collect keeps (point, replicate) order
        let chunks: Vec<Vec<ReportRow>> =
            tasks.into_par_iter().map(|(p, r)| run_replicate(cfg, p, &setups[p], r)).collect();
        Ok(Report { rows: chunks.into_iter().flatten().collect() })
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(work),
        None => work(),
    }
}

impl Report {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(REPORT_COLUMNS)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
        Ok(Self { rows })
    }

    /// Per-point, per-series statistics.
    pub fn summary(&self) -> Summary {
        let mut groups: BTreeMap<(usize, String, String), Vec<&ReportRow>> = BTreeMap::new();
        for row in &self.rows {
            groups
                .entry((row.point, row.measure.clone(), row.method.clone().unwrap_or_default()))
                .or_default()
                .push(row);
        }
        let mut points: Vec<PointSummary> = Vec::new();
        for ((point, measure, method), rows) in groups {
            if points.last().is_none_or(|p| p.point != point) {
                points.push(PointSummary {
                    point,
                    model: rows[0].model.clone(),
                    n: rows[0].n,
                    params: rows[0].params.clone(),
                    series: Vec::new(),
                });
            }
            let values: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
            let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
            let rq = Quartiles::of(&ratios);
            points.last_mut().expect("pushed").series.push(SeriesSummary {
                measure,
                method: (!method.is_empty()).then_some(method),
                rows: rows.len(),
                ok: rows.iter().filter(|r| r.status == "ok").count(),
                median_value: Quartiles::of(&values).map(|q| q.median),
                median_ratio: rq.map(|q| q.median),
                q1_ratio: rq.map(|q| q.q1),
                q3_ratio: rq.map(|q| q.q3),
                iqr_ratio: rq.map(|q| q.q3 - q.q1),
            });
        }
        Summary { version: 1, points }
    }
}

#[derive(Debug, Clone, Copy)]
struct Quartiles {
    q1: f64,
    median: f64,
    q3: f64,
}

impl Quartiles {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) })
    }
}

/// Linear interpolation between order statistics of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub measure: String,
    pub method: Option<String>,
    pub rows: usize,
    pub ok: usize,
    pub median_value: Option<f64>,
    pub median_ratio: Option<f64>,
    pub q1_ratio: Option<f64>,
    pub q3_ratio: Option<f64>,
    pub iqr_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: usize,
    pub model: String,
    pub n: usize,
    pub params: String,
    pub series: Vec<SeriesSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub points: Vec<PointSummary>,
}

impl Summary {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

/// Path of the JSON summary written next to a CSV report.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

/// Runs the experiment and writes the CSV report and its JSON summary. The
/// report goes to `out`, else to the config's `output`.
pub fn run_and_save(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(Report, PathBuf)> {
    let path = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::InvalidParameter("no output path given".into()))?;
    let report = run_experiment(cfg)?;
    report.save(&path)?;
    report.summary().save(summary_path(&path))?;
    Ok((report, path))
}

/// Writes `x, y[, group]` columns for external plotting, sorted by group and
/// then numerically by `x`. Rows with an empty `x` or `y` are skipped.
pub fn emit_plotdata<W: Write>(report: &Report, x: &str, y: &str, group: Option<&str>, out: W) -> Result<()> {
    let col = |name: &str| {
        REPORT_COLUMNS.iter().position(|c| *c == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let (xi, yi) = (col(x)?, col(y)?);
    let gi = group.map(col).transpose()?;

    let mut buf = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in &report.rows {
        buf.serialize(row)?;
    }
    let bytes = buf.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes.as_slice());
    let mut records: Vec<(String, f64, String, String)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let (xs, ys) = (&rec[xi], &rec[yi]);
        if xs.is_empty() || ys.is_empty() {
            continue;
        }
        let g = gi.map(|i| rec[i].to_string()).unwrap_or_default();
        records.push((g, xs.parse().unwrap_or(f64::NAN), xs.to_string(), ys.to_string()));
    }
    records.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![x, y];
    if let Some(g) = group {
        header.push(g);
    }
    w.write_record(&header)?;
    for (g, _, xs, ys) in records {
        if group.is_some() {
            w.write_record([xs.as_str(), ys.as_str(), g.as_str()])?;
        } else {
            w.write_record([xs.as_str(), ys.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}
