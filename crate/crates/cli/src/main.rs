use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use sbmchi_core::chromatic::{
    balanced_extraction_colouring, dsatur_colouring, exact_colouring, DEFAULT_BUDGET, DEFAULT_EPSILON,
};
use sbmchi_core::experiment::{emit_plotdata, run_and_save, summary_path};
use sbmchi_core::functionals::{w_star_bounds, w_star_bruteforce, w_star_solve, w_value, DEFAULT_RESTARTS};
use sbmchi_core::graph::{
    blow_up, percolate, sample_chung_lu, sample_sbm, union_graphs, BlowUpSpec, ChungLuKind, SbmGraph,
};
use sbmchi_core::predictions::{
    predict_chung_lu, predict_gnp, predict_percolation, predict_sbm, predict_two_block, Prediction,
};
use sbmchi_core::{BlockVector, Error, ExperimentConfig, ModelInstance, Normalization, Report};

/// Chromatic numbers of stochastic block model random graphs.
#[derive(Parser, Debug)]
#[command(name = "sbmchi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenModel {
    Sbm,
    Blowup,
    Percolate,
    ChungluTimes,
    ChungluPlus,
    Union,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Exact,
    Dsatur,
    Extraction,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Theorem {
    Gnp,
    Sbm,
    TwoBlock,
    Percolation,
    ChungLu,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Norm {
    SigmaForm,
    QstarForm,
}

impl From<Norm> for Normalization {
    fn from(n: Norm) -> Self {
        match n {
            Norm::SigmaForm => Normalization::SigmaForm,
            Norm::QstarForm => Normalization::QstarForm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kernel {
    Times,
    Plus,
}

impl From<Kernel> for ChungLuKind {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Times => ChungLuKind::Times,
            Kernel::Plus => ChungLuKind::Plus,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample or build a graph and write it as JSON.
    Gen {
        #[arg(long, value_enum)]
        model: GenModel,
        /// Model file (sbm), template file (blowup), graph file (percolate,
        /// union), or weight array (chunglu-*).
        #[arg(long)]
        input: PathBuf,
        /// Second graph file for `union`.
        #[arg(long)]
        second: Option<PathBuf>,
        /// Edge probability for percolate and Chung-Lu.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximise y^T Q y / ||y|| over the box [0, x].
    SolveW {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated x; defaults to the block sizes.
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
    },
    /// Minimise the sum of w over systems summing to x.
    SolveWstar {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
        /// Exact integer dynamic programme instead of the local search.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Colour a graph.
    Chromatic {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "dsatur")]
        method: Method,
        /// Model file, needed by `extraction`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Closed-form chromatic prediction.
    Predict {
        #[arg(long, value_enum)]
        theorem: Theorem,
        /// Model file (sbm).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Template file (percolation).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Weight array file (chung-lu).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "times")]
        kernel: Kernel,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        n2: Option<usize>,
        #[arg(long)]
        p11: Option<f64>,
        #[arg(long)]
        p22: Option<f64>,
        #[arg(long)]
        p12: Option<f64>,
        /// Precomputed w*; computed by local search when absent (sbm).
        #[arg(long)]
        wstar: Option<f64>,
        #[arg(long, value_enum, default_value = "qstar-form")]
        normalization: Norm,
    },
    /// Run a Monte Carlo experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// CSV report path; the JSON summary goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract x/y columns from a report for plotting.
    PlotData {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Template file: block sizes and template edges.
#[derive(Deserialize)]
struct TemplateFile {
    sizes: Vec<usize>,
    #[serde(default)]
    h_edges: Vec<(usize, usize)>,
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn load_template(path: &Path) -> Result<BlowUpSpec> {
    let t: TemplateFile = load_json(path)?;
    Ok(BlowUpSpec::from_edges(t.sizes.len(), &t.h_edges, t.sizes)?)
}

fn load_model(path: &Path) -> Result<ModelInstance> {
    ModelInstance::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_graph(path: &Path) -> Result<SbmGraph> {
    SbmGraph::load(path).with_context(|| format!("loading graph {}", path.display()))
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| anyhow::anyhow!("missing --{flag}"))
}

fn target(m: &ModelInstance, x: Option<Vec<f64>>) -> Result<BlockVector> {
    Ok(match x {
        Some(v) => BlockVector::new(v)?,
        None => BlockVector::from_counts(&m.block_sizes()),
    })
}

fn prediction_json(p: &Prediction) -> Value {
    json!({
        "chi_predicted": p.chi_predicted,
        "normalization": p.normalization,
        "sigma": p.sigma_used,
        "sigma_form": p.sigma_form,
        "qstar_form": p.qstar_form,
        "regime": p.regime,
    })
}

fn run(cli: Cli) -> Result<Value> {
    match cli.command {
        Command::Gen { model, input, second, p, seed, out } => {
            let g = match model {
                GenModel::Sbm => sample_sbm(&load_model(&input)?, seed),
                GenModel::Blowup => blow_up(&load_template(&input)?),
                GenModel::Percolate => percolate(&load_graph(&input)?, need(p, "p")?, seed)?,
                GenModel::ChungluTimes | GenModel::ChungluPlus => {
                    let u: Vec<f64> = load_json(&input)?;
                    let kind =
                        if matches!(model, GenModel::ChungluTimes) { ChungLuKind::Times } else { ChungLuKind::Plus };
                    sample_chung_lu(&u, need(p, "p")?, kind, seed, None)?
                }
                GenModel::Union => union_graphs(&load_graph(&input)?, &load_graph(&need(second, "second")?)?)?,
            };
            g.save(&out)?;
            Ok(json!({ "n": g.n(), "edges": g.edge_count(), "kind": g.provenance.kind, "out": out }))
        }
        Command::SolveW { model, x } => {
            let m = load_model(&model)?;
            let x = target(&m, x)?;
            let sol = w_value(&x, &m.q)?;
            let (lower, upper) = w_star_bounds(&x, &m.q);
            Ok(json!({
                "value": sol.value,
                "support": sol.support,
                "maximizer": sol.maximizer.values(),
                "bounds": { "wstar_lower": lower, "wstar_upper": upper },
                "method": "corner-enumeration",
            }))
        }
        Command::SolveWstar { model, x, oracle, restarts, seed } => {
            let m = load_model(&model)?;
            let x = target(&m, x)?;
            let d = if oracle { w_star_bruteforce(&x, &m.q)? } else { w_star_solve(&x, &m.q, restarts, seed)? };
            let (lower, upper) = w_star_bounds(&x, &m.q);
            let parts: Vec<&[f64]> = d.parts.iter().map(|p| p.values()).collect();
            Ok(json!({
                "value": d.w_sum,
                "parts": parts,
                "bounds": { "lower": lower, "upper": upper },
                "method": if oracle { "oracle" } else { "local-search" },
            }))
        }
        Command::Chromatic { graph, method, model, epsilon, seed, budget } => {
            let g = load_graph(&graph)?;
            let start = Instant::now();
            let result = match method {
                Method::Exact => exact_colouring(&g, budget),
                Method::Dsatur => Ok(dsatur_colouring(&g, seed)),
                Method::Extraction => {
                    let m = load_model(&need(model, "model")?)?;
                    balanced_extraction_colouring(&m, &g, epsilon, seed)
                }
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(c) => Ok(json!({
                    "chi_or_bound": c.num_colours,
                    "method": c.method,
                    "colour_sizes": c.class_sizes(),
                    "runtime_ms": runtime_ms,
                })),
                Err(Error::BudgetExceeded { lower, upper }) => Ok(json!({
                    "chi_or_bound": upper,
                    "method": "exact",
                    "status": "budget_exceeded",
                    "lower": lower,
                    "upper": upper,
                    "colour_sizes": [],
                    "runtime_ms": runtime_ms,
                })),
                Err(e) => Err(e.into()),
            }
        }
        Command::Predict {
            theorem,
            model,
            spec,
            weights,
            kernel,
            n,
            p,
            n1,
            n2,
            p11,
            p22,
            p12,
            wstar,
            normalization,
        } => {
            let normalization = normalization.into();
            let pred = match theorem {
                Theorem::Gnp => predict_gnp(need(n, "n")?, need(p, "p")?)?,
                Theorem::Sbm => {
                    let m = load_model(&need(model, "model")?)?;
                    let w = match wstar {
                        Some(w) => w,
                        None => {
                            let x = BlockVector::from_counts(&m.block_sizes());
                            w_star_solve(&x, &m.q, DEFAULT_RESTARTS, 0)?.w_sum
                        }
                    };
                    predict_sbm(&m, w, normalization)?
                }
                Theorem::TwoBlock => predict_two_block(
                    need(n1, "n1")?,
                    need(n2, "n2")?,
                    need(p11, "p11")?,
                    need(p22, "p22")?,
                    need(p12, "p12")?,
                    normalization,
                )?,
                Theorem::Percolation => predict_percolation(&load_template(&need(spec, "spec")?)?, need(p, "p")?)?,
                Theorem::ChungLu => {
                    let u: Vec<f64> = load_json(&need(weights, "weights")?)?;
                    predict_chung_lu(&u, need(p, "p")?, kernel.into())?
                }
            };
            Ok(prediction_json(&pred))
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let (report, path) = run_and_save(&cfg, out.as_deref())?;
            let failed = report.rows.iter().filter(|r| r.status != "ok").count();
            Ok(json!({
                "rows": report.rows.len(),
                "failed_rows": failed,
                "report": path,
                "summary": summary_path(&path),
            }))
        }
        Command::PlotData { report, x, y, group, out } => {
            let r = Report::load(&report).with_context(|| format!("loading report {}", report.display()))?;
            let mut buf = Vec::new();
            emit_plotdata(&r, &x, &y, group.as_deref(), &mut buf)?;
            std::fs::write(&out, buf)?;
            Ok(json!({ "out": out }))
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let value = run(cli)?;
    if value.is_null() {
        bail!("no output");
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}
