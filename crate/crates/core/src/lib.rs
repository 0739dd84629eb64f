//! Chromatic number of stochastic block model random graphs.
//!
//! The crate covers the optimisation functionals `w` and `w*` over block
//! vectors, samplers for the block model and its relatives (blow-ups,
//! percolation, Chung-Lu, unions), exact and heuristic colouring, the weighted
//! independence number, closed-form chromatic predictions, and a seeded Monte
//! Carlo experiment driver.

pub mod chromatic;
pub mod error;
pub mod experiment;
pub mod functionals;
pub mod graph;
pub mod model;
pub mod predictions;
pub mod rng;

pub use chromatic::{Colouring, ColouringMethod};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ModelSpec, Report, ReportRow};
pub use functionals::{CornerSolution, Decomposition};
pub use graph::{BlowUpSpec, ChungLuKind, Provenance, SbmGraph};
pub use model::{build_q, BlockVector, ModelFile, ModelInstance, ProbMatrix, QMatrix};
pub use predictions::{Normalization, Prediction, Regime, TwoBlockThresholds};
