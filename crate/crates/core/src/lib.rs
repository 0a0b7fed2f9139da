//! Interpretable regression with interval-conditioned linear rules.
//!
//! Training alternates two optimizers. An evolution strategy discovers rules
//! one at a time: each rule is a hyperrectangle over the inputs plus a ridge
//! regression fitted on the examples inside it, scored by how accurate and how
//! general it is. Discovered rules go into an append-only [`Pool`]. A genetic
//! algorithm then searches bit strings over the pool for a small subset whose
//! mixed predictions fit the data well. The chosen subset is the model.
//!
//! ```no_run
//! use rulemix::{fit, Dataset, TrainingConfig};
//!
//! let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 99.0]).collect();
//! let targets = rows.iter().map(|x| 2.0 * x[0] + 1.0).collect();
//! let data = Dataset::from_rows(&rows, targets)?;
//! let model = fit(&data, &TrainingConfig::default())?;
//! println!("{:?}", model.score(&data)?);
//! # Ok::<(), rulemix::Error>(())
//! ```

// `!(x >= 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod composition;
pub mod data;
pub mod discovery;
pub mod error;
pub mod fitness;
pub mod io;
pub mod rule;
pub mod solution;
pub mod training;

pub use composition::{compose, evaluate_candidate, CompositionParams};
pub use data::{Dataset, FeatureRange};
pub use discovery::{discover_rule, discover_rules, DiscoveryParams};
pub use error::{Error, Result};
pub use fitness::FitnessParams;
pub use rule::{fit_rule, IntervalCondition, LinearSubmodel, Rule};
pub use solution::{predict_mixed, solution_residuals, Genome, Pool, SolutionCandidate};
pub use training::{fit, Metrics, Model, PhaseMetrics, TargetScaling, TrainingConfig};
