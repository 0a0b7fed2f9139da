//! Versioned JSON model files.
//!
//! Layout (version 1):
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "feature_names": [..], "target_name": "..",
//!   "feature_bounds": [{"min": .., "max": ..}, ..],
//!   "default_prediction": .., "target_scaling": {"offset": .., "scale": ..},
//!   "config": { ..every training setting.. },
//!   "rules": [{"lower": [..], "upper": [..], "coefficients": [..], "intercept": ..,
//!              "experience": .., "error": .., "fitness": ..}, ..],
//!   "best": {"genome": "0101..", "mse": .., "complexity": .., "fitness": ..},
//!   "history": [{"phase": .., "pool_size": .., "best_fitness": .., "mse": .., "complexity": ..}, ..]
//! }
//! ```
//!
//! Reals are written in shortest round-trip form, so loading reproduces every
//! stored value exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FeatureRange;
use crate::error::{Error, Result};
use crate::rule::{IntervalCondition, LinearSubmodel, Rule};
use crate::solution::{Genome, Pool, SolutionCandidate};
use crate::training::{Model, PhaseMetrics, TargetScaling, TrainingConfig};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u64,
    feature_names: Vec<String>,
    target_name: String,
    feature_bounds: Vec<FeatureRange>,
    default_prediction: f64,
    target_scaling: TargetScaling,
    config: TrainingConfig,
    rules: Vec<RuleRecord>,
    best: BestRecord,
    history: Vec<PhaseMetrics>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleRecord {
    lower: Vec<f64>,
    upper: Vec<f64>,
    coefficients: Vec<f64>,
    intercept: f64,
    experience: usize,
    error: f64,
    fitness: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BestRecord {
    genome: String,
    mse: f64,
    complexity: usize,
    fitness: f64,
}

pub fn model_to_json(model: &Model) -> Result<String> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        feature_names: model.feature_names.clone(),
        target_name: model.target_name.clone(),
        feature_bounds: model.feature_bounds.clone(),
        default_prediction: model.default_prediction,
        target_scaling: model.target_scaling,
        config: model.config.clone(),
        rules: model
            .pool
            .iter()
            .map(|r| RuleRecord {
                lower: r.condition().lower().to_vec(),
                upper: r.condition().upper().to_vec(),
                coefficients: r.submodel().coefficients.clone(),
                intercept: r.submodel().intercept,
                experience: r.experience(),
                error: r.error(),
                fitness: r.fitness(),
            })
            .collect(),
        best: BestRecord {
            genome: model.best.genome().to_string(),
            mse: model.best.mse(),
            complexity: model.best.complexity(),
            fitness: model.best.fitness(),
        },
        history: model.history.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn model_from_json(text: &str) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let version = value
        .get("format_version")
        .ok_or_else(|| Error::Schema("missing format_version".into()))?
        .as_u64()
        .ok_or_else(|| Error::Schema("format_version must be a non-negative integer".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    build(file)
}

fn build(file: ModelFile) -> Result<Model> {
    let schema = |msg: String| Error::Schema(msg);
    let dim = file.feature_bounds.len();
    if dim == 0 {
        return Err(schema("feature_bounds is empty".into()));
    }
    if file.feature_names.len() != dim {
        return Err(schema(format!(
            "{} feature names for {dim} features",
            file.feature_names.len()
        )));
    }
    if let Some(b) = file.feature_bounds.iter().find(|b| !(b.min <= b.max)) {
        return Err(schema(format!("invalid feature range [{}, {}]", b.min, b.max)));
    }
    file.target_scaling.validate().map_err(|e| schema(e.to_string()))?;
    file.config.validate().map_err(|e| schema(format!("config: {e}")))?;

    let mut pool = Pool::new();
    for (i, r) in file.rules.into_iter().enumerate() {
        if r.lower.len() != dim || r.coefficients.len() != dim {
            return Err(schema(format!("rule {i} does not have {dim} dimensions")));
        }
        if r.experience == 0 {
            return Err(schema(format!("rule {i} has zero experience")));
        }
        let condition = IntervalCondition::new(r.lower, r.upper).map_err(|e| schema(format!("rule {i}: {e}")))?;
        let submodel = LinearSubmodel {
            coefficients: r.coefficients,
            intercept: r.intercept,
        };
        let rule = Rule::from_parts(condition, submodel, r.experience, r.error, r.fitness)
            .map_err(|e| schema(format!("rule {i}: {e}")))?;
        pool.push(rule).map_err(|e| schema(format!("rule {i}: {e}")))?;
    }

    let genome: Genome = file.best.genome.parse()?;
    if genome.len() != pool.len() {
        return Err(schema(format!(
            "best genome has {} bits for {} rules",
            genome.len(),
            pool.len()
        )));
    }
    if genome.count_ones() != file.best.complexity {
        return Err(schema(format!(
            "best complexity {} does not match genome with {} selected rules",
            file.best.complexity,
            genome.count_ones()
        )));
    }

    Ok(Model {
        pool,
        best: SolutionCandidate::from_parts(genome, file.best.mse, file.best.fitness),
        default_prediction: file.default_prediction,
        target_scaling: file.target_scaling,
        feature_bounds: file.feature_bounds,
        feature_names: file.feature_names,
        target_name: file.target_name,
        config: file.config,
        history: file.history,
    })
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    model_from_json(&fs::read_to_string(path)?)
}
