//! The training loop: alternate rule discovery and solution composition for a
//! fixed number of phases, then keep the best composed solution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composition::{compose, CompositionParams};
use crate::data::{mean, Dataset, FeatureRange};
use crate::discovery::{discover_rules, DiscoveryParams};
use crate::error::{Error, Result};
use crate::fitness::{volume_share, FitnessParams, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::rule::{LinearSubmodel, Rule};
use crate::solution::{mix_at, solution_residuals, Genome, Pool, SolutionCandidate};

/// Evolution strategy settings as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverySettings {
    pub lambda: usize,
    pub delta: usize,
    pub sigma_init: f64,
    pub mutation_sigma: f64,
    pub rules_per_phase: usize,
    pub max_iter: usize,
    pub max_reseeds: usize,
}

impl Default for DiscoverySettings {
    fn default() -> Self {
        let p = DiscoveryParams::default();
        Self {
            lambda: p.lambda,
            delta: p.delta,
            sigma_init: p.sigma_init,
            mutation_sigma: p.mutation_sigma,
            rules_per_phase: p.rules_per_phase,
            max_iter: p.max_iter,
            max_reseeds: p.max_reseeds,
        }
    }
}

/// Genetic algorithm settings as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositionSettings {
    pub population_size: usize,
    pub tournament_k: usize,
    pub crossover_points: usize,
    pub crossover_prob: f64,
    pub mutation_rate: f64,
    pub elitists: usize,
    pub generations_per_phase: usize,
}

impl Default for CompositionSettings {
    fn default() -> Self {
        let p = CompositionParams::default();
        Self {
            population_size: p.population_size,
            tournament_k: p.tournament_k,
            crossover_points: p.crossover_points,
            crossover_prob: p.crossover_prob,
            mutation_rate: p.mutation_rate,
            elitists: p.elitists,
            generations_per_phase: p.generations_per_phase,
        }
    }
}

/// Every hyperparameter of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Number of discover-then-compose cycles.
    pub n_phases: usize,
    pub rng_seed: u64,
    pub ridge_lambda: f64,
    pub alpha_rule: f64,
    pub alpha_candidate: f64,
    pub beta: f64,
    /// Stop before `n_phases` once best fitness gains less than 1e-6 over two
    /// consecutive phases.
    pub early_stop: bool,
    /// Train on targets shifted to zero mean and unit variance. Rule and
    /// candidate errors are then measured relative to the target spread.
    pub standardize_target: bool,
    pub discovery: DiscoverySettings,
    pub composition: CompositionSettings,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_phases: 8,
            rng_seed: 0,
            ridge_lambda: DiscoveryParams::default().ridge_lambda,
            alpha_rule: DEFAULT_ALPHA,
            alpha_candidate: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            early_stop: false,
            standardize_target: true,
            discovery: DiscoverySettings::default(),
            composition: CompositionSettings::default(),
        }
    }
}

const EARLY_STOP_TOLERANCE: f64 = 1e-6;

impl TrainingConfig {
    pub fn discovery_params(&self) -> DiscoveryParams {
        let d = &self.discovery;
        DiscoveryParams {
            lambda: d.lambda,
            delta: d.delta,
            sigma_init: d.sigma_init,
            mutation_sigma: d.mutation_sigma,
            rules_per_phase: d.rules_per_phase,
            max_iter: d.max_iter,
            max_reseeds: d.max_reseeds,
            ridge_lambda: self.ridge_lambda,
            fitness: FitnessParams {
                alpha: self.alpha_rule,
                beta: self.beta,
            },
        }
    }

    pub fn composition_params(&self) -> CompositionParams {
        let c = &self.composition;
        CompositionParams {
            population_size: c.population_size,
            tournament_k: c.tournament_k,
            crossover_points: c.crossover_points,
            crossover_prob: c.crossover_prob,
            mutation_rate: c.mutation_rate,
            elitists: c.elitists,
            generations_per_phase: c.generations_per_phase,
            fitness: FitnessParams {
                alpha: self.alpha_candidate,
                beta: self.beta,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phases == 0 {
            return Err(Error::param("n_phases", "must be at least 1"));
        }
        self.discovery_params().validate()?;
        self.composition_params().validate()
    }
}

/// Affine map from target units to the units a model is trained in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetScaling {
    pub offset: f64,
    pub scale: f64,
}

impl TargetScaling {
    pub const IDENTITY: Self = Self {
        offset: 0.0,
        scale: 1.0,
    };

    /// Mean and population standard deviation of `targets`. A constant
    /// column only gets shifted.
    pub fn standardizing(targets: &[f64]) -> Self {
        let offset = mean(targets);
        let var = targets.iter().map(|y| (y - offset).powi(2)).sum::<f64>() / targets.len() as f64;
        let scale = var.sqrt();
        Self {
            offset,
            scale: if scale > 0.0 && scale.is_finite() { scale } else { 1.0 },
        }
    }

    pub fn to_model(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    pub fn to_target(&self, p: f64) -> f64 {
        self.offset + self.scale * p
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !self.offset.is_finite() {
            return Err(Error::param("target_scaling.offset", "must be finite"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::param("target_scaling.scale", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Snapshot of the best solution at the end of a phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub phase: usize,
    pub pool_size: usize,
    pub best_fitness: f64,
    /// Training MSE in target units.
    pub mse: f64,
    pub complexity: usize,
}

/// Evaluation summary of a model on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub r2: f64,
    pub complexity: usize,
    pub pool_size: usize,
    /// Mean volume share of the selected rules; 0 when none is selected.
    pub mean_rule_volume: f64,
}

/// A trained model: the rule pool plus the subset chosen to predict.
#[derive(Debug, Clone, PartialEq)]
///
/// Rules, the best candidate and `default_prediction` live in training units;
/// `target_scaling` maps them back to target units on prediction.
pub struct Model {
    pub pool: Pool,
    pub best: SolutionCandidate,
    /// Used for inputs no selected rule matches.
    pub default_prediction: f64,
    pub target_scaling: TargetScaling,
    pub feature_bounds: Vec<FeatureRange>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub config: TrainingConfig,
    pub history: Vec<PhaseMetrics>,
}

/// Trains a model on `data`.
///
/// Residuals start from the all-default solution, so the first discovery
/// phase seeds rules where targets deviate most from their mean. After each
/// composition the residuals of the best candidate steer the next discovery
/// phase. The previous population, including the previous best, warm-starts
/// every composition after the first.
pub fn fit(data: &Dataset, config: &TrainingConfig) -> Result<Model> {
    config.validate()?;
    let discovery = config.discovery_params();
    let composition = config.composition_params();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let target_scaling = if config.standardize_target {
        TargetScaling::standardizing(data.targets())
    } else {
        TargetScaling::IDENTITY
    };
    let data = &data.with_targets(data.targets().iter().map(|&y| target_scaling.to_model(y)).collect())?;
    let default_prediction = data.target_mean();
    let mut residuals: Vec<f64> = data.targets().iter().map(|y| y - default_prediction).collect();
    let mut pool = Pool::new();
    let mut population: Vec<Genome> = Vec::new();
    let mut best: Option<SolutionCandidate> = None;
    let mut history: Vec<PhaseMetrics> = Vec::with_capacity(config.n_phases);

    for phase in 0..config.n_phases {
        for rule in discover_rules(data, &residuals, &discovery, &mut rng)? {
            pool.push(rule)?;
        }
        if pool.is_empty() {
            return Err(Error::DiscoveryFailed);
        }

        if let Some(prev) = &best {
            if !population.iter().any(|g| g == prev.genome()) {
                match population.last_mut() {
                    Some(slot) => *slot = prev.genome().clone(),
                    None => population.push(prev.genome().clone()),
                }
            }
        }
        let warm = (!population.is_empty()).then_some(population.as_slice());
        let outcome = compose(&pool, data, &composition, warm, &mut rng)?;
        population = outcome.population.into_iter().map(|c| c.genome().clone()).collect();

        residuals = solution_residuals(&outcome.best, &pool, data)?;
        history.push(PhaseMetrics {
            phase,
            pool_size: pool.len(),
            best_fitness: outcome.best.fitness(),
            mse: outcome.best.mse() * target_scaling.scale * target_scaling.scale,
            complexity: outcome.best.complexity(),
        });
        best = Some(outcome.best);

        if config.early_stop && history.len() >= 3 {
            let recent = &history[history.len() - 3..];
            if recent[2].best_fitness - recent[0].best_fitness < EARLY_STOP_TOLERANCE {
                break;
            }
        }
    }

    Ok(Model {
        pool,
        best: best.expect("at least one phase ran"),
        default_prediction,
        target_scaling,
        feature_bounds: data.bounds().to_vec(),
        feature_names: data.feature_names().to_vec(),
        target_name: data.target_name().to_string(),
        config: config.clone(),
        history,
    })
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.feature_bounds.len()
    }

    /// Predicts one input. Matching uses the input clamped to the training
    /// feature bounds, so points just outside the training range still reach
    /// the edge rules; submodels are evaluated at the input itself.
    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        let clamped: Vec<f64> = x.iter().zip(&self.feature_bounds).map(|(v, b)| b.clamp(*v)).collect();
        let p = mix_at(self.best.genome(), &self.pool, &clamped, x, self.default_prediction);
        Ok(self.target_scaling.to_target(p))
    }

    /// `data` with its targets mapped into training units, the form the pool
    /// and the best candidate were scored on.
    pub fn training_view(&self, data: &Dataset) -> Result<Dataset> {
        data.with_targets(
            data.targets()
                .iter()
                .map(|&y| self.target_scaling.to_model(y))
                .collect(),
        )
    }

    /// A rule's submodel and in-sample error expressed in target units.
    pub fn rule_in_target_units(&self, rule: &Rule) -> (LinearSubmodel, f64) {
        let t = self.target_scaling;
        let submodel = LinearSubmodel {
            coefficients: rule.submodel().coefficients.iter().map(|c| c * t.scale).collect(),
            intercept: t.to_target(rule.submodel().intercept),
        };
        (submodel, rule.error() * t.scale * t.scale)
    }

    pub fn predict<'a, I>(&self, rows: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        rows.into_iter().map(|x| self.predict_one(x)).collect()
    }

    /// Selected rules paired with their pool index.
    pub fn selected_rules(&self) -> impl Iterator<Item = (usize, &Rule)> + '_ {
        self.best.rules(&self.pool)
    }

    pub fn score(&self, data: &Dataset) -> Result<Metrics> {
        let predictions = self.predict(data.rows())?;
        let targets = data.targets();
        let sse: f64 = predictions
            .iter()
            .zip(targets)
            .map(|(p, y)| {
                let r = y - p;
                r * r
            })
            .sum();
        let target_mean = mean(targets);
        let sst: f64 = targets.iter().map(|y| (y - target_mean).powi(2)).sum();
        let r2 = if sst > 0.0 {
            1.0 - sse / sst
        } else if sse == 0.0 {
            1.0
        } else {
            0.0
        };

        let volumes: Vec<f64> = self
            .selected_rules()
            .map(|(_, r)| volume_share(r.condition(), &self.feature_bounds))
            .collect();
        let mean_rule_volume = if volumes.is_empty() { 0.0 } else { mean(&volumes) };

        Ok(Metrics {
            mse: crate::solution::mean_squared_error(&predictions, targets),
            r2,
            complexity: self.best.complexity(),
            pool_size: self.pool.len(),
            mean_rule_volume,
        })
    }
}
