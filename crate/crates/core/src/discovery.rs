//! Rule discovery by a single-parent evolution strategy.
//!
//! Each run starts from a small box around a training example, preferring
//! examples the current global solution predicts badly, and grows it with
//! non-adaptive half-normal mutations. Every iteration produces `lambda`
//! children; the best child is recorded as that iteration's elitist and
//! replaces the parent only if it is strictly fitter. The run stops once the
//! elitist from `delta` iterations back beats every elitist recorded after it,
//! and that elitist is the result.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureRange};
use crate::error::{Error, Result};
use crate::fitness::{rule_fitness, FitnessParams};
use crate::rule::{fit_rule, IntervalCondition, Rule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryParams {
    /// Children per iteration.
    pub lambda: usize,
    /// Elitist stall window.
    pub delta: usize,
    /// Initial half-width scale around the seed example, as a share of each
    /// feature's range.
    pub sigma_init: f64,
    /// Mutation scale, as a share of each feature's range.
    pub mutation_sigma: f64,
    /// Rules discovered per discovery phase.
    pub rules_per_phase: usize,
    pub max_iter: usize,
    /// Seed attempts allowed when a seed condition matches nothing.
    pub max_reseeds: usize,
    pub ridge_lambda: f64,
    pub fitness: FitnessParams,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        Self {
            lambda: 20,
            delta: 10,
            sigma_init: 0.1,
            mutation_sigma: 0.05,
            rules_per_phase: 8,
            max_iter: 500,
            max_reseeds: 10,
            ridge_lambda: 0.01,
            fitness: FitnessParams::default(),
        }
    }
}

impl DiscoveryParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("rules_per_phase", self.rules_per_phase),
            ("max_iter", self.max_iter),
        ] {
            if value == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        for (name, value) in [("sigma_init", self.sigma_init), ("mutation_sigma", self.mutation_sigma)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {value}")));
            }
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::param(
                "ridge_lambda",
                format!("must be >= 0, got {}", self.ridge_lambda),
            ));
        }
        self.fitness.validate()
    }
}

/// Bookkeeping from one evolution strategy run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryTrace {
    /// Mutation iterations performed after seeding.
    pub iterations: usize,
    /// Elitist fitness per iteration; entry 0 is the seed rule.
    pub elitist_fitness: Vec<f64>,
    /// Iteration whose elitist was returned.
    pub returned_iteration: usize,
    /// False when the run hit `max_iter` instead of stalling.
    pub stalled: bool,
    pub reseeds: usize,
}

#[derive(Debug, Clone)]
pub struct Discovery {
    pub rule: Rule,
    pub trace: DiscoveryTrace,
}

/// Roulette-wheel choice of an example with probability proportional to its
/// squared residual. Falls back to a uniform draw when every residual is 0.
pub fn select_seed_example<R: Rng + ?Sized>(residuals: &[f64], rng: &mut R) -> Result<usize> {
    if residuals.is_empty() {
        return Err(Error::param("residuals", "cannot select from an empty dataset"));
    }
    let weights = residuals.iter().map(|r| {
        let w = r * r;
        if w.is_finite() {
            w
        } else {
            f64::MAX
        }
    });
    match WeightedIndex::new(weights) {
        Ok(dist) => Ok(dist.sample(rng)),
        Err(_) => Ok(rng.random_range(0..residuals.len())),
    }
}

#[inline]
fn half_normal<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (z * scale).abs()
}

/// A box around `x` whose per-side half-widths are half-normal with scale
/// `sigma_init` times the feature range, clipped to `bounds`.
pub fn initial_condition<R: Rng + ?Sized>(
    x: &[f64],
    bounds: &[FeatureRange],
    sigma_init: f64,
    rng: &mut R,
) -> Result<IntervalCondition> {
    if x.len() != bounds.len() {
        return Err(Error::DimensionMismatch {
            expected: bounds.len(),
            actual: x.len(),
        });
    }
    let mut lower = Vec::with_capacity(x.len());
    let mut upper = Vec::with_capacity(x.len());
    for (&v, b) in x.iter().zip(bounds) {
        let scale = sigma_init * b.width();
        lower.push(v - half_normal(rng, scale));
        upper.push(v + half_normal(rng, scale));
    }
    Ok(IntervalCondition::clipped(lower, upper, bounds))
}

/// Growth-only mutation: each lower bound moves down and each upper bound up
/// by independent half-normal steps, then the box is clipped to `bounds`.
pub fn mutate_condition<R: Rng + ?Sized>(
    parent: &IntervalCondition,
    bounds: &[FeatureRange],
    sigma: f64,
    rng: &mut R,
) -> IntervalCondition {
    let mut lower = Vec::with_capacity(parent.dim());
    let mut upper = Vec::with_capacity(parent.dim());
    for ((&l, &u), b) in parent.lower().iter().zip(parent.upper()).zip(bounds) {
        let scale = sigma * b.width();
        lower.push(l - half_normal(rng, scale));
        upper.push(u + half_normal(rng, scale));
    }
    IntervalCondition::clipped(lower, upper, bounds)
}

/// Evolves one rule scored by [`rule_fitness`].
pub fn discover_rule<R: Rng + ?Sized>(
    data: &Dataset,
    residuals: &[f64],
    params: &DiscoveryParams,
    rng: &mut R,
) -> Result<Rule> {
    let bounds = data.bounds();
    let fitness = params.fitness;
    discover_rule_with(data, residuals, params, rng, |rule| {
        rule_fitness(rule, bounds, &fitness).unwrap_or(0.0)
    })
    .map(|d| d.rule)
}

/// Evolves one rule with a caller-supplied fitness. The scorer is called once
/// for each seed attempt and then once per child, in generation order.
pub fn discover_rule_with<R, F>(
    data: &Dataset,
    residuals: &[f64],
    params: &DiscoveryParams,
    rng: &mut R,
    mut score: F,
) -> Result<Discovery>
where
    R: Rng + ?Sized,
    F: FnMut(&Rule) -> f64,
{
    params.validate()?;
    if residuals.len() != data.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: data.n_rows(),
            actual: residuals.len(),
        });
    }
    let bounds = data.bounds();

    let mut reseeds = 0;
    let seed = loop {
        let j = select_seed_example(residuals, rng)?;
        let condition = initial_condition(data.row(j), bounds, params.sigma_init, rng)?;
        let rule = fit_rule(condition, data, params.ridge_lambda)?;
        let fitness = score(&rule);
        let rule = rule.with_fitness(fitness);
        if !rule.is_degenerate() || reseeds >= params.max_reseeds {
            break rule;
        }
        reseeds += 1;
    };
    if seed.is_degenerate() {
        return Ok(Discovery {
            rule: seed,
            trace: DiscoveryTrace {
                iterations: 0,
                elitist_fitness: vec![0.0],
                returned_iteration: 0,
                stalled: false,
                reseeds,
            },
        });
    }

    let mut parent = seed.clone();
    let mut elitists = vec![seed];

    for iteration in 1..=params.max_iter {
        let mut best: Option<Rule> = None;
        for _ in 0..params.lambda {
            let condition = mutate_condition(parent.condition(), bounds, params.mutation_sigma, rng);
            let child = fit_rule(condition, data, params.ridge_lambda)?;
            let fitness = score(&child);
            let child = child.with_fitness(fitness);
            if best.as_ref().is_none_or(|b| child.fitness() > b.fitness()) {
                best = Some(child);
            }
        }
        let elitist = best.expect("lambda >= 1");
        if elitist.fitness() > parent.fitness() {
            parent = elitist.clone();
        }
        elitists.push(elitist);

        if iteration >= params.delta {
            let candidate = iteration - params.delta;
            let pivot = elitists[candidate].fitness();
            if elitists[candidate + 1..].iter().all(|e| pivot > e.fitness()) {
                return Ok(finish(elitists, candidate, iteration, true, reseeds));
            }
        }
    }

    let best = elitists.iter().enumerate().fold(0, |best, (i, e)| {
        if e.fitness() > elitists[best].fitness() {
            i
        } else {
            best
        }
    });
    Ok(finish(elitists, best, params.max_iter, false, reseeds))
}

fn finish(mut elitists: Vec<Rule>, index: usize, iterations: usize, stalled: bool, reseeds: usize) -> Discovery {
    let elitist_fitness = elitists.iter().map(Rule::fitness).collect();
    Discovery {
        rule: elitists.swap_remove(index),
        trace: DiscoveryTrace {
            iterations,
            elitist_fitness,
            returned_iteration: index,
            stalled,
            reseeds,
        },
    }
}

/// Runs `rules_per_phase` independent discoveries and keeps the
/// non-degenerate results.
///
/// Every run gets its own generator seeded from `rng`, so the outcome does not
/// depend on how the runs are scheduled across threads.
pub fn discover_rules<R: Rng + ?Sized>(
    data: &Dataset,
    residuals: &[f64],
    params: &DiscoveryParams,
    rng: &mut R,
) -> Result<Vec<Rule>> {
    params.validate()?;
    let seeds: Vec<u64> = (0..params.rules_per_phase).map(|_| rng.random()).collect();
    let rules = seeds
        .par_iter()
        .map(|&seed| discover_rule(data, residuals, params, &mut ChaCha8Rng::seed_from_u64(seed)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rules.into_iter().filter(|r| !r.is_degenerate()).collect())
}
