//! Two-objective fitness used by both optimizers.
//!
//! Both rules and solution candidates are scored by folding an accuracy
//! objective and a second objective (generality for rules, simplicity for
//! candidates) into one value with [`combine`]. Every objective is a
//! maximized quantity in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::data::FeatureRange;
use crate::error::{Error, Result};
use crate::rule::{IntervalCondition, Rule};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessParams {
    /// Weight of the accuracy objective against the second objective.
    /// Values below 1 favour accuracy.
    pub alpha: f64,
    /// Slope of the pseudo-accuracy.
    pub beta: f64,
}

impl Default for FitnessParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

impl FitnessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", format!("must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// `(1 + α²)·o1·o2 / (α²·o1 + o2)`, or 0 when both objectives are 0.
pub fn combine(o1: f64, o2: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&o1) {
        return Err(Error::param("o1", format!("objective must lie in [0, 1], got {o1}")));
    }
    if !(0.0..=1.0).contains(&o2) {
        return Err(Error::param("o2", format!("objective must lie in [0, 1], got {o2}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(combine_unchecked(o1, o2, alpha))
}

#[inline]
fn combine_unchecked(o1: f64, o2: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let denominator = a2 * o1 + o2;
    if denominator == 0.0 {
        0.0
    } else {
        ((1.0 + a2) * o1 * o2 / denominator).clamp(0.0, 1.0)
    }
}

/// `exp(-mse·β)`: maps an error in `[0, ∞)` to `(0, 1]`.
pub fn pseudo_accuracy(mse: f64, beta: f64) -> Result<f64> {
    if !(mse >= 0.0) {
        return Err(Error::param("mse", format!("must be non-negative, got {mse}")));
    }
    if !(beta > 0.0) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    Ok((-mse * beta).exp())
}

/// Share of the observed feature-space box covered by `condition`.
///
/// Dimensions where every training input has the same value contribute a
/// factor of 1.
pub fn volume_share(condition: &IntervalCondition, bounds: &[FeatureRange]) -> f64 {
    debug_assert_eq!(condition.dim(), bounds.len());
    condition
        .lower()
        .iter()
        .zip(condition.upper())
        .zip(bounds)
        .map(|((l, u), b)| {
            let range = b.width();
            if range > 0.0 {
                ((u - l) / range).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .product()
}

/// Fitness of a rule from its in-sample error and volume share. Degenerate
/// rules score 0.
pub fn rule_fitness(rule: &Rule, bounds: &[FeatureRange], params: &FitnessParams) -> Result<f64> {
    if rule.is_degenerate() || !rule.error().is_finite() {
        return Ok(0.0);
    }
    let accuracy = pseudo_accuracy(rule.error(), params.beta)?;
    combine(accuracy, volume_share(rule.condition(), bounds), params.alpha)
}

/// Fitness of a solution candidate: accuracy against `1 - complexity/pool_size`.
pub fn candidate_fitness(mse: f64, complexity: usize, pool_size: usize, params: &FitnessParams) -> Result<f64> {
    if pool_size == 0 {
        return Err(Error::param("pool_size", "must be positive"));
    }
    if complexity > pool_size {
        return Err(Error::param(
            "complexity",
            format!("{complexity} rules selected from a pool of {pool_size}"),
        ));
    }
    let accuracy = pseudo_accuracy(mse, params.beta)?;
    let simplicity = 1.0 - complexity as f64 / pool_size as f64;
    combine(accuracy, simplicity, params.alpha)
}
