//! The rule pool, bit-string solution candidates and mixed prediction.

use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rule::Rule;

/// Added to a rule's in-sample error before inverting it into a mixing weight.
pub const MIXING_EPSILON: f64 = 1e-6;

/// Mixing weight of a rule: experience over (error + ε).
#[inline]
pub fn mixing_weight(rule: &Rule) -> f64 {
    rule.experience() as f64 / (rule.error() + MIXING_EPSILON)
}

/// Append-only archive of discovered rules. Indices are stable, so genomes
/// stay valid as the pool grows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pool {
    rules: Vec<Rule>,
}

impl Pool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a rule and returns its index. Degenerate rules are refused.
    pub fn push(&mut self, rule: Rule) -> Result<usize> {
        if rule.is_degenerate() {
            return Err(Error::param("rule", "degenerate rules cannot enter the pool"));
        }
        if let Some(first) = self.rules.first() {
            if first.condition().dim() != rule.condition().dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.condition().dim(),
                    actual: rule.condition().dim(),
                });
            }
        }
        self.rules.push(rule);
        Ok(self.rules.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Rule> {
        self.rules.get(index)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rule> {
        self.rules.iter()
    }
}

/// Bit string over the pool; bit `k` selects rule `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Genome(Vec<bool>);

impl Genome {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Indices of the selected rules, ascending.
    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    /// Extends the genome with unselected bits up to `len`.
    pub fn padded(&self, len: usize) -> Self {
        let mut bits = self.0.clone();
        if bits.len() < len {
            bits.resize(len, false);
        }
        Self(bits)
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Genome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Schema(format!("invalid genome character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// A genome together with the values it was evaluated to.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCandidate {
    genome: Genome,
    mse: f64,
    complexity: usize,
    fitness: f64,
}

impl SolutionCandidate {
    /// Wraps stored evaluation results, e.g. from a saved model.
    pub fn from_parts(genome: Genome, mse: f64, fitness: f64) -> Self {
        let complexity = genome.count_ones();
        Self {
            genome,
            mse,
            complexity,
            fitness,
        }
    }

    pub fn genome(&self) -> &Genome {
        &self.genome
    }

    pub fn mse(&self) -> f64 {
        self.mse
    }

    /// Number of selected rules.
    pub fn complexity(&self) -> usize {
        self.complexity
    }

    pub fn fitness(&self) -> f64 {
        self.fitness
    }

    /// Selected rules paired with their pool index.
    pub fn rules<'a>(&'a self, pool: &'a Pool) -> impl Iterator<Item = (usize, &'a Rule)> + 'a {
        self.genome.selected().filter_map(|k| pool.get(k).map(|r| (k, r)))
    }
}

/// Experience- and error-weighted mean of the selected rules matching `x`, or
/// `default` when none matches.
pub fn predict_mixed(candidate: &SolutionCandidate, pool: &Pool, x: &[f64], default: f64) -> Result<f64> {
    check_genome(candidate.genome(), pool)?;
    if let Some(rule) = pool.rules().first() {
        if rule.condition().dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: rule.condition().dim(),
                actual: x.len(),
            });
        }
    }
    Ok(mix(candidate.genome(), pool, x, default))
}

pub(crate) fn mix(genome: &Genome, pool: &Pool, x: &[f64], default: f64) -> f64 {
    mix_at(genome, pool, x, x, default)
}

/// Like `mix`, but matching is decided on `match_x` while submodels are
/// evaluated at `eval_x`.
pub(crate) fn mix_at(genome: &Genome, pool: &Pool, match_x: &[f64], eval_x: &[f64], default: f64) -> f64 {
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for k in genome.selected() {
        let rule = &pool.rules[k];
        if rule.condition().covers(match_x) {
            let w = mixing_weight(rule);
            numerator += w * rule.submodel().eval(eval_x);
            denominator += w;
        }
    }
    finish_mix(numerator, denominator, default)
}

#[inline]
fn finish_mix(numerator: f64, denominator: f64, default: f64) -> f64 {
    if denominator > 0.0 {
        numerator / denominator
    } else {
        default
    }
}

/// `targets[j] - prediction(features[j])`, with the training-target mean as
/// the fallback prediction.
pub fn solution_residuals(candidate: &SolutionCandidate, pool: &Pool, data: &Dataset) -> Result<Vec<f64>> {
    check_genome(candidate.genome(), pool)?;
    check_pool_dim(pool, data)?;
    let default = data.target_mean();
    Ok(data
        .rows()
        .zip(data.targets())
        .map(|(x, y)| y - mix(candidate.genome(), pool, x, default))
        .collect())
}

pub(crate) fn check_genome(genome: &Genome, pool: &Pool) -> Result<()> {
    if genome.len() != pool.len() {
        return Err(Error::DimensionMismatch {
            expected: pool.len(),
            actual: genome.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_pool_dim(pool: &Pool, data: &Dataset) -> Result<()> {
    match pool.rules().first() {
        Some(rule) if rule.condition().dim() != data.n_features() => Err(Error::DimensionMismatch {
            expected: rule.condition().dim(),
            actual: data.n_features(),
        }),
        _ => Ok(()),
    }
}

/// Precomputed matches and submodel outputs of every pool rule on a dataset.
///
/// Summation happens in the same order as [`mix`], so predictions made
/// through the table are bitwise identical to [`predict_mixed`].
pub(crate) struct MatchTable {
    weights: Vec<f64>,
    // (row, submodel output) for every row the rule matches.
    entries: Vec<Vec<(usize, f64)>>,
    n_rows: usize,
    default: f64,
}

impl MatchTable {
    pub(crate) fn new(pool: &Pool, data: &Dataset, default: f64) -> Self {
        let entries = pool
            .iter()
            .map(|rule| {
                data.rows()
                    .enumerate()
                    .filter(|(_, x)| rule.condition().covers(x))
                    .map(|(i, x)| (i, rule.submodel().eval(x)))
                    .collect()
            })
            .collect();
        Self {
            weights: pool.iter().map(mixing_weight).collect(),
            entries,
            n_rows: data.n_rows(),
            default,
        }
    }

    pub(crate) fn predictions(&self, genome: &Genome) -> Vec<f64> {
        let mut numerator = vec![0.0; self.n_rows];
        let mut denominator = vec![0.0; self.n_rows];
        for k in genome.selected() {
            let w = self.weights[k];
            for &(row, p) in &self.entries[k] {
                numerator[row] += w * p;
                denominator[row] += w;
            }
        }
        numerator
            .into_iter()
            .zip(denominator)
            .map(|(n, d)| finish_mix(n, d, self.default))
            .collect()
    }

    pub(crate) fn mse(&self, genome: &Genome, targets: &[f64]) -> f64 {
        mean_squared_error(&self.predictions(genome), targets)
    }
}

pub(crate) fn mean_squared_error(predictions: &[f64], targets: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            let r = y - p;
            r * r
        })
        .sum::<f64>()
        / targets.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::{IntervalCondition, LinearSubmodel};

    fn rule(lower: f64, upper: f64, slope: f64, intercept: f64, experience: usize, error: f64) -> Rule {
        Rule::from_parts(
            IntervalCondition::new(vec![lower], vec![upper]).unwrap(),
            LinearSubmodel {
                coefficients: vec![slope],
                intercept,
            },
            experience,
            error,
            0.5,
        )
        .unwrap()
    }

    fn candidate(bits: &str) -> SolutionCandidate {
        SolutionCandidate::from_parts(bits.parse().unwrap(), 0.0, 0.0)
    }

    #[test]
    fn genome_text_round_trip() {
        let g: Genome = "0101011".parse().unwrap();
        assert_eq!(g.to_string(), "0101011");
        assert_eq!(g.count_ones(), 4);
        assert_eq!(g.selected().collect::<Vec<_>>(), vec![1, 3, 5, 6]);
        assert!("01x".parse::<Genome>().is_err());
        assert_eq!(g.padded(9).to_string(), "010101100");
    }

    #[test]
    fn pool_refuses_degenerate_rules() {
        let mut pool = Pool::new();
        assert_eq!(pool.push(rule(0.0, 1.0, 1.0, 0.0, 3, 0.1)).unwrap(), 0);
        assert!(pool.push(rule(0.0, 1.0, 1.0, 0.0, 0, 0.1)).is_err());
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn single_matching_rule_predicts_alone() {
        let mut pool = Pool::new();
        pool.push(rule(0.0, 1.0, 2.0, 1.0, 10, 0.3)).unwrap();
        pool.push(rule(2.0, 3.0, -5.0, 0.0, 10, 0.3)).unwrap();
        let p = predict_mixed(&candidate("11"), &pool, &[0.5], 9.0).unwrap();
        assert_eq!(p, 2.0);
    }

    #[test]
    fn equal_weights_average() {
        let mut pool = Pool::new();
        pool.push(rule(0.0, 1.0, 0.0, 1.0, 4, 0.2)).unwrap();
        pool.push(rule(0.0, 1.0, 0.0, 3.0, 4, 0.2)).unwrap();
        let p = predict_mixed(&candidate("11"), &pool, &[0.5], 9.0).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_or_unselected_falls_back_to_default() {
        let mut pool = Pool::new();
        pool.push(rule(0.0, 1.0, 0.0, 1.0, 4, 0.2)).unwrap();
        assert_eq!(predict_mixed(&candidate("1"), &pool, &[5.0], -2.5).unwrap(), -2.5);
        assert_eq!(predict_mixed(&candidate("0"), &pool, &[0.5], -2.5).unwrap(), -2.5);
    }

    #[test]
    fn genome_length_must_match_pool() {
        let mut pool = Pool::new();
        pool.push(rule(0.0, 1.0, 0.0, 1.0, 4, 0.2)).unwrap();
        assert!(predict_mixed(&candidate("10"), &pool, &[0.5], 0.0).is_err());
        assert!(predict_mixed(&candidate("1"), &pool, &[0.5, 1.0], 0.0).is_err());
    }

    #[test]
    fn weights_favour_experience_and_accuracy() {
        let mut pool = Pool::new();
        pool.push(rule(0.0, 1.0, 0.0, 0.0, 1, 0.0)).unwrap();
        pool.push(rule(0.0, 1.0, 0.0, 1.0, 1, 1.0)).unwrap();
        let p = predict_mixed(&candidate("11"), &pool, &[0.5], 0.0).unwrap();
        assert!(p < 1e-5);
    }

    #[test]
    fn empty_solution_residuals_are_deviations_from_mean() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 2.0, 6.0]).unwrap();
        let mut pool = Pool::new();
        pool.push(rule(0.0, 2.0, 1.0, 0.0, 3, 0.5)).unwrap();
        let r = solution_residuals(&candidate("0"), &pool, &data).unwrap();
        assert_eq!(r, vec![-2.0, -1.0, 3.0]);
    }

    #[test]
    fn perfect_rule_leaves_no_residual() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 3.0, 5.0]).unwrap();
        let mut pool = Pool::new();
        pool.push(rule(0.0, 2.0, 2.0, 1.0, 3, 0.0)).unwrap();
        let r = solution_residuals(&candidate("1"), &pool, &data).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn match_table_agrees_bitwise_with_direct_mixing() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 39.0]).collect();
        let targets: Vec<f64> = rows.iter().map(|x| (x[0] * 7.0).sin()).collect();
        let data = Dataset::from_rows(&rows, targets).unwrap();
        let mut pool = Pool::new();
        pool.push(rule(0.0, 0.6, 1.3, -0.2, 24, 0.07)).unwrap();
        pool.push(rule(0.3, 1.0, -0.7, 0.9, 28, 0.11)).unwrap();
        pool.push(rule(0.1, 0.2, 0.0, 0.4, 4, 0.0)).unwrap();
        let default = data.target_mean();
        let table = MatchTable::new(&pool, &data, default);
        for bits in ["000", "101", "111", "011", "110"] {
            let c = candidate(bits);
            let fast = table.predictions(c.genome());
            for (x, p) in data.rows().zip(&fast) {
                assert_eq!(predict_mixed(&c, &pool, x, default).unwrap().to_bits(), p.to_bits());
            }
        }
    }
}
