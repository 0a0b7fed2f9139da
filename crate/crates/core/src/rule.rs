//! Interval conditions, linear submodels and rule fitting.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, FeatureRange};
use crate::error::{Error, Result};

/// A closed hyperrectangle `lower[i] <= x[i] <= upper[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCondition {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl IntervalCondition {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::param("condition", "needs at least one dimension"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l <= u) {
                return Err(Error::param(
                    "condition",
                    format!("lower bound {l} exceeds upper bound {u} in dimension {i}"),
                ));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The condition covering every observed training input.
    pub fn full(bounds: &[FeatureRange]) -> Self {
        Self {
            lower: bounds.iter().map(|b| b.min).collect(),
            upper: bounds.iter().map(|b| b.max).collect(),
        }
    }

    /// Builds a condition from bounds that may lie outside the feature ranges
    /// and clips them back in. Each pair must satisfy `lower <= upper`.
    pub(crate) fn clipped(lower: Vec<f64>, upper: Vec<f64>, bounds: &[FeatureRange]) -> Self {
        debug_assert_eq!(lower.len(), bounds.len());
        let lower: Vec<f64> = lower.iter().zip(bounds).map(|(&l, b)| b.clamp(l)).collect();
        let upper = upper
            .iter()
            .zip(bounds)
            .zip(&lower)
            .map(|((&u, b), &l)| b.clamp(u).max(l))
            .collect();
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn matches(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.covers(x))
    }

    #[inline]
    pub(crate) fn covers(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(x)
            .all(|((l, u), v)| l <= v && v <= u)
    }
}

/// `intercept + coefficients · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSubmodel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearSubmodel {
    pub fn constant(dim: usize, intercept: f64) -> Self {
        Self {
            coefficients: vec![0.0; dim],
            intercept,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.coefficients.len(), x.len())?;
        Ok(self.eval(x))
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// A fitted rule. Rules are never modified once they enter a [`Pool`](crate::Pool).
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    condition: IntervalCondition,
    submodel: LinearSubmodel,
    experience: usize,
    error: f64,
    fitness: f64,
}

impl Rule {
    /// Assembles a rule from stored parts, e.g. when loading a saved model.
    pub fn from_parts(
        condition: IntervalCondition,
        submodel: LinearSubmodel,
        experience: usize,
        error: f64,
        fitness: f64,
    ) -> Result<Self> {
        check_dim(condition.dim(), submodel.coefficients.len())?;
        if !(error >= 0.0) {
            return Err(Error::param("error", format!("must be non-negative, got {error}")));
        }
        Ok(Self {
            condition,
            submodel,
            experience,
            error,
            fitness,
        })
    }

    pub fn condition(&self) -> &IntervalCondition {
        &self.condition
    }

    pub fn submodel(&self) -> &LinearSubmodel {
        &self.submodel
    }

    /// Number of training examples matched when the submodel was fitted.
    pub fn experience(&self) -> usize {
        self.experience
    }

    /// In-sample mean squared error over the matched examples.
    pub fn error(&self) -> f64 {
        self.error
    }

    pub fn fitness(&self) -> f64 {
        self.fitness
    }

    /// A rule that matched nothing at fit time.
    pub fn is_degenerate(&self) -> bool {
        self.experience == 0
    }

    pub fn with_fitness(mut self, fitness: f64) -> Self {
        self.fitness = fitness;
        self
    }

    pub fn matches(&self, x: &[f64]) -> Result<bool> {
        self.condition.matches(x)
    }

    /// Submodel output at `x`, whether or not the rule matches `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.submodel.predict(x)
    }
}

/// Fits a ridge submodel on the examples matched by `condition`.
///
/// The intercept is not penalized: the system is solved on mean-centered
/// inputs and targets and the intercept recovered from the means. A condition
/// matching no example yields a degenerate rule with infinite error.
pub fn fit_rule(condition: IntervalCondition, data: &Dataset, ridge_lambda: f64) -> Result<Rule> {
    let dim = data.n_features();
    check_dim(dim, condition.dim())?;
    if !(ridge_lambda >= 0.0) || !ridge_lambda.is_finite() {
        return Err(Error::param(
            "ridge_lambda",
            format!("must be finite and >= 0, got {ridge_lambda}"),
        ));
    }

    let matched: Vec<usize> = (0..data.n_rows()).filter(|&i| condition.covers(data.row(i))).collect();
    if matched.is_empty() {
        return Ok(Rule {
            condition,
            submodel: LinearSubmodel::constant(dim, 0.0),
            experience: 0,
            error: f64::INFINITY,
            fitness: 0.0,
        });
    }

    let n = matched.len() as f64;
    let targets = data.targets();
    let mut x_mean = vec![0.0; dim];
    let mut y_mean = 0.0;
    for &i in &matched {
        for (m, v) in x_mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
        y_mean += targets[i];
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    y_mean /= n;

    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut centered = vec![0.0; dim];
    for &i in &matched {
        for ((c, v), m) in centered.iter_mut().zip(data.row(i)).zip(&x_mean) {
            *c = v - m;
        }
        let yc = targets[i] - y_mean;
        for a in 0..dim {
            rhs[a] += centered[a] * yc;
            for b in a..dim {
                gram[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..dim {
        gram[(a, a)] += ridge_lambda;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let coefficients = solve_symmetric(gram, rhs);
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    let submodel = LinearSubmodel {
        coefficients,
        intercept,
    };

    let error = matched
        .iter()
        .map(|&i| {
            let r = targets[i] - submodel.eval(data.row(i));
            r * r
        })
        .sum::<f64>()
        / n;

    Ok(Rule {
        condition,
        submodel,
        experience: matched.len(),
        error,
        fitness: 0.0,
    })
}

/// Solves a symmetric positive semi-definite system. Singular systems (an
/// unregularized fit on a rank-deficient subsample) get the minimum-norm
/// least-squares solution.
fn solve_symmetric(gram: DMatrix<f64>, rhs: DVector<f64>) -> Vec<f64> {
    let dim = rhs.len();
    if gram.iter().all(|v| *v == 0.0) {
        return vec![0.0; dim];
    }
    let svd = gram.svd(true, true);
    let cutoff = svd.singular_values.max() * dim as f64 * f64::EPSILON * 16.0;
    match svd.solve(&rhs, cutoff) {
        Ok(sol) if sol.iter().all(|v| v.is_finite()) => sol.iter().copied().collect(),
        _ => vec![0.0; dim],
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond(lower: &[f64], upper: &[f64]) -> IntervalCondition {
        IntervalCondition::new(lower.to_vec(), upper.to_vec()).unwrap()
    }

    #[test]
    fn matching_uses_closed_intervals() {
        assert!(cond(&[0.0, 0.0], &[1.0, 1.0]).matches(&[1.0, 0.0]).unwrap());
        assert!(!cond(&[0.0], &[1.0]).matches(&[1.0000001]).unwrap());
        assert!(cond(&[-1.0], &[1.0]).matches(&[0.0]).unwrap());
    }

    #[test]
    fn matching_rejects_wrong_dimension() {
        let err = cond(&[0.0], &[1.0]).matches(&[0.5, 0.5]).unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        assert!(IntervalCondition::new(vec![1.0], vec![0.0]).is_err());
        assert!(IntervalCondition::new(vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn clipping_keeps_bounds_inside_ranges() {
        let bounds = [FeatureRange { min: 0.0, max: 1.0 }];
        let c = IntervalCondition::clipped(vec![-3.0], vec![0.5], &bounds);
        assert_eq!((c.lower()[0], c.upper()[0]), (0.0, 0.5));
        let c = IntervalCondition::clipped(vec![2.0], vec![3.0], &bounds);
        assert_eq!((c.lower()[0], c.upper()[0]), (1.0, 1.0));
    }

    #[test]
    fn submodel_prediction() {
        let m = LinearSubmodel::constant(2, 3.25);
        assert_eq!(m.predict(&[100.0, -7.0]).unwrap(), 3.25);
        let m = LinearSubmodel {
            coefficients: vec![1.0],
            intercept: 0.0,
        };
        assert_eq!(m.predict(&[3.5]).unwrap(), 3.5);
        let m = LinearSubmodel {
            coefficients: vec![2.0, -1.0],
            intercept: 1.0,
        };
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 2.0);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn exact_line_through_two_points() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0.0, 2.0]).unwrap();
        let rule = fit_rule(cond(&[0.0], &[1.0]), &data, 0.0).unwrap();
        assert_eq!(rule.experience(), 2);
        assert!((rule.submodel().coefficients[0] - 2.0).abs() < 1e-12);
        assert!(rule.submodel().intercept.abs() < 1e-12);
        assert!(rule.error() < 1e-24);
    }

    #[test]
    fn empty_match_is_degenerate() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0.0, 2.0]).unwrap();
        let rule = fit_rule(cond(&[0.4], &[0.6]), &data, 0.1).unwrap();
        assert!(rule.is_degenerate());
        assert_eq!(rule.experience(), 0);
        assert!(rule.error().is_infinite());
    }

    #[test]
    fn single_point_fits_a_constant() {
        let data = Dataset::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]], vec![4.0, 2.0]).unwrap();
        let rule = fit_rule(cond(&[0.0, 0.0], &[0.5, 1.0]), &data, 0.0).unwrap();
        assert_eq!(rule.experience(), 1);
        assert_eq!(rule.submodel().coefficients, vec![0.0, 0.0]);
        assert_eq!(rule.submodel().intercept, 4.0);
        assert_eq!(rule.error(), 0.0);
    }

    #[test]
    fn rank_deficient_unregularized_fit_stays_finite() {
        // Second feature is constant on the subsample.
        let rows = [vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]];
        let data = Dataset::from_rows(&rows, vec![1.0, 3.0, 5.0]).unwrap();
        let full = IntervalCondition::full(data.bounds());
        let rule = fit_rule(full, &data, 0.0).unwrap();
        assert!((rule.submodel().coefficients[0] - 2.0).abs() < 1e-9);
        assert!(rule.submodel().coefficients[1].abs() < 1e-9);
        assert!(rule.error() < 1e-18);
    }

    #[test]
    fn negative_ridge_lambda_is_rejected() {
        let data = Dataset::from_rows(&[vec![0.0]], vec![1.0]).unwrap();
        let full = IntervalCondition::full(data.bounds());
        assert!(fit_rule(full, &data, -1.0).unwrap_err().is_usage());
    }
}
