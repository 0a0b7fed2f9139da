//! Training data and per-feature observed ranges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed `[min, max]` of one feature over the training inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

/// A dense regression dataset stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    n_features: usize,
    bounds: Vec<FeatureRange>,
    feature_names: Vec<String>,
    target_name: String,
}

impl Dataset {
    /// Builds a dataset from row vectors. Feature bounds are computed here and
    /// never change afterwards.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(flat, n_features, targets)
    }

    pub fn from_flat(features: Vec<f64>, n_features: usize, targets: Vec<f64>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidDataset("at least one feature is required".into()));
        }
        if targets.is_empty() {
            return Err(Error::InvalidDataset("at least one row is required".into()));
        }
        if features.len() != targets.len() * n_features {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not form {} rows of {n_features}",
                features.len(),
                targets.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        if let Some(row) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite target at row {row}")));
        }

        let mut bounds = vec![
            FeatureRange {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            };
            n_features
        ];
        for row in features.chunks_exact(n_features) {
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.min = b.min.min(v);
                b.max = b.max.max(v);
            }
        }

        Ok(Self {
            features,
            targets,
            n_features,
            bounds,
            feature_names: (0..n_features).map(|i| format!("x{i}")).collect(),
            target_name: "y".into(),
        })
    }

    /// Attaches column names. `feature_names` must have one entry per feature.
    pub fn with_names(mut self, feature_names: Vec<String>, target_name: String) -> Result<Self> {
        if feature_names.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: feature_names.len(),
            });
        }
        self.feature_names = feature_names;
        self.target_name = target_name;
        Ok(self)
    }

    /// Returns a dataset holding the given rows, in the given order. Feature
    /// bounds are recomputed from the subset.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Self::from_flat(features, self.n_features, targets)?
            .with_names(self.feature_names.clone(), self.target_name.clone())
    }

    /// Same rows and bounds with a new target column.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                actual: targets.len(),
            });
        }
        if let Some(row) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite target at row {row}")));
        }
        Ok(Self {
            targets,
            ..self.clone()
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn bounds(&self) -> &[FeatureRange] {
        &self.bounds
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target_mean(&self) -> f64 {
        mean(&self.targets)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_follow_observed_extremes() {
        let data = Dataset::from_rows(&[vec![0.0, 5.0], vec![2.0, -1.0], vec![1.0, 3.0]], vec![0.0; 3]).unwrap();
        assert_eq!(data.bounds()[0], FeatureRange { min: 0.0, max: 2.0 });
        assert_eq!(data.bounds()[1], FeatureRange { min: -1.0, max: 5.0 });
        assert_eq!(data.row(1), &[2.0, -1.0]);
    }

    #[test]
    fn rejects_non_finite_and_empty_input() {
        assert!(Dataset::from_rows(&[vec![f64::NAN]], vec![1.0]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0]], vec![f64::INFINITY]).is_err());
        assert!(Dataset::from_flat(vec![], 1, vec![]).is_err());
        assert!(Dataset::from_flat(vec![1.0], 0, vec![1.0]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0], vec![1.0, 2.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn select_rows_keeps_names() {
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0.0, 1.0, 2.0])
            .unwrap()
            .with_names(vec!["a".into()], "t".into())
            .unwrap();
        let sub = data.select_rows(&[2, 0]).unwrap();
        assert_eq!(sub.targets(), &[2.0, 0.0]);
        assert_eq!(sub.feature_names(), &["a".to_string()]);
        assert_eq!(sub.target_name(), "t");
    }
}
