//! Test-only oracles and data generators, independent of the library's
//! numerical code paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rulemix::Dataset;

/// Ridge regression by explicit inversion of the augmented normal equations.
///
/// The design matrix gets a trailing column of ones; the penalty matrix is
/// `ridge_lambda` on the coefficient diagonal and 0 for the intercept.
/// Returns `(coefficients, intercept)`.
pub fn ridge_oracle(rows: &[Vec<f64>], targets: &[f64], ridge_lambda: f64) -> (Vec<f64>, f64) {
    let d = rows[0].len();
    let p = d + 1;
    let augmented: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().copied().chain(std::iter::once(1.0)).collect())
        .collect();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (x, y) in augmented.iter().zip(targets) {
        for a in 0..p {
            rhs[a] += x[a] * y;
            for b in 0..p {
                gram[a][b] += x[a] * x[b];
            }
        }
    }
    for (a, row) in gram.iter_mut().enumerate().take(d) {
        row[a] += ridge_lambda;
    }
    let inverse = invert(gram);
    let solution: Vec<f64> = inverse
        .iter()
        .map(|row| row.iter().zip(&rhs).map(|(a, b)| a * b).sum())
        .collect();
    (solution[..d].to_vec(), solution[d])
}

/// Gauss-Jordan inversion with partial pivoting.
pub fn invert(mut m: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        assert!(m[pivot][col].abs() > 1e-300, "singular oracle system");
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = m[col][col];
        for j in 0..n {
            m[col][j] /= scale;
            inv[col][j] /= scale;
        }
        for r in 0..n {
            if r != col {
                let factor = m[r][col];
                if factor != 0.0 {
                    for j in 0..n {
                        m[r][j] -= factor * m[col][j];
                        inv[r][j] -= factor * inv[col][j];
                    }
                }
            }
        }
    }
    inv
}

/// `n` uniform draws on [-1, 1] with targets `f(x) + N(0, noise)`.
pub fn sample_1d(n: usize, noise: f64, seed: u64, f: impl Fn(f64) -> f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.random_range(-1.0..=1.0);
        let eps = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
        rows.push(vec![x]);
        targets.push(f(x) + eps);
    }
    Dataset::from_rows(&rows, targets).unwrap()
}

pub fn variance(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> f64 {
    predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / targets.len() as f64
}
