//! Synthetic datasets shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulemix::Dataset;

/// `n` rows of `dim` uniform features on [-1, 1] with a piecewise-linear target.
pub fn piecewise(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let targets = rows
        .iter()
        .map(|x| x[0].abs() + x.iter().skip(1).sum::<f64>() * 0.5)
        .collect();
    Dataset::from_rows(&rows, targets).expect("finite synthetic data")
}
