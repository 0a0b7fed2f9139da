//! Solution composition: a generational genetic algorithm over bit strings
//! that select subsets of the pool. The pool itself is never modified.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fitness::{candidate_fitness, FitnessParams};
use crate::solution::{
    check_genome, check_pool_dim, mean_squared_error, mix, Genome, MatchTable, Pool, SolutionCandidate,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionParams {
    pub population_size: usize,
    pub tournament_k: usize,
    pub crossover_points: usize,
    pub crossover_prob: f64,
    /// Per-bit flip probability.
    pub mutation_rate: f64,
    /// Candidates copied unchanged into the next generation.
    pub elitists: usize,
    pub generations_per_phase: usize,
    pub fitness: FitnessParams,
}

impl Default for CompositionParams {
    fn default() -> Self {
        Self {
            population_size: 32,
            tournament_k: 3,
            crossover_points: 3,
            crossover_prob: 0.9,
            mutation_rate: 0.1,
            elitists: 2,
            generations_per_phase: 64,
            fitness: FitnessParams::default(),
        }
    }
}

impl CompositionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("population_size", self.population_size),
            ("tournament_k", self.tournament_k),
            ("crossover_points", self.crossover_points),
            ("generations_per_phase", self.generations_per_phase),
        ] {
            if value == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if self.tournament_k > self.population_size {
            return Err(Error::param("tournament_k", "must not exceed population_size"));
        }
        if self.elitists >= self.population_size {
            return Err(Error::param("elitists", "must be smaller than population_size"));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {p}")));
            }
        }
        self.fitness.validate()
    }
}

/// Scores a genome by its in-sample MSE and the number of rules it selects.
pub fn evaluate_candidate(
    genome: Genome,
    pool: &Pool,
    data: &Dataset,
    params: &FitnessParams,
) -> Result<SolutionCandidate> {
    check_genome(&genome, pool)?;
    check_pool_dim(pool, data)?;
    let default = data.target_mean();
    let predictions: Vec<f64> = data.rows().map(|x| mix(&genome, pool, x, default)).collect();
    let mse = mean_squared_error(&predictions, data.targets());
    scored(genome, mse, pool.len(), params)
}

fn scored(genome: Genome, mse: f64, pool_size: usize, params: &FitnessParams) -> Result<SolutionCandidate> {
    let fitness = if pool_size == 0 {
        // Nothing to select: only accuracy can be judged.
        crate::fitness::pseudo_accuracy(mse, params.beta)?
    } else {
        candidate_fitness(mse, genome.count_ones(), pool_size, params)?
    };
    Ok(SolutionCandidate::from_parts(genome, mse, fitness))
}

/// Strict preference: higher fitness, then fewer rules.
fn better(a: &SolutionCandidate, b: &SolutionCandidate) -> bool {
    a.fitness() > b.fitness() || (a.fitness() == b.fitness() && a.complexity() < b.complexity())
}

/// Draws `k` members with replacement and returns the index of the winner.
/// Ties go to the lower complexity, then to the earlier index.
pub fn tournament_select<R: Rng + ?Sized>(population: &[SolutionCandidate], k: usize, rng: &mut R) -> Result<usize> {
    if population.is_empty() {
        return Err(Error::param("population", "must not be empty"));
    }
    if k == 0 {
        return Err(Error::param("tournament_k", "must be at least 1"));
    }
    let mut winner = rng.random_range(0..population.len());
    for _ in 1..k {
        let i = rng.random_range(0..population.len());
        let (a, b) = (&population[i], &population[winner]);
        if better(a, b) || (!better(b, a) && i < winner) {
            winner = i;
        }
    }
    Ok(winner)
}

/// N-point crossover applied with probability `crossover_prob`; otherwise the
/// parents are returned unchanged.
pub fn crossover_npoint<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    n_points: usize,
    crossover_prob: f64,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if n_points == 0 || n_points >= a.len() {
        return Err(Error::param(
            "crossover_points",
            format!("need 1 <= n < {} for genomes of length {}", a.len(), a.len()),
        ));
    }
    if !(0.0..=1.0).contains(&crossover_prob) {
        return Err(Error::param(
            "crossover_prob",
            format!("must lie in [0, 1], got {crossover_prob}"),
        ));
    }
    if !rng.random_bool(crossover_prob) {
        return Ok((a.clone(), b.clone()));
    }
    // A cut at position c swaps the source parent from bit c onwards.
    let mut cuts: Vec<usize> = index::sample(rng, a.len() - 1, n_points)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();

    let mut first = a.clone();
    let mut second = b.clone();
    let mut swapped = false;
    let mut next_cut = cuts.iter().peekable();
    for i in 0..a.len() {
        while next_cut.next_if(|&&c| c == i).is_some() {
            swapped = !swapped;
        }
        if swapped {
            first.bits_mut()[i] = b.bits()[i];
            second.bits_mut()[i] = a.bits()[i];
        }
    }
    Ok((first, second))
}

/// Flips every bit independently with probability `rate`.
pub fn mutate_bits<R: Rng + ?Sized>(genome: &Genome, rate: f64, rng: &mut R) -> Result<Genome> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::param("mutation_rate", format!("must lie in [0, 1], got {rate}")));
    }
    let mut out = genome.clone();
    for bit in out.bits_mut() {
        if rng.random_bool(rate) {
            *bit = !*bit;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Composition {
    /// Best candidate evaluated during the run.
    pub best: SolutionCandidate,
    /// Final population.
    pub population: Vec<SolutionCandidate>,
    /// Best fitness in the population after initialization and after each
    /// generation.
    pub generation_best: Vec<f64>,
}

struct Evaluator<'a> {
    table: MatchTable,
    targets: &'a [f64],
    pool_size: usize,
    fitness: FitnessParams,
}

impl Evaluator<'_> {
    fn evaluate(&self, genome: Genome) -> Result<SolutionCandidate> {
        let mse = self.table.mse(&genome, self.targets);
        scored(genome, mse, self.pool_size, &self.fitness)
    }

    fn evaluate_all(&self, genomes: Vec<Genome>) -> Result<Vec<SolutionCandidate>> {
        genomes.into_par_iter().map(|g| self.evaluate(g)).collect()
    }
}

/// Evolves subsets of `pool` for `generations_per_phase` generations.
///
/// With `warm_start`, the given genomes are zero-padded to the current pool
/// size and seed the population (topped up with random genomes or truncated to
/// `population_size`). Otherwise every bit starts as a fair coin flip.
pub fn compose<R: Rng + ?Sized>(
    pool: &Pool,
    data: &Dataset,
    params: &CompositionParams,
    warm_start: Option<&[Genome]>,
    rng: &mut R,
) -> Result<Composition> {
    params.validate()?;
    if pool.is_empty() {
        return Err(Error::param("pool", "cannot compose from an empty pool"));
    }
    check_pool_dim(pool, data)?;
    let len = pool.len();

    let mut genomes: Vec<Genome> = warm_start
        .unwrap_or_default()
        .iter()
        .take(params.population_size)
        .map(|g| {
            if g.len() > len {
                Err(Error::DimensionMismatch {
                    expected: len,
                    actual: g.len(),
                })
            } else {
                Ok(g.padded(len))
            }
        })
        .collect::<Result<_>>()?;
    while genomes.len() < params.population_size {
        genomes.push(Genome::from_bits((0..len).map(|_| rng.random_bool(0.5)).collect()));
    }

    let evaluator = Evaluator {
        table: MatchTable::new(pool, data, data.target_mean()),
        targets: data.targets(),
        pool_size: len,
        fitness: params.fitness,
    };
    let mut population = evaluator.evaluate_all(genomes)?;
    let mut best = best_of(&population).clone();
    let mut generation_best = vec![best.fitness()];

    let cut_points = params.crossover_points.min(len.saturating_sub(1));
    for _ in 0..params.generations_per_phase {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (&population[i], &population[j]);
            b.fitness()
                .total_cmp(&a.fitness())
                .then(a.complexity().cmp(&b.complexity()))
                .then(i.cmp(&j))
        });
        let mut next: Vec<SolutionCandidate> = order[..params.elitists]
            .iter()
            .map(|&i| population[i].clone())
            .collect();

        let n_children = params.population_size - next.len();
        let mut children = Vec::with_capacity(n_children + 1);
        while children.len() < n_children {
            let a = population[tournament_select(&population, params.tournament_k, rng)?].genome();
            let b = population[tournament_select(&population, params.tournament_k, rng)?].genome();
            let (c1, c2) = if cut_points == 0 {
                (a.clone(), b.clone())
            } else {
                crossover_npoint(a, b, cut_points, params.crossover_prob, rng)?
            };
            children.push(mutate_bits(&c1, params.mutation_rate, rng)?);
            if children.len() < n_children {
                children.push(mutate_bits(&c2, params.mutation_rate, rng)?);
            }
        }
        next.extend(evaluator.evaluate_all(children)?);
        population = next;

        let generation_top = best_of(&population);
        if better(generation_top, &best) {
            best = generation_top.clone();
        }
        generation_best.push(generation_top.fitness());
    }

    Ok(Composition {
        best,
        population,
        generation_best,
    })
}

fn best_of(population: &[SolutionCandidate]) -> &SolutionCandidate {
    population
        .iter()
        .reduce(|best, c| if better(c, best) { c } else { best })
        .expect("population is never empty")
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::rule::{fit_rule, IntervalCondition};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn g(bits: &str) -> Genome {
        bits.parse().unwrap()
    }

    fn toy() -> (Pool, Dataset) {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 29.0]).collect();
        let targets = rows.iter().map(|x| (x[0] - 0.5).abs()).collect();
        let data = Dataset::from_rows(&rows, targets).unwrap();
        let mut pool = Pool::new();
        for (l, u) in [(0.0, 0.5), (0.5, 1.0), (0.0, 1.0), (0.2, 0.7)] {
            let c = IntervalCondition::new(vec![l], vec![u]).unwrap();
            pool.push(fit_rule(c, &data, 0.0).unwrap()).unwrap();
        }
        (pool, data)
    }

    fn evaluated(fitness: &[f64]) -> Vec<SolutionCandidate> {
        fitness
            .iter()
            .map(|&f| SolutionCandidate::from_parts(g("0"), 0.0, f))
            .collect()
    }

    #[test]
    fn empty_genome_scores_the_mean_predictor() {
        let (pool, data) = toy();
        let c = evaluate_candidate(g("0000"), &pool, &data, &FitnessParams::default()).unwrap();
        let mean = data.target_mean();
        let expected = data.targets().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 30.0;
        assert!((c.mse() - expected).abs() < 1e-15);
        assert_eq!(c.complexity(), 0);
    }

    #[test]
    fn evaluation_is_reproducible_and_consistent() {
        let (pool, data) = toy();
        let params = FitnessParams::default();
        for bits in ["1100", "0110", "1111", "0001"] {
            let a = evaluate_candidate(g(bits), &pool, &data, &params).unwrap();
            let b = evaluate_candidate(g(bits), &pool, &data, &params).unwrap();
            assert_eq!(a, b);
            let f = candidate_fitness(a.mse(), a.complexity(), pool.len(), &params).unwrap();
            assert_eq!(a.fitness(), f);
            let table = MatchTable::new(&pool, &data, data.target_mean());
            assert_eq!(table.mse(a.genome(), data.targets()).to_bits(), a.mse().to_bits());
        }
        assert!(evaluate_candidate(g("11"), &pool, &data, &params).is_err());
    }

    #[test]
    fn tournament_of_one_is_uniform() {
        let pop = evaluated(&[0.1, 0.9, 0.5, 0.3]);
        let mut r = rng(1);
        let mut counts = [0usize; 4];
        let draws = 8000;
        for _ in 0..draws {
            counts[tournament_select(&pop, 1, &mut r).unwrap()] += 1;
        }
        let sd = (draws as f64 * 0.25 * 0.75).sqrt();
        assert!(
            counts.iter().all(|&c| (c as f64 - 2000.0).abs() <= 3.0 * sd),
            "{counts:?}"
        );
    }

    #[test]
    fn binary_tournament_odds() {
        // Four equally likely ordered draws; the better candidate wins three.
        let pop = evaluated(&[0.9, 0.1]);
        let mut r = rng(2);
        let trials = 10_000;
        let wins = (0..trials)
            .filter(|_| tournament_select(&pop, 2, &mut r).unwrap() == 0)
            .count();
        let sd = (trials as f64 * 0.75 * 0.25).sqrt();
        assert!((wins as f64 - 7500.0).abs() <= 3.0 * sd, "{wins}");
    }

    #[test]
    fn tournament_ties_prefer_fewer_rules() {
        let pop = vec![
            SolutionCandidate::from_parts(g("111"), 0.0, 0.5),
            SolutionCandidate::from_parts(g("100"), 0.0, 0.5),
        ];
        let mut r = rng(3);
        // The sparse candidate wins unless both draws land on the dense one.
        let wins = (0..4000)
            .filter(|_| tournament_select(&pop, 2, &mut r).unwrap() == 1)
            .count();
        assert!(wins > 2800, "{wins}");
        assert!(tournament_select(&[], 2, &mut r).is_err());
    }

    #[test]
    fn crossover_without_probability_copies() {
        let (a, b) = (g("1111000011"), g("0000111100"));
        let (c1, c2) = crossover_npoint(&a, &b, 3, 0.0, &mut rng(4)).unwrap();
        assert_eq!((c1, c2), (a, b));
    }

    #[test]
    fn crossover_of_identical_parents_is_identity() {
        let a = g("1011001110");
        let (c1, c2) = crossover_npoint(&a, &a, 4, 1.0, &mut rng(5)).unwrap();
        assert_eq!(c1, a);
        assert_eq!(c2, a);
    }

    #[test]
    fn crossover_conserves_bits_per_position() {
        let mut r = rng(6);
        let a = g("1111111111111111");
        let b = g("0000000000000000");
        for n in 1..15 {
            let (c1, c2) = crossover_npoint(&a, &b, n, 1.0, &mut r).unwrap();
            for i in 0..16 {
                assert_ne!(c1.bits()[i], c2.bits()[i]);
            }
            // Number of segment boundaries equals the number of cuts.
            let switches = c1.bits().windows(2).filter(|w| w[0] != w[1]).count();
            assert_eq!(switches, n);
        }
    }

    #[test]
    fn crossover_rejects_bad_arguments() {
        let mut r = rng(7);
        assert!(crossover_npoint(&g("101"), &g("10"), 1, 1.0, &mut r).is_err());
        assert!(crossover_npoint(&g("101"), &g("100"), 3, 1.0, &mut r).is_err());
        assert!(crossover_npoint(&g("101"), &g("100"), 0, 1.0, &mut r).is_err());
    }

    #[test]
    fn mutation_extremes_and_moments() {
        let mut r = rng(8);
        let a = g("1100101");
        assert_eq!(mutate_bits(&a, 0.0, &mut r).unwrap(), a);
        assert_eq!(mutate_bits(&a, 1.0, &mut r).unwrap(), g("0011010"));
        let zeros = Genome::zeros(1000);
        let flipped = mutate_bits(&zeros, 0.5, &mut r).unwrap().count_ones();
        let sd = (1000.0f64 * 0.25).sqrt();
        assert!((flipped as f64 - 500.0).abs() <= 3.0 * sd, "{flipped}");
        assert!(mutate_bits(&a, 1.5, &mut r).is_err());
    }

    #[test]
    fn elitism_keeps_best_fitness_monotone() {
        let (pool, data) = toy();
        let params = CompositionParams {
            population_size: 8,
            generations_per_phase: 30,
            mutation_rate: 0.3,
            ..CompositionParams::default()
        };
        let out = compose(&pool, &data, &params, None, &mut rng(9)).unwrap();
        assert!(out.generation_best.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.population.len(), 8);
        assert!(out.population.iter().all(|c| c.genome().len() == pool.len()));
        let again = evaluate_candidate(out.best.genome().clone(), &pool, &data, &params.fitness).unwrap();
        assert_eq!(again, out.best);
    }

    #[test]
    fn single_rule_pool_picks_the_better_genome() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let targets = rows.iter().map(|x| 0.5 * x[0] + 1.0).collect();
        let data = Dataset::from_rows(&rows, targets).unwrap();
        let mut pool = Pool::new();
        pool.push(fit_rule(IntervalCondition::full(data.bounds()), &data, 0.0).unwrap())
            .unwrap();
        let params = CompositionParams {
            population_size: 4,
            tournament_k: 2,
            generations_per_phase: 10,
            ..CompositionParams::default()
        };
        let options: Vec<_> = ["0", "1"]
            .iter()
            .map(|b| evaluate_candidate(g(b), &pool, &data, &params.fitness).unwrap())
            .collect();
        let oracle = if better(&options[1], &options[0]) {
            &options[1]
        } else {
            &options[0]
        };
        let out = compose(&pool, &data, &params, None, &mut rng(10)).unwrap();
        assert_eq!(out.best.genome(), oracle.genome());
        assert_eq!(out.best.fitness(), oracle.fitness());
    }

    #[test]
    fn warm_start_pads_prior_genomes() {
        let (pool, data) = toy();
        let params = CompositionParams {
            population_size: 4,
            elitists: 1,
            generations_per_phase: 1,
            ..CompositionParams::default()
        };
        let warm = vec![g("11"), g("01")];
        let out = compose(&pool, &data, &params, Some(&warm), &mut rng(11)).unwrap();
        let padded = evaluate_candidate(g("1100"), &pool, &data, &params.fitness).unwrap();
        assert!(out.best.fitness() >= padded.fitness());
        let too_long = vec![g("11111")];
        assert!(compose(&pool, &data, &params, Some(&too_long), &mut rng(11)).is_err());
    }

    #[test]
    fn compose_requires_rules_and_valid_params() {
        let (pool, data) = toy();
        let params = CompositionParams::default();
        assert!(compose(&Pool::new(), &data, &params, None, &mut rng(0)).is_err());
        let bad = CompositionParams { elitists: 32, ..params };
        assert!(compose(&pool, &data, &bad, None, &mut rng(0)).unwrap_err().is_usage());
    }
}
