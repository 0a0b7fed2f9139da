//! The `rulemix` command-line tool.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, bad config),
//! 2 for data errors (unreadable or malformed CSV and model files).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rulemix::io::{load_config, load_csv, load_features, load_labeled, load_model, save_model};
use rulemix::{fit, Dataset, Metrics, Model, TrainingConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "rulemix",
    version,
    about = "Interval-rule regression: train, predict, evaluate, inspect"
)]
struct Cli {
    /// CSV files have no header row; columns are then referred to by index.
    #[arg(long, global = true)]
    no_header: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write it to a file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Target column name, or zero-based index.
        #[arg(long)]
        target: String,
        /// Config file; defaults apply to every unset key.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `rng_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write one prediction per input row as a CSV column.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print metrics of a model on a labelled file as key=value lines.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// K-fold cross-validation.
    Cv {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Drives the fold shuffle and each fold's training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the rules of a model.
    Inspect {
        #[arg(long)]
        model: PathBuf,
        /// List every pool rule, not just the selected ones.
        #[arg(long)]
        all: bool,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<rulemix::Error> for Failure {
    fn from(e: rulemix::Error) -> Self {
        Self {
            code: if e.is_usage() { EXIT_USAGE } else { EXIT_DATA },
            message: e.to_string(),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("{}: {e}", path.display()),
    })
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: Cli) -> Result<String, Failure> {
    let header = !cli.no_header;
    match cli.command {
        Command::Fit {
            data,
            target,
            config,
            out,
            seed,
        } => {
            let data = load_csv(&data, &target, header)?;
            let config = resolve_config(config.as_deref(), seed)?;
            let model = fit(&data, &config)?;
            save_model(&model, &out)?;
            let last = model.history.last().expect("fit runs at least one phase");
            Ok(format!(
                "phases={}\npool_size={}\ncomplexity={}\ntrain_mse={}\n",
                model.history.len(),
                last.pool_size,
                last.complexity,
                last.mse
            ))
        }
        Command::Predict { model, data, out } => {
            let model = load_model(&model)?;
            let rows = load_features(&data, header, &model.feature_names)?;
            let predictions = model.predict(rows.iter().map(Vec::as_slice))?;
            let mut text = String::new();
            if header {
                text.push_str("prediction\n");
            }
            for p in predictions {
                writeln!(text, "{p}").unwrap();
            }
            write_file(&out, &text)?;
            Ok(String::new())
        }
        Command::Eval { model, data } => {
            let model = load_model(&model)?;
            let data = load_labeled(&data, header, &model.feature_names, &model.target_name)?;
            Ok(metrics_lines(&model.score(&data)?))
        }
        Command::Cv {
            data,
            target,
            config,
            folds,
            seed,
        } => {
            let data = load_csv(&data, &target, header)?;
            let config = resolve_config(config.as_deref(), seed)?;
            cross_validate(&data, &config, folds)
        }
        Command::Inspect { model, all } => Ok(inspect(&load_model(&model)?, all)),
    }
}

fn resolve_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainingConfig, Failure> {
    let mut config = match path {
        Some(p) => load_config(p).map_err(|e| match e {
            rulemix::Error::Io(io) => Failure::usage(format!("{}: {io}", p.display())),
            other => other.into(),
        })?,
        None => TrainingConfig::default(),
    };
    if let Some(seed) = seed {
        config.rng_seed = seed;
    }
    Ok(config)
}

fn metrics_lines(m: &Metrics) -> String {
    format!(
        "mse={}\nr2={}\ncomplexity={}\npool_size={}\nmean_rule_volume={}\n",
        m.mse, m.r2, m.complexity, m.pool_size, m.mean_rule_volume
    )
}

/// Splits `0..n` into `k` disjoint folds after a seeded shuffle. The first
/// `n % k` folds get one extra row.
pub fn fold_partition(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    folds
}

fn cross_validate(data: &Dataset, config: &TrainingConfig, k: usize) -> Result<String, Failure> {
    if k < 2 {
        return Err(Failure::usage("--folds must be at least 2"));
    }
    if k > data.n_rows() {
        return Err(Failure::usage(format!(
            "--folds {k} exceeds the {} data rows",
            data.n_rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let folds = fold_partition(data.n_rows(), k, &mut rng);
    let seeds: Vec<u64> = (0..k).map(|_| rng.random()).collect();

    let results: Vec<(usize, usize, Metrics)> = folds
        .par_iter()
        .zip(&seeds)
        .map(|(test_idx, &seed)| {
            let mut in_test = vec![false; data.n_rows()];
            for &i in test_idx {
                in_test[i] = true;
            }
            let train_idx: Vec<usize> = (0..data.n_rows()).filter(|&i| !in_test[i]).collect();
            let train = data.select_rows(&train_idx)?;
            let test = data.select_rows(test_idx)?;
            let fold_config = TrainingConfig {
                rng_seed: seed,
                ..config.clone()
            };
            let model: Model = fit(&train, &fold_config)?;
            Ok((train.n_rows(), test.n_rows(), model.score(&test)?))
        })
        .collect::<rulemix::Result<_>>()?;

    let mut out = String::new();
    for (f, (n_train, n_test, m)) in results.iter().enumerate() {
        writeln!(
            out,
            "fold={f} n_train={n_train} n_test={n_test} mse={} r2={} complexity={} pool_size={} mean_rule_volume={}",
            m.mse, m.r2, m.complexity, m.pool_size, m.mean_rule_volume
        )
        .unwrap();
    }
    type Field = fn(&Metrics) -> f64;
    let summary: [(&str, Field); 4] = [
        ("mse", |m| m.mse),
        ("r2", |m| m.r2),
        ("complexity", |m| m.complexity as f64),
        ("mean_rule_volume", |m| m.mean_rule_volume),
    ];
    for (name, get) in summary {
        let values: Vec<f64> = results.iter().map(|(_, _, m)| get(m)).collect();
        let (mean, std) = mean_std(&values);
        writeln!(out, "{name}_mean={mean}\n{name}_std={std}").unwrap();
    }
    Ok(out)
}

/// Mean and sample standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 })
}

fn inspect(model: &Model, all: bool) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{} features -> {}; {} of {} rules selected; unmatched inputs predict {}",
        model.n_features(),
        model.target_name,
        model.best.complexity(),
        model.pool.len(),
        model.target_scaling.to_target(model.default_prediction)
    )
    .unwrap();
    let selected = model.best.genome().bits();
    for (k, rule) in model.pool.iter().enumerate() {
        if !all && !selected[k] {
            continue;
        }
        let (submodel, error) = model.rule_in_target_units(rule);
        let mark = if all && selected[k] { " (selected)" } else { "" };
        writeln!(out, "\nrule {k}{mark}").unwrap();
        let cond = rule.condition();
        for (i, name) in model.feature_names.iter().enumerate() {
            writeln!(out, "  {name} in [{}, {}]", cond.lower()[i], cond.upper()[i]).unwrap();
        }
        let mut line = format!("  {} = {}", model.target_name, submodel.intercept);
        for (c, name) in submodel.coefficients.iter().zip(&model.feature_names) {
            let sign = if c.is_sign_negative() { '-' } else { '+' };
            write!(line, " {sign} {}*{name}", c.abs()).unwrap();
        }
        writeln!(out, "{line}").unwrap();
        writeln!(out, "  experience {}", rule.experience()).unwrap();
        writeln!(out, "  error {error}").unwrap();
        writeln!(out, "  fitness {}", rule.fitness()).unwrap();
    }
    out
}
