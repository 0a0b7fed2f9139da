//! Run configuration files: flat `key = value` lines with dotted keys, e.g.
//!
//! ```text
//! n_phases = 8
//! rng_seed = 42
//! discovery.lambda = 20
//! composition.mutation_rate = 0.02
//! ```
//!
//! Unset keys keep their defaults. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::training::TrainingConfig;

pub fn parse_config(text: &str) -> Result<TrainingConfig> {
    let config: TrainingConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<TrainingConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Renders every setting, defaults included, in the accepted file format.
pub fn render_config(config: &TrainingConfig) -> String {
    let value = toml::Value::try_from(config).expect("config serializes");
    let mut lines = Vec::new();
    flatten("", &value, &mut lines);
    lines.join("\n") + "\n"
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(table) => {
            // Scalars first so nested sections follow their parent's keys.
            let (nested, scalars): (Vec<_>, Vec<_>) = table.iter().partition(|(_, v)| v.is_table());
            for (key, v) in scalars.into_iter().chain(nested) {
                let name = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                flatten(&name, v, out);
            }
        }
        scalar => out.push(format!("{prefix} = {scalar}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_override_defaults() {
        let config = parse_config("n_phases = 3\ndiscovery.lambda = 7\ncomposition.mutation_rate = 0.1\n").unwrap();
        assert_eq!(config.n_phases, 3);
        assert_eq!(config.discovery.lambda, 7);
        assert_eq!(config.composition.mutation_rate, 0.1);
        assert_eq!(config.discovery.delta, TrainingConfig::default().discovery.delta);
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(parse_config("").unwrap(), TrainingConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("discovery.lamda = 7\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("lamda"), "{err}");
        assert!(parse_config("n_phase = 7\n").is_err());
    }

    #[test]
    fn constraints_are_enforced() {
        assert!(parse_config("composition.elitists = 40\n").unwrap_err().is_usage());
        assert!(parse_config("beta = -1.0\n").is_err());
        assert!(parse_config("n_phases = \"many\"\n").is_err());
    }

    #[test]
    fn rendered_config_parses_back() {
        let config = TrainingConfig {
            rng_seed: 99,
            ridge_lambda: 0.25,
            ..TrainingConfig::default()
        };
        let text = render_config(&config);
        assert!(text.contains("discovery.lambda = 20"), "{text}");
        assert_eq!(parse_config(&text).unwrap(), config);
    }
}
