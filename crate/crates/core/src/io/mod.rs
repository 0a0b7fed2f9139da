//! Dataset ingestion, configuration files and model persistence.

mod config;
mod csv_data;
mod model_file;

pub use config::{load_config, parse_config, render_config};
pub use csv_data::{load_csv, load_features, load_labeled};
pub use model_file::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
