use std::path::Path;

use finsler_core::{make_model, MetricModel, ModelConfig};

use crate::error::{CliError, CliResult};

/// A validated model together with its configuration, defaults filled in.
pub struct LoadedModel {
    pub config: ModelConfig,
    pub model: MetricModel,
}

/// Accepts either a path to a JSON file or the JSON text itself.
pub fn parse_config(arg: &str) -> CliResult<LoadedModel> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(Path::new(arg)).map_err(|source| CliError::Read {
            path: arg.into(),
            source,
        })?
    };
    let config = ModelConfig::from_json(&text)?;
    let model = make_model(&config)?;
    Ok(LoadedModel {
        config: config.resolved(),
        model,
    })
}

/// The natural base point: the body's centre, or the chart origin.
pub fn default_point(model: &MetricModel) -> Vec<f64> {
    model
        .body()
        .map(|b| b.center().to_vec())
        .unwrap_or_else(|| vec![0.0; model.dim()])
}

pub fn check_len(flag: &'static str, v: &[f64], dim: usize) -> CliResult<()> {
    if v.len() != dim {
        return Err(CliError::option(
            flag,
            format!("expected {dim} comma-separated values, got {}", v.len()),
        ));
    }
    Ok(())
}
