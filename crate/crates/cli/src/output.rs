use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use finsler_core::ModelConfig;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Write {
            path: "<stdout>".into(),
            source,
        }),
    }
}

/// Everything needed to rerun a command: recorded next to each output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: ModelConfig,
    pub options: serde_json::Value,
    pub seeds: Vec<u64>,
    pub tolerances: serde_json::Value,
    pub tool_version: String,
    pub wall_clock_unix: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &ModelConfig,
        options: serde_json::Value,
        seeds: Vec<u64>,
        tolerances: serde_json::Value,
    ) -> Self {
        RunManifest {
            command: command.into(),
            argv: std::env::args().collect(),
            config: config.clone(),
            options,
            seeds,
            tolerances,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            outputs: Vec::new(),
        }
    }

    /// Writes `<out>.manifest.json` beside the output file.
    pub fn write_beside(mut self, out: &Path) -> CliResult<()> {
        self.outputs.push(out.to_path_buf());
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        write_atomic(Path::new(&name), &to_json(&self)?)
    }
}

/// Rows of floats as CSV, with 13 significant digits.
pub fn float_csv(header: &[String], rows: &[Vec<f64>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Serialize(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:.12e}"))).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))
}
