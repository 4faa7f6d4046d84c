//! File writers. CSV and JSON floats use the shortest representation that
//! parses back to the same value, so reruns compare byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::{CliError, Format};

pub const TOOL_VERSION: &str = concat!("qkr ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Health {
    pub edge_occupancy: f64,
    pub leakage: bool,
    pub norm_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub health: Option<Health>,
    /// Only in the standalone manifest file; embedded copies omit it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &'static str, config: impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            command,
            version: TOOL_VERSION,
            config: serde_json::to_value(config)?,
            health: None,
            wall_time_s: None,
        })
    }

    pub fn with_health(mut self, health: Health) -> Self {
        self.health = Some(health);
        self
    }

    fn timed(&self, elapsed: Duration) -> Self {
        Self {
            wall_time_s: Some(elapsed.as_secs_f64()),
            ..self.clone()
        }
    }
}

#[derive(Serialize)]
struct Document<'a, D: Serialize, F: Serialize> {
    manifest: &'a RunManifest,
    data: D,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<F>,
}

/// Writes into one output directory in one format.
pub struct Sink {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    /// `stem.csv` with one row per record, or `stem.json` holding
    /// `{manifest, data, fit?}`. CSV tables carry rows only.
    pub fn table<R: Serialize, D: Serialize, F: Serialize>(
        &mut self,
        stem: &str,
        manifest: &RunManifest,
        rows: &[R],
        json_data: D,
        fit: Option<F>,
    ) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let path = self.dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
                self.written.push(path);
            }
            Format::Json => {
                let path = self.dir.join(format!("{stem}.json"));
                let doc = Document {
                    manifest,
                    data: json_data,
                    fit,
                };
                write_json(&path, &doc)?;
                self.written.push(path);
            }
        }
        Ok(())
    }

    /// Standalone `manifest.json`, the only file that records wall time.
    pub fn manifest(&mut self, manifest: &RunManifest, elapsed: Duration) -> Result<(), CliError> {
        let path = self.dir.join("manifest.json");
        write_json(&path, &manifest.timed(elapsed))?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
