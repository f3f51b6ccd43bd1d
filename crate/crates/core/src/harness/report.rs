use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::nn::Real;
use crate::resilinet::{Scheme, TrainHistory};
use crate::topology::DistributedModel;

pub const SCHEMA_VERSION: &str = "1.0";
const SCHEMA_MAJOR: &str = "1";

/// Envelope shared by every report the CLI writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile<R> {
    pub schema_version: String,
    pub tool_version: String,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub results: R,
}

impl<R> ReportFile<R> {
    pub fn new(command: &str, config: &RunConfig, seed: u64, results: R) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            seed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            results,
        }
    }
}

fn check_version(v: Option<&str>) -> Result<()> {
    match v {
        Some(v) if v.split('.').next() == Some(SCHEMA_MAJOR) => Ok(()),
        Some(v) => Err(Error::Data(format!("unsupported schema version {v}"))),
        None => Err(Error::Data("missing schema_version".into())),
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_report<R: DeserializeOwned>(path: &Path) -> Result<ReportFile<R>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    check_version(value.get("schema_version").and_then(|v| v.as_str()))?;
    serde_json::from_value(value).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Trained model plus everything needed to regenerate its data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelArtifact<T: Real> {
    pub schema_version: String,
    pub precision: u32,
    pub scheme: Scheme,
    pub config: RunConfig,
    pub history: TrainHistory,
    pub model: DistributedModel<T>,
}

impl<T: Real> ModelArtifact<T> {
    /// The stored config drops the output directory so identical runs give
    /// identical bytes wherever they write.
    pub fn new(config: &RunConfig, history: TrainHistory, model: DistributedModel<T>) -> Self {
        let mut config = config.clone();
        config.out = RunConfig::default().out;
        Self {
            schema_version: SCHEMA_VERSION.into(),
            precision: T::BITS,
            scheme: config.scheme,
            config,
            history,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Precision-tagged artifact as read from disk.
pub enum LoadedModel {
    F32(ModelArtifact<f32>),
    F64(ModelArtifact<f64>),
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read model {}: {e}", path.display())))?;
        let corrupt = |e: serde_json::Error| Error::Data(format!("corrupt model artifact {}: {e}", path.display()));
        let value: serde_json::Value = serde_json::from_str(&text).map_err(corrupt)?;
        check_version(value.get("schema_version").and_then(|v| v.as_str()))?;
        let loaded = match value.get("precision").and_then(|p| p.as_u64()) {
            Some(32) => LoadedModel::F32(serde_json::from_value(value).map_err(corrupt)?),
            Some(64) => LoadedModel::F64(serde_json::from_value(value).map_err(corrupt)?),
            other => return Err(Error::Data(format!("corrupt model artifact: precision {other:?}"))),
        };
        match &loaded {
            LoadedModel::F32(a) => a.model.check()?,
            LoadedModel::F64(a) => a.model.check()?,
        }
        Ok(loaded)
    }
}
