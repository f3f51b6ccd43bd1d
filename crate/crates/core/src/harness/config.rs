use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::AblationAxis;
use crate::nn::OptimizerKind;
use crate::resilinet::{FailoutConfig, HyperWeightScheme, Scheme, TrainConfig};
use crate::topology::{FailureSetting, PartitionPlan, HEALTH_CLASSES, HEALTH_INPUT};

/// A preset name or a full inline plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanRef {
    Preset(String),
    Inline(PartitionPlan),
}

impl PlanRef {
    pub fn resolve(&self) -> Result<PartitionPlan> {
        match self {
            PlanRef::Preset(name) => PartitionPlan::preset(name),
            PlanRef::Inline(p) => Ok(p.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailoutMode {
    Off,
    Fixed,
    /// Drop rate of each node = its failure probability in `setting`.
    MatchFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailoutSpec {
    pub mode: FailoutMode,
    #[serde(default = "default_rate")]
    pub rate: f64,
}

fn default_rate() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default)]
    pub kind: DatasetKind,
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_samples")]
    pub samples_per_class: usize,
    /// Per-feature standard deviation around each class centre.
    #[serde(default = "default_spread")]
    pub spread: f64,
    /// Generation seed; the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Only rows with these labels are kept (all when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep_labels: Option<Vec<i64>>,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
}

fn default_features() -> usize {
    HEALTH_INPUT
}
fn default_classes() -> usize {
    HEALTH_CLASSES
}
fn default_samples() -> usize {
    200
}
fn default_spread() -> f64 {
    1.0
}
fn default_label_column() -> String {
    "label".into()
}
fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Synthetic,
            features: default_features(),
            classes: default_classes(),
            samples_per_class: default_samples(),
            spread: default_spread(),
            seed: None,
            path: None,
            label_column: default_label_column(),
            keep_labels: None,
            split: default_split(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    #[serde(default = "default_axis")]
    pub axis: AblationAxis,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_settings")]
    pub settings: Vec<String>,
}

fn default_axis() -> AblationAxis {
    AblationAxis::SkipConfig
}
fn default_repeats() -> usize {
    1
}
fn default_settings() -> Vec<String> {
    vec!["normal".into(), "poor".into(), "hazardous".into()]
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            axis: default_axis(),
            repeats: default_repeats(),
            settings: default_settings(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_plan")]
    pub plan: PlanRef,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Defaults to a fixed 10% for schemes that train with failout and off
    /// for the others.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failout: Option<FailoutSpec>,
    #[serde(default)]
    pub weights: HyperWeightScheme,
    #[serde(default)]
    pub inference_scaling: bool,
    #[serde(default = "default_setting")]
    pub setting: String,
    /// Custom per-node failure probabilities, deepest node first. Overrides
    /// the named setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_probs: Option<Vec<f64>>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_eval_mode")]
    pub eval_mode: EvalMode,
    #[serde(default = "default_draws")]
    pub mc_draws: usize,
    #[serde(default)]
    pub sweep: SweepOptions,
}

fn default_plan() -> PlanRef {
    PlanRef::Preset("health".into())
}
fn default_scheme() -> Scheme {
    Scheme::ResiliNet
}
fn default_setting() -> String {
    "normal".into()
}
fn default_epochs() -> usize {
    20
}
fn default_batch() -> usize {
    1024
}
fn default_lr() -> f64 {
    0.001
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_eval_mode() -> EvalMode {
    EvalMode::Exact
}
fn default_draws() -> usize {
    10_000
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// Reads TOML, or JSON when the extension is `.json`. A report file is
    /// accepted as well; its echoed config is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            let value = match value.get("config") {
                Some(c) if value.get("schema_version").is_some() => c.clone(),
                _ => value,
            };
            serde_json::from_value(value).map_err(|e| Error::config(format!("{}: {e}", path.display())))
        } else {
            Self::from_toml(&text)
        }
    }

    /// Canonical TOML form used for config echoes.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn plan(&self) -> Result<PartitionPlan> {
        self.plan.resolve()
    }

    pub fn failure_setting(&self, nodes: usize) -> Result<FailureSetting> {
        match &self.failure_probs {
            Some(p) => FailureSetting::new("custom", p.clone()),
            None => FailureSetting::named(&self.setting, nodes),
        }
    }

    pub fn failout_config(&self, setting: &FailureSetting) -> FailoutConfig {
        match &self.failout {
            None if self.scheme.allows_failout() => FailoutConfig::Fixed { rate: 0.1 },
            None => FailoutConfig::Off,
            Some(f) => match f.mode {
                FailoutMode::Off => FailoutConfig::Off,
                FailoutMode::Fixed => FailoutConfig::Fixed { rate: f.rate },
                FailoutMode::MatchFailure => FailoutConfig::MatchFailure {
                    setting: setting.clone(),
                },
            },
        }
    }

    pub fn train_config(&self, setting: &FailureSetting) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            failout: self.failout_config(setting),
        }
    }

    /// Checks the failure setting, and the sweep settings when `sweep` is
    /// set, against the plan's node count.
    pub fn validate_settings(&self, sweep: bool) -> Result<()> {
        let mut errs = self.field_errors();
        if errs.is_empty() {
            errs = self.setting_errors(sweep);
        } else if let Ok(plan) = self.plan() {
            if plan.topology().is_ok() {
                errs.extend(self.setting_errors(sweep));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn setting_errors(&self, sweep: bool) -> Vec<String> {
        let Ok(plan) = self.plan() else { return Vec::new() };
        let Ok(topo) = plan.topology() else { return Vec::new() };
        let mut errs = Vec::new();
        match self.failure_setting(plan.node_count()) {
            Err(e) => errs.push(format!("setting: {e}")),
            Ok(s) => {
                if let Err(e) = s.check(&topo) {
                    errs.push(format!("setting: {e}"));
                }
            }
        }
        if sweep {
            for name in &self.sweep.settings {
                if let Err(e) = FailureSetting::named(name, plan.node_count()) {
                    errs.push(format!("sweep.settings: {e}"));
                }
            }
        }
        errs
    }

    /// Field-level validation; every problem is reported at once.
    pub fn validate(&self) -> Result<()> {
        let errs = self.field_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn field_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let plan = match self.plan() {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(format!("plan: {e}"));
                None
            }
        };
        if self.batch_size == 0 {
            errs.push("batch_size: must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            errs.push("learning_rate: must be finite and > 0".into());
        }
        if self.mc_draws == 0 {
            errs.push("mc_draws: must be >= 1".into());
        }
        if let Some(f) = &self.failout {
            if !(0.0..=1.0).contains(&f.rate) {
                errs.push(format!("failout.rate: {} outside [0, 1]", f.rate));
            }
            if f.mode != FailoutMode::Off && !self.scheme.allows_failout() {
                errs.push(format!(
                    "failout.mode: scheme {} does not train with failout",
                    self.scheme
                ));
            }
        }
        if let Some(plan) = &plan {
            if let Err(e) = plan.topology() {
                errs.push(format!("plan: {e}"));
            }
            let d = &self.dataset;
            if d.kind == DatasetKind::Synthetic && (d.features != plan.input_dim || d.classes != plan.classes) {
                errs.push(format!(
                    "dataset: {} features / {} classes do not match the plan's {} / {}",
                    d.features, d.classes, plan.input_dim, plan.classes
                ));
            }
        }
        if self.sweep.repeats == 0 {
            errs.push("sweep.repeats: must be >= 1".into());
        }
        let d = &self.dataset;
        let total: f64 = d.split.iter().sum();
        if (total - 1.0).abs() > 1e-9 || d.split.iter().any(|f| *f < 0.0) {
            errs.push(format!(
                "dataset.split: fractions must be >= 0 and sum to 1, got {total}"
            ));
        }
        match d.kind {
            DatasetKind::Synthetic => {
                if d.features == 0 {
                    errs.push("dataset.features: must be >= 1".into());
                }
                if d.classes < 2 {
                    errs.push("dataset.classes: must be >= 2".into());
                }
                if d.samples_per_class == 0 {
                    errs.push("dataset.samples_per_class: must be >= 1".into());
                }
                if !(d.spread >= 0.0 && d.spread.is_finite()) {
                    errs.push("dataset.spread: must be finite and >= 0".into());
                }
            }
            DatasetKind::Csv => match &d.path {
                None => errs.push("dataset.path: required for csv datasets".into()),
                Some(p) if !p.exists() => errs.push(format!("dataset.path: {} does not exist", p.display())),
                Some(_) => {}
            },
        }
        errs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.batch_size, 1024);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.dataset.split, [0.8, 0.1, 0.1]);
        let s = c.failure_setting(4).unwrap();
        assert_eq!(c.failout_config(&s), FailoutConfig::Fixed { rate: 0.1 });
        c.validate().unwrap();
        c.validate_settings(true).unwrap();
    }

    #[test]
    fn vanilla_defaults_to_no_failout() {
        let c = RunConfig::from_toml("scheme = \"vanilla\"").unwrap();
        assert!(c.failout_config(&c.failure_setting(4).unwrap()).is_off());
        let bad = RunConfig::from_toml("scheme = \"vanilla\"\n[failout]\nmode = \"fixed\"").unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::from_toml("plan = \"three-node\"\nepochs = 3\n[sweep]\naxis = \"weight_scheme\"").unwrap();
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn missing_csv_path_names_the_field() {
        let c = RunConfig::from_toml("[dataset]\nkind = \"csv\"").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("dataset.path"), "{msg}");
    }
}
