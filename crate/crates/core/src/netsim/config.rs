use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean up and down durations of one compute node, in hours.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReliability {
    pub mtbf_hours: f64,
    pub mttr_hours: f64,
}

impl NodeReliability {
    pub fn never_fails() -> Self {
        Self {
            mtbf_hours: f64::INFINITY,
            mttr_hours: 1.0,
        }
    }

    pub fn availability(&self) -> f64 {
        if self.mtbf_hours.is_infinite() {
            1.0
        } else {
            self.mtbf_hours / (self.mtbf_hours + self.mttr_hours)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// One entry per compute node, upstream first, or a single entry shared
    /// by all of them. The cloud never fails.
    pub nodes: Vec<NodeReliability>,
    #[serde(default = "default_interval")]
    pub heartbeat_interval_s: f64,
    /// Silence, in heartbeat intervals, after which a node is declared dead.
    #[serde(default = "default_timeout")]
    pub timeout_intervals: f64,
    #[serde(default = "default_rate")]
    pub request_rate_per_hour: f64,
    pub horizon_hours: f64,
    /// Width of the accuracy-over-time windows.
    #[serde(default = "default_window")]
    pub window_hours: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_interval() -> f64 {
    1.0
}
fn default_timeout() -> f64 {
    3.0
}
fn default_rate() -> f64 {
    1.0
}
fn default_window() -> f64 {
    1000.0
}

pub const NORMAL_PRESET: &str = include_str!("../../presets/normal.sim");

impl SimConfig {
    pub fn uniform(compute_nodes: usize, mtbf_hours: f64, mttr_hours: f64, horizon_hours: f64, seed: u64) -> Self {
        Self {
            nodes: vec![NodeReliability { mtbf_hours, mttr_hours }; compute_nodes],
            heartbeat_interval_s: default_interval(),
            timeout_intervals: default_timeout(),
            request_rate_per_hour: default_rate(),
            horizon_hours,
            window_hours: default_window(),
            seed,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "normal" | "normal.sim" => Self::from_toml(NORMAL_PRESET),
            other => Err(Error::config(format!("unknown simulation preset '{other}'"))),
        }
    }

    /// Reliability of compute node `i`.
    pub fn node(&self, i: usize) -> NodeReliability {
        if self.nodes.len() == 1 {
            self.nodes[0]
        } else {
            self.nodes[i]
        }
    }

    pub fn heartbeat_interval_hours(&self) -> f64 {
        self.heartbeat_interval_s / 3600.0
    }

    pub fn timeout_hours(&self) -> f64 {
        self.timeout_intervals * self.heartbeat_interval_hours()
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.nodes.is_empty() {
            errs.push("nodes: at least one entry is required".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !(n.mtbf_hours > 0.0) {
                errs.push(format!("nodes[{i}].mtbf_hours must be > 0"));
            }
            if !(n.mttr_hours > 0.0 && n.mttr_hours.is_finite()) {
                errs.push(format!("nodes[{i}].mttr_hours must be finite and > 0"));
            }
        }
        if !(self.heartbeat_interval_s > 0.0 && self.heartbeat_interval_s.is_finite()) {
            errs.push("heartbeat_interval_s must be finite and > 0".into());
        }
        if !(self.timeout_intervals >= 2.0 && self.timeout_intervals.is_finite()) {
            errs.push("timeout_intervals must be >= 2".into());
        }
        if !(self.request_rate_per_hour >= 0.0 && self.request_rate_per_hour.is_finite()) {
            errs.push("request_rate_per_hour must be finite and >= 0".into());
        }
        if !(self.horizon_hours >= 0.0 && self.horizon_hours.is_finite()) {
            errs.push("horizon_hours must be finite and >= 0".into());
        }
        if !(self.window_hours > 0.0) {
            errs.push("window_hours must be > 0".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_preset_parses() {
        let c = SimConfig::preset("normal").unwrap();
        assert_eq!(c.nodes.len(), 1);
        assert!((c.nodes[0].availability() - 3521.0 / 3592.0).abs() < 1e-12);
    }

    #[test]
    fn short_timeout_is_rejected() {
        let mut c = SimConfig::uniform(2, 10.0, 1.0, 100.0, 0);
        c.timeout_intervals = 1.5;
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
    }
}
