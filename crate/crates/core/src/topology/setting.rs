use serde::{Deserialize, Serialize};

use super::plan::Topology;
use crate::error::{Error, Result};

/// Per-node inference failure probabilities, listed deepest node first (the
/// cloud leads with 0), i.e. in reverse node-index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureSetting {
    pub name: String,
    pub deepest_first: Vec<f64>,
}

const FOUR_NODE: [(&str, [f64; 4]); 3] = [
    ("normal", [0.0, 0.01, 0.04, 0.08]),
    ("poor", [0.0, 0.05, 0.09, 0.13]),
    ("hazardous", [0.0, 0.15, 0.20, 0.22]),
];

const THREE_NODE: [(&str, [f64; 3]); 3] = [
    ("normal", [0.0, 0.02, 0.04]),
    ("poor", [0.0, 0.05, 0.10]),
    ("hazardous", [0.0, 0.15, 0.20]),
];

pub const SETTING_NAMES: [&str; 3] = ["normal", "poor", "hazardous"];

impl FailureSetting {
    pub fn new(name: impl Into<String>, deepest_first: Vec<f64>) -> Result<Self> {
        let s = Self {
            name: name.into(),
            deepest_first,
        };
        if s.deepest_first.is_empty() {
            return Err(Error::config("failure setting lists no nodes"));
        }
        if let Some(p) = s.deepest_first.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::config(format!("failure probability {p} outside [0, 1]")));
        }
        if s.deepest_first[0] != 0.0 {
            return Err(Error::config("the cloud (first entry) must have failure probability 0"));
        }
        Ok(s)
    }

    /// Named setting for a chain of `nodes` physical nodes. `none` works for
    /// any size; `normal`, `poor` and `hazardous` exist for 3 and 4 nodes.
    pub fn named(name: &str, nodes: usize) -> Result<Self> {
        let key = name.to_ascii_lowercase();
        if key == "none" {
            return Self::no_failure(nodes);
        }
        let table: Option<Vec<f64>> = match nodes {
            4 => FOUR_NODE.iter().find(|(n, _)| *n == key).map(|(_, p)| p.to_vec()),
            3 => THREE_NODE.iter().find(|(n, _)| *n == key).map(|(_, p)| p.to_vec()),
            _ => None,
        };
        match table {
            Some(p) => Self::new(key, p),
            None => Err(Error::config(format!(
                "unknown failure setting '{name}' for {nodes} nodes"
            ))),
        }
    }

    pub fn no_failure(nodes: usize) -> Result<Self> {
        Self::new("none", vec![0.0; nodes])
    }

    /// The same probability on every non-cloud node.
    pub fn uniform(nodes: usize, p: f64) -> Result<Self> {
        let mut probs = vec![p; nodes];
        probs[0] = 0.0;
        Self::new(format!("uniform-{p}"), probs)
    }

    pub fn node_count(&self) -> usize {
        self.deepest_first.len()
    }

    /// Failure probability of node `node` (0-based, upstream first).
    pub fn failure_prob(&self, node: usize) -> f64 {
        self.deepest_first[self.deepest_first.len() - 1 - node]
    }

    pub fn reliability(&self, node: usize) -> f64 {
        1.0 - self.failure_prob(node)
    }

    pub fn check(&self, topology: &Topology) -> Result<()> {
        if self.node_count() != topology.node_count() {
            return Err(Error::config(format!(
                "setting '{}' has {} entries but the topology has {} nodes",
                self.name,
                self.node_count(),
                topology.node_count()
            )));
        }
        if self.failure_prob(topology.cloud) != 0.0 {
            return Err(Error::config("the cloud must never fail"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_health_reads_upstream_first() {
        let s = FailureSetting::named("Normal", 4).unwrap();
        assert_eq!(s.failure_prob(0), 0.08);
        assert_eq!(s.failure_prob(1), 0.04);
        assert_eq!(s.failure_prob(2), 0.01);
        assert_eq!(s.failure_prob(3), 0.0);
        assert!((s.reliability(0) - 0.92).abs() < 1e-15);
    }

    #[test]
    fn invalid_settings() {
        assert!(FailureSetting::new("x", vec![0.1, 0.2]).is_err());
        assert!(FailureSetting::new("x", vec![0.0, 1.2]).is_err());
        assert!(FailureSetting::named("awful", 4).is_err());
        assert!(FailureSetting::named("normal", 5).is_err());
        assert!(FailureSetting::named("none", 5).is_ok());
    }
}
