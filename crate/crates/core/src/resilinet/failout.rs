use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mask::{AliveMask, MaskOrigin};
use super::scheme::Scheme;
use crate::error::{Error, Result};
use crate::topology::{FailureSetting, Topology};

/// Training-time node dropping. A fresh mask is drawn for every batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FailoutConfig {
    Off,
    /// Same drop rate on every compute node.
    Fixed {
        rate: f64,
    },
    /// Each node drops at its inference failure probability.
    MatchFailure {
        setting: FailureSetting,
    },
}

impl Default for FailoutConfig {
    fn default() -> Self {
        FailoutConfig::Fixed { rate: 0.1 }
    }
}

impl FailoutConfig {
    pub fn is_off(&self) -> bool {
        matches!(self, FailoutConfig::Off)
    }

    pub fn label(&self) -> String {
        match self {
            FailoutConfig::Off => "off".into(),
            FailoutConfig::Fixed { rate } => format!("{}%", rate * 100.0),
            FailoutConfig::MatchFailure { .. } => "Failure".into(),
        }
    }

    pub fn check(&self, topology: &Topology, scheme: Scheme) -> Result<()> {
        match self {
            FailoutConfig::Off => return Ok(()),
            FailoutConfig::Fixed { rate } if !(0.0..=1.0).contains(rate) => {
                return Err(Error::config(format!("failout rate {rate} outside [0, 1]")))
            }
            FailoutConfig::MatchFailure { setting } => setting.check(topology)?,
            FailoutConfig::Fixed { .. } => {}
        }
        if !scheme.allows_failout() {
            return Err(Error::config(format!(
                "scheme {scheme} does not train with failout; set failout to off"
            )));
        }
        Ok(())
    }

    /// Drop probability of `node` (0 for the cloud).
    pub fn drop_prob(&self, topology: &Topology, node: usize) -> f64 {
        if node == topology.cloud {
            return 0.0;
        }
        match self {
            FailoutConfig::Off => 0.0,
            FailoutConfig::Fixed { rate } => *rate,
            FailoutConfig::MatchFailure { setting } => setting.failure_prob(node),
        }
    }
}

/// Independent `b_i ~ Bernoulli(1 - f_i)` per compute node.
pub fn sample_failout_mask<R: Rng + ?Sized>(config: &FailoutConfig, topology: &Topology, rng: &mut R) -> AliveMask {
    let mut failed = Vec::new();
    for n in topology.compute_nodes() {
        let f = config.drop_prob(topology, n);
        if rng.random::<f64>() < f {
            failed.push(n);
        }
    }
    AliveMask::with_failed(topology, &failed, MaskOrigin::FailoutDraw)
}
