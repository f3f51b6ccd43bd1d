use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{node_label, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskOrigin {
    FailoutDraw,
    ScenarioEnum,
    MonteCarloDraw,
    SimEvent,
}

/// Alive bit per physical node. The cloud is always alive; the input is not
/// part of the mask and never fails.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AliveMask {
    bits: Vec<bool>,
    origin: MaskOrigin,
}

impl AliveMask {
    pub fn all_alive(topology: &Topology) -> Self {
        Self {
            bits: vec![true; topology.node_count()],
            origin: MaskOrigin::ScenarioEnum,
        }
    }

    /// Marks `failed` dead; a request to fail the cloud is ignored.
    pub fn with_failed(topology: &Topology, failed: &[usize], origin: MaskOrigin) -> Self {
        Self::with_failed_nodes(topology.node_count(), topology.cloud, failed, origin)
    }

    pub fn with_failed_nodes(nodes: usize, cloud: usize, failed: &[usize], origin: MaskOrigin) -> Self {
        let mut bits = vec![true; nodes];
        for &n in failed {
            if n != cloud && n < nodes {
                bits[n] = false;
            }
        }
        Self { bits, origin }
    }

    pub fn from_bits(bits: Vec<bool>, topology: &Topology, origin: MaskOrigin) -> Result<Self> {
        if bits.len() != topology.node_count() {
            return Err(Error::dim(format!(
                "mask has {} bits for {} nodes",
                bits.len(),
                topology.node_count()
            )));
        }
        if !bits[topology.cloud] {
            return Err(Error::Usage("the cloud cannot be marked dead".into()));
        }
        Ok(Self { bits, origin })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_alive(&self, node: usize) -> bool {
        self.bits[node]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn origin(&self) -> MaskOrigin {
        self.origin
    }

    pub fn failed(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&n| !self.bits[n]).collect()
    }

    /// Bitset of failed nodes, for use as a cache key.
    pub fn failed_code(&self) -> u64 {
        self.failed().iter().fold(0u64, |acc, &n| acc | (1 << n))
    }

    /// `None`, or the failing nodes as `n1,n3`.
    pub fn label(&self) -> String {
        let failed = self.failed();
        if failed.is_empty() {
            "None".to_string()
        } else {
            failed.into_iter().map(node_label).collect::<Vec<_>>().join(",")
        }
    }
}
