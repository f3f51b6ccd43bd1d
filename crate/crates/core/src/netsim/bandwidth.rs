use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::nn::Real;
use crate::resilinet::{ActiveRoute, AliveMask, Scheme, ALL_SCHEMES};
use crate::topology::{DistributedModel, Topology};

/// Scalars crossing hyperconnections for one sample under `mask`.
pub fn bandwidth_per_inference<T: Real>(model: &DistributedModel<T>, scheme: Scheme, mask: &AliveMask) -> usize {
    topology_bandwidth(&model.topology, scheme, mask)
}

pub fn topology_bandwidth(topology: &Topology, scheme: Scheme, mask: &AliveMask) -> usize {
    ActiveRoute::compute(topology, mask, scheme).scalars(topology)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRow {
    pub scheme: Scheme,
    pub scalars: usize,
    /// `1 - scalars / dfg_scalars`.
    pub savings_vs_dfg: f64,
}

/// All-alive traffic of every scheme.
pub fn bandwidth_table(topology: &Topology) -> Vec<BandwidthRow> {
    let alive = AliveMask::all_alive(topology);
    let dfg = topology_bandwidth(topology, Scheme::Dfg, &alive);
    ALL_SCHEMES
        .iter()
        .map(|&scheme| {
            let scalars = topology_bandwidth(topology, scheme, &alive);
            BandwidthRow {
                scheme,
                scalars,
                savings_vs_dfg: savings(scalars as f64, dfg as f64),
            }
        })
        .collect()
}

pub(crate) fn savings(scalars: f64, dfg: f64) -> f64 {
    if dfg == 0.0 {
        0.0
    } else {
        1.0 - scalars / dfg
    }
}

/// Cumulative scalars per hyperconnection for the simulated scheme, and per
/// scheme totals for the same request stream.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficLedger {
    pub per_edge: Vec<u64>,
    pub edge_labels: Vec<String>,
    pub per_scheme: BTreeMap<String, u64>,
}

impl TrafficLedger {
    pub fn new(topology: &Topology) -> Self {
        Self {
            per_edge: vec![0; topology.edges.len()],
            edge_labels: topology.edges.iter().map(|e| e.label()).collect(),
            per_scheme: ALL_SCHEMES.iter().map(|s| (s.name().to_string(), 0)).collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.per_edge.iter().sum()
    }

    pub fn scheme_total(&self, scheme: Scheme) -> u64 {
        self.per_scheme.get(scheme.name()).copied().unwrap_or(0)
    }

    pub fn savings_vs_dfg(&self, scheme: Scheme) -> f64 {
        savings(self.scheme_total(scheme) as f64, self.scheme_total(Scheme::Dfg) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resilinet::MaskOrigin;
    use crate::topology::PartitionPlan;

    #[test]
    fn health_traffic() {
        let t = PartitionPlan::health().topology().unwrap();
        let alive = AliveMask::all_alive(&t);
        assert_eq!(topology_bandwidth(&t, Scheme::ResiliNet, &alive), 773);
        assert_eq!(topology_bandwidth(&t, Scheme::Vanilla, &alive), 773);
        assert_eq!(topology_bandwidth(&t, Scheme::Dfg, &alive), 1296);
        assert_eq!(topology_bandwidth(&t, Scheme::ResiliNetPlus, &alive), 1296);
        let n2_dead = AliveMask::with_failed(&t, &[1], MaskOrigin::SimEvent);
        assert_eq!(topology_bandwidth(&t, Scheme::ResiliNet, &n2_dead), 523);
    }

    #[test]
    fn no_skips_means_no_savings() {
        let t = PartitionPlan::health().without_skips().topology().unwrap();
        assert!(bandwidth_table(&t).iter().all(|r| r.savings_vs_dfg == 0.0));
    }
}
