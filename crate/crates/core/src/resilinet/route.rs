use super::mask::AliveMask;
use super::scheme::{Join, Scheme};
use crate::topology::{EdgeKind, Endpoint, Topology};

/// Which hyperconnections carry data for one request under a given mask and
/// scheme, and which nodes end up with an output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveRoute {
    /// Node produced an output (alive and received at least one input).
    pub present: Vec<bool>,
    /// Edge indices feeding each node, in edge order.
    pub inputs: Vec<Vec<usize>>,
}

impl ActiveRoute {
    pub fn compute(topology: &Topology, mask: &AliveMask, scheme: Scheme) -> Self {
        let v = topology.node_count();
        let mut present = vec![false; v];
        let mut inputs = vec![Vec::new(); v];
        let src_present = |present: &[bool], src: Endpoint| match src {
            Endpoint::Input => true,
            Endpoint::Node(s) => present[s],
        };
        for d in 0..v {
            if !mask.is_alive(d) {
                continue;
            }
            let mut used = Vec::new();
            for (ei, e) in topology.incoming(d) {
                if e.kind != EdgeKind::Simple {
                    continue;
                }
                let primary = src_present(&present, e.src);
                let detours: Vec<usize> = if scheme.uses_skips() {
                    topology
                        .incoming(d)
                        .filter(|(_, f)| {
                            f.is_skip()
                                && f.bypasses.is_some()
                                && f.bypasses == e.src.node()
                                && src_present(&present, f.src)
                        })
                        .map(|(fi, _)| fi)
                        .collect()
                } else {
                    Vec::new()
                };
                match scheme.join() {
                    Join::Select => {
                        if primary {
                            used.push(ei);
                        } else {
                            used.extend(detours);
                        }
                    }
                    Join::Sum => {
                        if primary {
                            used.push(ei);
                        }
                        used.extend(detours);
                    }
                }
            }
            used.sort_unstable();
            present[d] = !used.is_empty();
            inputs[d] = used;
        }
        Self { present, inputs }
    }

    pub fn reaches_cloud(&self, topology: &Topology) -> bool {
        self.present[topology.cloud]
    }

    pub fn used_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.inputs.iter().flatten().copied()
    }

    /// Scalars moved over hyperconnections for one sample.
    pub fn scalars(&self, topology: &Topology) -> usize {
        self.used_edges().map(|e| topology.edges[e].payload).sum()
    }
}
