use rand::Rng;
use serde::{Deserialize, Serialize};

use super::plan::{Endpoint, PartitionPlan, Topology};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, LayerStack, ParamKey, Real};
use crate::resilinet::AliveMask;

/// A partitioned network bound to its physical nodes and hyperconnections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DistributedModel<T> {
    pub plan: PartitionPlan,
    pub topology: Topology,
    pub stacks: Vec<LayerStack<T>>,
    /// Aligned with `topology.edges`; present where payload and destination
    /// widths differ.
    pub projections: Vec<Option<DenseLayer<T>>>,
    /// Per-edge multiplier applied at inference only (survival scaling).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference_scale: Option<Vec<f64>>,
}

pub fn build_model<T: Real, R: Rng + ?Sized>(plan: &PartitionPlan, rng: &mut R) -> Result<DistributedModel<T>> {
    let topology = plan.topology()?;
    let mut stacks = Vec::with_capacity(topology.node_count());
    for node in &topology.nodes {
        let mut layers = Vec::with_capacity(node.hosted_layers.len());
        let mut fan_in = node.input_dim;
        for (j, &width) in node.hosted_layers.iter().enumerate() {
            let act = if node.is_cloud && j + 1 == node.hosted_layers.len() {
                Activation::Logits
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer::init(fan_in, width, act, rng));
            fan_in = width;
        }
        stacks.push(LayerStack::new(layers)?);
    }
    let projections = topology
        .edges
        .iter()
        .map(|e| {
            e.projected
                .then(|| DenseLayer::init(e.payload, topology.nodes[e.dst].input_dim, Activation::Identity, rng))
        })
        .collect();
    Ok(DistributedModel {
        plan: plan.clone(),
        topology,
        stacks,
        projections,
        inference_scale: None,
    })
}

impl<T: Real> DistributedModel<T> {
    pub fn classes(&self) -> usize {
        self.topology.classes
    }

    pub fn input_dim(&self) -> usize {
        self.topology.input_dim
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Optimizer key of layer `layer` on node `node`.
    pub fn layer_key(&self, node: usize, layer: usize) -> ParamKey {
        self.stacks[..node].iter().map(LayerStack::len).sum::<usize>() + layer
    }

    pub fn projection_key(&self, edge: usize) -> ParamKey {
        self.stacks.iter().map(LayerStack::len).sum::<usize>() + edge
    }

    pub fn param_count(&self) -> usize {
        let layers: usize = self
            .stacks
            .iter()
            .flat_map(|s| s.layers.iter())
            .map(DenseLayer::param_count)
            .sum();
        let proj: usize = self.projections.iter().flatten().map(DenseLayer::param_count).sum();
        layers + proj
    }

    /// Consistency check for models loaded from disk.
    pub fn check(&self) -> Result<()> {
        let topo = self.plan.topology()?;
        let same_shape = topo.nodes == self.topology.nodes
            && topo.edges.len() == self.topology.edges.len()
            && topo
                .edges
                .iter()
                .zip(&self.topology.edges)
                .all(|(a, b)| (a.src, a.dst, a.kind, a.payload) == (b.src, b.dst, b.kind, b.payload));
        if !same_shape {
            return Err(Error::Data("model topology does not match its plan".into()));
        }
        if self.stacks.len() != topo.node_count() || self.projections.len() != topo.edges.len() {
            return Err(Error::Data("model parameter count does not match its plan".into()));
        }
        for (node, stack) in topo.nodes.iter().zip(&self.stacks) {
            let widths: Vec<usize> = stack.layers.iter().map(DenseLayer::output_dim).collect();
            if widths != node.hosted_layers || stack.input_dim() != node.input_dim {
                return Err(Error::Data(format!("layers on node {} have wrong shapes", node.id)));
            }
            for layer in &stack.layers {
                if layer.bias.len() != layer.output_dim() {
                    return Err(Error::Data("bias length mismatch".into()));
                }
            }
        }
        for (e, p) in topo.edges.iter().zip(&self.projections) {
            match p {
                Some(p)
                    if e.projected && p.input_dim() == e.payload && p.output_dim() == topo.nodes[e.dst].input_dim => {}
                None if !e.projected => {}
                _ => return Err(Error::Data(format!("projection on {} is malformed", e.label()))),
            }
        }
        if let Some(scale) = &self.inference_scale {
            if scale.len() != topo.edges.len() {
                return Err(Error::Data("inference scale length mismatch".into()));
            }
        }
        let finite = self
            .stacks
            .iter()
            .flat_map(|s| s.layers.iter())
            .chain(self.projections.iter().flatten())
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Data("model contains non-finite parameters".into()));
        }
        Ok(())
    }
}

impl Topology {
    /// True iff data can flow from the input to the cloud: simple edges
    /// between alive nodes, and (when `with_skips`) skips whose endpoints
    /// are alive.
    pub fn reachable(&self, mask: &AliveMask, with_skips: bool) -> bool {
        let mut present = vec![false; self.node_count()];
        // node indices are a topological order
        for n in 0..self.node_count() {
            if !mask.is_alive(n) {
                continue;
            }
            present[n] = self.incoming(n).any(|(_, e)| {
                (with_skips || !e.is_skip())
                    && match e.src {
                        Endpoint::Input => true,
                        Endpoint::Node(s) => present[s],
                    }
            });
        }
        present[self.cloud]
    }
}

/// Reachability over simple and skip hyperconnections.
pub fn reachability<T: Real>(model: &DistributedModel<T>, mask: &AliveMask) -> bool {
    model.topology.reachable(mask, true)
}
