use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};

use super::mask::AliveMask;
use super::route::ActiveRoute;
use super::scheme::{combine_inputs, Join, Scheme};
use crate::error::{Error, Result};
use crate::nn::{argmax_rows, ForwardCache, LayerGrad, ParamKey, Real};
use crate::topology::{DistributedModel, Endpoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

struct EdgeUse<T> {
    edge: usize,
    /// (projection input, projection output), kept for backprop.
    projection_io: Option<(Array2<T>, Array2<T>)>,
}

struct NodeRecord<T> {
    cache: Option<ForwardCache<T>>,
    output: Option<Array2<T>>,
    inputs: Vec<EdgeUse<T>>,
}

impl<T> NodeRecord<T> {
    fn output(&self) -> Option<&Array2<T>> {
        self.output
            .as_ref()
            .or_else(|| self.cache.as_ref().and_then(ForwardCache::output))
    }
}

/// One gated pass through the distributed graph.
pub struct Trace<T> {
    nodes: Vec<NodeRecord<T>>,
    cloud: usize,
    pub route: ActiveRoute,
}

impl<T: Real> Trace<T> {
    /// Class scores, or `None` when no data reached the cloud.
    pub fn logits(&self) -> Option<&Array2<T>> {
        self.nodes[self.cloud].output()
    }

    pub fn node_output(&self, node: usize) -> Option<&Array2<T>> {
        self.nodes[node].output()
    }
}

fn effective_weight<T: Real>(model: &DistributedModel<T>, edge: usize, phase: Phase) -> f64 {
    let w = model.topology.edges[edge].weight;
    match (phase, &model.inference_scale) {
        (Phase::Infer, Some(scale)) => w * scale[edge],
        _ => w,
    }
}

/// Evaluates every node in topological order. Dead nodes and nodes left
/// without any input emit nothing. With `record`, activations are cached for
/// [`backward`].
pub fn run<T: Real>(
    model: &DistributedModel<T>,
    mask: &AliveMask,
    scheme: Scheme,
    x: ArrayView2<T>,
    phase: Phase,
    record: bool,
) -> Result<Trace<T>> {
    let topo = &model.topology;
    if x.ncols() != topo.input_dim {
        return Err(Error::dim(format!(
            "model expects {} input features, got {}",
            topo.input_dim,
            x.ncols()
        )));
    }
    if mask.len() != topo.node_count() {
        return Err(Error::dim(format!(
            "mask covers {} nodes, model has {}",
            mask.len(),
            topo.node_count()
        )));
    }
    let route = ActiveRoute::compute(topo, mask, scheme);
    let mut nodes: Vec<NodeRecord<T>> = Vec::with_capacity(topo.node_count());
    for d in 0..topo.node_count() {
        if !route.present[d] {
            nodes.push(NodeRecord {
                cache: None,
                output: None,
                inputs: Vec::new(),
            });
            continue;
        }
        let mut acc: Option<Array2<T>> = None;
        let mut uses = Vec::with_capacity(route.inputs[d].len());
        for &e in &route.inputs[d] {
            let edge = &topo.edges[e];
            let src: ArrayView2<T> = match edge.src {
                Endpoint::Input => x.view(),
                Endpoint::Node(s) => nodes[s]
                    .output()
                    .ok_or_else(|| Error::Usage(format!("route uses absent node {s}")))?
                    .view(),
            };
            let (mut payload, projection_io) = match &model.projections[e] {
                Some(p) => {
                    let out = p.forward(src)?;
                    let io = record.then(|| (src.to_owned(), out.clone()));
                    (out, io)
                }
                None => (src.to_owned(), None),
            };
            let w = effective_weight(model, e, phase);
            if w != 1.0 {
                payload.mapv_inplace(|v| v * T::lit(w));
            }
            acc = combine_inputs(acc, Some(payload), Join::Sum)?;
            uses.push(EdgeUse { edge: e, projection_io });
        }
        let input = acc.expect("present node has at least one input");
        let stack = &model.stacks[d];
        let record_node = if record {
            NodeRecord {
                cache: Some(stack.forward_cached(input.view())?),
                output: None,
                inputs: uses,
            }
        } else {
            NodeRecord {
                cache: None,
                output: Some(stack.forward(input.view())?),
                inputs: Vec::new(),
            }
        };
        nodes.push(record_node);
    }
    Ok(Trace {
        nodes,
        cloud: topo.cloud,
        route,
    })
}

/// Class scores under `mask`, or `None` if the input cannot reach the cloud.
pub fn gated_forward<T: Real>(
    model: &DistributedModel<T>,
    mask: &AliveMask,
    scheme: Scheme,
    x: ArrayView2<T>,
) -> Result<Option<Array2<T>>> {
    let mut trace = run(model, mask, scheme, x, Phase::Infer, false)?;
    Ok(trace.nodes[trace.cloud].output.take())
}

pub fn predict<T: Real>(
    model: &DistributedModel<T>,
    mask: &AliveMask,
    scheme: Scheme,
    x: ArrayView2<T>,
) -> Result<Option<Vec<usize>>> {
    Ok(gated_forward(model, mask, scheme, x)?.map(|s| argmax_rows(s.view())))
}

/// Gradients of every layer and projection that took part in `trace`, keyed
/// by [`DistributedModel::layer_key`] / [`DistributedModel::projection_key`].
pub fn backward<T: Real>(
    model: &DistributedModel<T>,
    trace: &Trace<T>,
    dlogits: ArrayView2<T>,
) -> Result<BTreeMap<ParamKey, LayerGrad<T>>> {
    let topo = &model.topology;
    let mut grads = BTreeMap::new();
    let mut upstream: Vec<Option<Array2<T>>> = vec![None; topo.node_count()];
    upstream[topo.cloud] = Some(dlogits.to_owned());
    for d in (0..topo.node_count()).rev() {
        let Some(g) = upstream[d].take() else { continue };
        let record = &trace.nodes[d];
        let cache = record
            .cache
            .as_ref()
            .ok_or_else(|| Error::Usage("backward needs a recorded trace".into()))?;
        let (layer_grads, dx) = model.stacks[d].backward(cache, g.view())?;
        for (j, lg) in layer_grads.into_iter().enumerate() {
            grads.insert(model.layer_key(d, j), lg);
        }
        for used in &record.inputs {
            let e = used.edge;
            let w = T::lit(effective_weight(model, e, Phase::Train));
            let mut ge = dx.mapv(|v| v * w);
            if let (Some(p), Some((pin, pout))) = (&model.projections[e], &used.projection_io) {
                let (pg, gin) = p.backward(pin.view(), pout.view(), ge.view())?;
                grads.insert(model.projection_key(e), pg);
                ge = gin;
            }
            if let Endpoint::Node(s) = topo.edges[e].src {
                match &mut upstream[s] {
                    Some(acc) => *acc += &ge,
                    slot @ None => *slot = Some(ge),
                }
            }
        }
    }
    Ok(grads)
}
