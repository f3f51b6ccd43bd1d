#![allow(dead_code)]

//! Independent oracles shared by the integration tests.

use failout::nn::{cross_entropy, Activation, DenseLayer, LayerStack};
use failout::resilinet::{backward, run, AliveMask, Phase, Scheme};
use failout::topology::DistributedModel;
use ndarray::Array2;

/// Triple-loop `act(x Wᵀ + b)`.
pub fn naive_dense(layer: &DenseLayer<f64>, x: &Array2<f64>) -> Array2<f64> {
    let (b, n_in) = x.dim();
    let n_out = layer.output_dim();
    let mut y = Array2::zeros((b, n_out));
    for r in 0..b {
        for o in 0..n_out {
            let mut acc = layer.bias[o];
            for i in 0..n_in {
                acc += layer.weights[[o, i]] * x[[r, i]];
            }
            if layer.activation == Activation::Relu && acc < 0.0 {
                acc = 0.0;
            }
            y[[r, o]] = acc;
        }
    }
    y
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn stack_loss(stack: &LayerStack<f64>, x: &Array2<f64>, y: &[usize]) -> f64 {
    let logits = stack.forward(x.view()).unwrap();
    cross_entropy(logits.view(), y).unwrap().0
}

/// Central differences for every weight and bias of a plain stack. Returns
/// one `(weights, bias)` pair of numeric gradients per layer.
pub fn fd_stack(stack: &LayerStack<f64>, x: &Array2<f64>, y: &[usize], h: f64) -> Vec<(Array2<f64>, Vec<f64>)> {
    let mut probe = stack.clone();
    let mut out = Vec::new();
    for j in 0..stack.len() {
        let mut gw = Array2::zeros(stack.layers[j].weights.dim());
        for idx in ndarray::indices(stack.layers[j].weights.dim()) {
            let orig = probe.layers[j].weights[idx];
            probe.layers[j].weights[idx] = orig + h;
            let up = stack_loss(&probe, x, y);
            probe.layers[j].weights[idx] = orig - h;
            let down = stack_loss(&probe, x, y);
            probe.layers[j].weights[idx] = orig;
            gw[idx] = (up - down) / (2.0 * h);
        }
        let mut gb = vec![0.0; stack.layers[j].bias.len()];
        for (k, g) in gb.iter_mut().enumerate() {
            let orig = probe.layers[j].bias[k];
            probe.layers[j].bias[k] = orig + h;
            let up = stack_loss(&probe, x, y);
            probe.layers[j].bias[k] = orig - h;
            let down = stack_loss(&probe, x, y);
            probe.layers[j].bias[k] = orig;
            *g = (up - down) / (2.0 * h);
        }
        out.push((gw, gb));
    }
    out
}

/// Training-phase loss of a distributed model under a fixed mask.
pub fn model_loss(
    model: &DistributedModel<f64>,
    mask: &AliveMask,
    scheme: Scheme,
    x: &Array2<f64>,
    y: &[usize],
) -> Option<f64> {
    let trace = run(model, mask, scheme, x.view(), Phase::Train, false).unwrap();
    trace.logits().map(|l| cross_entropy(l.view(), y).unwrap().0)
}

/// Numeric gradient of one scalar parameter of a distributed model.
pub fn fd_param(
    model: &mut DistributedModel<f64>,
    get: impl Fn(&mut DistributedModel<f64>) -> &mut f64,
    mask: &AliveMask,
    scheme: Scheme,
    x: &Array2<f64>,
    y: &[usize],
    h: f64,
) -> f64 {
    let orig = *get(model);
    *get(model) = orig + h;
    let up = model_loss(model, mask, scheme, x, y).unwrap();
    *get(model) = orig - h;
    let down = model_loss(model, mask, scheme, x, y).unwrap();
    *get(model) = orig;
    (up - down) / (2.0 * h)
}

/// Probability of exactly the nodes in `failed` being down, from per-node
/// failure probabilities listed upstream first.
pub fn scenario_probability(upstream_probs: &[f64], failed: &[usize]) -> f64 {
    let mut p = 1.0;
    for (node, &q) in upstream_probs.iter().enumerate() {
        p *= if failed.contains(&node) { q } else { 1.0 - q };
    }
    p
}

/// Largest relative error between backprop and central differences over
/// every parameter that received a gradient.
pub fn max_grad_error(
    model: &mut DistributedModel<f64>,
    mask: &AliveMask,
    scheme: Scheme,
    x: &Array2<f64>,
    y: &[usize],
    h: f64,
) -> f64 {
    let trace = run(model, mask, scheme, x.view(), Phase::Train, true).unwrap();
    let logits = trace.logits().expect("reachable").clone();
    let (_, dl) = cross_entropy(logits.view(), y).unwrap();
    let grads = backward(model, &trace, dl.view()).unwrap();
    drop(trace);
    let mut worst = 0.0f64;
    for node in 0..model.node_count() {
        for j in 0..model.stacks[node].len() {
            let Some(g) = grads.get(&model.layer_key(node, j)).cloned() else {
                continue;
            };
            for idx in ndarray::indices(g.weights.dim()) {
                let n = fd_param(
                    model,
                    |m| &mut m.stacks[node].layers[j].weights[idx],
                    mask,
                    scheme,
                    x,
                    y,
                    h,
                );
                worst = worst.max(rel_err(g.weights[idx], n));
            }
            for b in 0..g.bias.len() {
                let n = fd_param(model, |m| &mut m.stacks[node].layers[j].bias[b], mask, scheme, x, y, h);
                worst = worst.max(rel_err(g.bias[b], n));
            }
        }
    }
    for e in 0..model.projections.len() {
        let Some(g) = grads.get(&model.projection_key(e)).cloned() else {
            continue;
        };
        for idx in ndarray::indices(g.weights.dim()) {
            let n = fd_param(
                model,
                |m| &mut m.projections[e].as_mut().unwrap().weights[idx],
                mask,
                scheme,
                x,
                y,
                h,
            );
            worst = worst.max(rel_err(g.weights[idx], n));
        }
        for b in 0..g.bias.len() {
            let n = fd_param(
                model,
                |m| &mut m.projections[e].as_mut().unwrap().bias[b],
                mask,
                scheme,
                x,
                y,
                h,
            );
            worst = worst.max(rel_err(g.bias[b], n));
        }
    }
    worst
}
