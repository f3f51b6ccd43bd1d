use std::collections::BTreeMap;

use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::failout::{sample_failout_mask, FailoutConfig};
use super::forward::{backward, predict, run, Phase};
use super::mask::AliveMask;
use super::scheme::Scheme;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy, LayerGrad, OptimizerKind, OptimizerState, ParamKey, ParamUpdate, Real, SeededRng, Stream,
};
use crate::topology::DistributedModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub failout: FailoutConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 1024,
            learning_rate: 0.001,
            optimizer: OptimizerKind::adam(),
            failout: FailoutConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean batch loss over batches that reached the cloud.
    pub loss: f64,
    /// Accuracy on the training set with every node alive, after the epoch.
    pub accuracy: f64,
    /// Batches whose failout mask cut every path to the cloud.
    pub skipped_batches: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }
}

fn apply_gradients<T: Real>(
    model: &mut DistributedModel<T>,
    opt: &mut OptimizerState<T>,
    grads: &BTreeMap<ParamKey, LayerGrad<T>>,
) -> Result<()> {
    let layer_keys: Vec<Vec<ParamKey>> = (0..model.node_count())
        .map(|n| (0..model.stacks[n].len()).map(|j| model.layer_key(n, j)).collect())
        .collect();
    let proj_keys: Vec<ParamKey> = (0..model.projections.len()).map(|e| model.projection_key(e)).collect();
    let grads: BTreeMap<ParamKey, (ndarray::Array2<T>, ndarray::Array1<T>)> = grads
        .iter()
        .map(|(&k, g)| {
            (
                k,
                (
                    g.weights.as_standard_layout().into_owned(),
                    g.bias.as_standard_layout().into_owned(),
                ),
            )
        })
        .collect();

    let layers = model
        .stacks
        .iter_mut()
        .zip(&layer_keys)
        .flat_map(|(s, keys)| s.layers.iter_mut().zip(keys.iter().copied()));
    let projections = model
        .projections
        .iter_mut()
        .zip(proj_keys)
        .filter_map(|(p, k)| p.as_mut().map(|p| (p, k)));

    let mut updates = Vec::new();
    for (layer, key) in layers.chain(projections) {
        let Some((gw, gb)) = grads.get(&key) else { continue };
        let weights = layer
            .weights
            .as_slice_mut()
            .ok_or_else(|| Error::Usage("weights not contiguous".into()))?;
        let bias = layer
            .bias
            .as_slice_mut()
            .ok_or_else(|| Error::Usage("bias not contiguous".into()))?;
        updates.push(ParamUpdate {
            key: 2 * key,
            params: weights,
            grads: gw.as_slice().expect("standard layout"),
        });
        updates.push(ParamUpdate {
            key: 2 * key + 1,
            params: bias,
            grads: gb.as_slice().expect("standard layout"),
        });
    }
    opt.step(updates)
}

/// Trains with per-batch failout masks. Nodes dropped in a batch, and the
/// projections on edges that carried nothing, receive no update at all.
pub fn train<T: Real>(
    model: &mut DistributedModel<T>,
    data: &Dataset,
    scheme: Scheme,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainHistory> {
    if data.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::config("batch_size must be >= 1"));
    }
    if data.feature_count() != model.input_dim() || data.classes != model.classes() {
        return Err(Error::dim(format!(
            "dataset has {} features / {} classes, model expects {} / {}",
            data.feature_count(),
            data.classes,
            model.input_dim(),
            model.classes()
        )));
    }
    config.failout.check(&model.topology, scheme)?;

    let features = data.features_as::<T>();
    let mut opt = OptimizerState::<T>::new(config.optimizer, config.learning_rate);
    let mut shuffle_rng = SeededRng::new(seed, Stream::Shuffle);
    let mut failout_rng = SeededRng::new(seed, Stream::Failout);
    let all_alive = AliveMask::all_alive(&model.topology);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut batches, mut skipped) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let xb = features.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let mask = if config.failout.is_off() {
                all_alive.clone()
            } else {
                sample_failout_mask(&config.failout, &model.topology, &mut failout_rng)
            };
            let trace = run(model, &mask, scheme, xb.view(), Phase::Train, true)?;
            let Some(logits) = trace.logits() else {
                skipped += 1;
                continue;
            };
            let (loss, dlogits) = cross_entropy(logits.view(), &yb)?;
            let grads = backward(model, &trace, dlogits.view())?;
            drop(trace);
            apply_gradients(model, &mut opt, &grads)?;
            loss_sum += loss.as_f64();
            batches += 1;
        }
        let preds = predict(model, &all_alive, scheme, features.view())?.expect("all-alive reaches cloud");
        let correct = preds.iter().zip(&data.labels).filter(|(p, l)| p == l).count();
        history.epochs.push(EpochStats {
            epoch,
            loss: if batches > 0 {
                loss_sum / batches as f64
            } else {
                f64::NAN
            },
            accuracy: correct as f64 / data.len() as f64,
            skipped_batches: skipped,
        });
    }
    Ok(history)
}
