use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::correctness;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Real, SeededRng, Stream};
use crate::resilinet::{AliveMask, MaskOrigin, Scheme};
use crate::topology::{DistributedModel, FailureSetting};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub draws: usize,
}

/// Samples `draws` failure masks from the setting and averages test accuracy.
/// Correctness per distinct mask is computed once; when nothing reaches the
/// cloud every sample gets a uniformly random label.
pub fn monte_carlo_accuracy<T: Real>(
    model: &DistributedModel<T>,
    setting: &FailureSetting,
    scheme: Scheme,
    testset: &Dataset,
    draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    setting.check(&model.topology)?;
    if testset.is_empty() {
        return Err(Error::Usage("test set is empty".into()));
    }
    if draws == 0 {
        return Err(Error::Usage("draws must be >= 1".into()));
    }
    let topo = &model.topology;
    let features = testset.features_as::<T>();
    let n = testset.len();
    let classes = model.classes();
    let mut rng = SeededRng::new(seed, Stream::MonteCarlo);
    let mut cache: HashMap<u64, Option<usize>> = HashMap::new();
    let mut per_draw = Vec::with_capacity(draws);
    let mut total_correct: u64 = 0;

    for _ in 0..draws {
        let failed: Vec<usize> = topo
            .compute_nodes()
            .filter(|&node| rng.random::<f64>() < setting.failure_prob(node))
            .collect();
        let mask = AliveMask::with_failed(topo, &failed, MaskOrigin::MonteCarloDraw);
        let key = mask.failed_code();
        let hits = match cache.get(&key) {
            Some(h) => *h,
            None => {
                let h = correctness(model, &mask, scheme, &features, &testset.labels)?
                    .map(|c| c.iter().filter(|&&ok| ok).count());
                cache.insert(key, h);
                h
            }
        };
        let hits = match hits {
            Some(h) => h,
            None => testset
                .labels
                .iter()
                .filter(|&&l| rng.random_range(0..classes) == l)
                .count(),
        };
        total_correct += hits as u64;
        per_draw.push(hits as f64 / n as f64);
    }

    let mean = total_correct as f64 / (draws as f64 * n as f64);
    let stderr = if draws > 1 {
        let ss: f64 = per_draw.iter().map(|a| (a - mean).powi(2)).sum();
        (ss / (draws - 1) as f64).sqrt() / (draws as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { mean, stderr, draws })
}
