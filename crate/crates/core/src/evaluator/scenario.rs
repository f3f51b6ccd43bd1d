use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Real;
use crate::resilinet::{predict, AliveMask, MaskOrigin, Scheme};
use crate::topology::{DistributedModel, FailureSetting};

/// Largest number of non-cloud nodes enumerated exhaustively.
pub const MAX_ENUMERATED_NODES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureScenario {
    pub mask: AliveMask,
    /// `Π_i (alive_i ? 1 - p_i : p_i)` over non-cloud nodes.
    pub probability: f64,
    pub label: String,
}

/// All `2^(V-1)` failure combinations of a setting, most probable first.
/// The cloud is the deepest node, i.e. the last node index.
pub fn enumerate_scenarios(setting: &FailureSetting) -> Result<Vec<FailureScenario>> {
    let nodes = setting.node_count();
    let compute = nodes - 1;
    if compute > MAX_ENUMERATED_NODES {
        return Err(Error::Capacity(format!(
            "{compute} failure-prone nodes exceed the exact limit of {MAX_ENUMERATED_NODES}; use Monte Carlo evaluation"
        )));
    }
    let cloud = nodes - 1;
    let mut out: Vec<FailureScenario> = (0u64..1 << compute)
        .map(|code| {
            let failed: Vec<usize> = (0..compute).filter(|&n| code & (1 << n) != 0).collect();
            let probability = (0..compute)
                .map(|n| {
                    let p = setting.failure_prob(n);
                    if code & (1 << n) != 0 {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product();
            let mask = AliveMask::with_failed_nodes(nodes, cloud, &failed, MaskOrigin::ScenarioEnum);
            FailureScenario {
                label: mask.label(),
                mask,
                probability,
            }
        })
        .collect();
    // stable: equal probabilities keep enumeration order
    out.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(out)
}

/// Per-sample correctness under `mask`, or `None` when nothing reaches the
/// cloud.
pub fn correctness<T: Real>(
    model: &DistributedModel<T>,
    mask: &AliveMask,
    scheme: Scheme,
    features: &Array2<T>,
    labels: &[usize],
) -> Result<Option<Vec<bool>>> {
    Ok(predict(model, mask, scheme, features.view())?
        .map(|preds| preds.iter().zip(labels).map(|(p, l)| p == l).collect()))
}

fn accuracy_from(correct: Option<Vec<bool>>, classes: usize) -> f64 {
    match correct {
        Some(c) => c.iter().filter(|&&ok| ok).count() as f64 / c.len() as f64,
        None => 1.0 / classes as f64,
    }
}

/// Test accuracy under the scenario's mask. Unreachable scenarios score the
/// chance level `1/C` analytically.
pub fn evaluate_scenario<T: Real>(
    model: &DistributedModel<T>,
    scenario: &FailureScenario,
    testset: &Dataset,
    scheme: Scheme,
) -> Result<f64> {
    if testset.is_empty() {
        return Err(Error::Usage("test set is empty".into()));
    }
    let features = testset.features_as::<T>();
    let c = correctness(model, &scenario.mask, scheme, &features, &testset.labels)?;
    Ok(accuracy_from(c, model.classes()))
}

pub fn expected_accuracy(scenarios: &[FailureScenario], accuracies: &[f64]) -> Result<f64> {
    if scenarios.len() != accuracies.len() {
        return Err(Error::Usage(format!(
            "{} scenarios but {} accuracies",
            scenarios.len(),
            accuracies.len()
        )));
    }
    let total: f64 = scenarios.iter().map(|s| s.probability).sum();
    if (total - 1.0).abs() > 1e-9 || scenarios.iter().any(|s| s.probability < 0.0) {
        return Err(Error::Data(format!("scenario probabilities sum to {total}, not 1")));
    }
    Ok(scenarios.iter().zip(accuracies).map(|(s, a)| s.probability * a).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub label: String,
    pub failed: Vec<usize>,
    pub probability: f64,
    pub accuracy: f64,
    pub reachable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scheme: Scheme,
    pub setting: String,
    pub scenarios: Vec<ScenarioResult>,
    pub expected_accuracy: f64,
    pub clean_accuracy: f64,
    pub chance_level: f64,
    pub seed: Option<u64>,
}

impl EvaluationReport {
    pub fn scenario(&self, label: &str) -> Option<&ScenarioResult> {
        self.scenarios.iter().find(|s| s.label == label)
    }
}

/// Exact evaluation over every scenario. Scenarios run on up to `workers`
/// threads; results keep scenario order.
pub fn evaluate_exact<T: Real>(
    model: &DistributedModel<T>,
    setting: &FailureSetting,
    scheme: Scheme,
    testset: &Dataset,
    workers: usize,
) -> Result<EvaluationReport> {
    setting.check(&model.topology)?;
    if testset.is_empty() {
        return Err(Error::Usage("test set is empty".into()));
    }
    let scenarios = enumerate_scenarios(setting)?;
    let features = testset.features_as::<T>();
    let eval = |s: &FailureScenario| -> Result<ScenarioResult> {
        let c = correctness(model, &s.mask, scheme, &features, &testset.labels)?;
        let reachable = c.is_some();
        Ok(ScenarioResult {
            label: s.label.clone(),
            failed: s.mask.failed(),
            probability: s.probability,
            accuracy: accuracy_from(c, model.classes()),
            reachable,
        })
    };
    let results: Vec<ScenarioResult> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?;
        pool.install(|| scenarios.par_iter().map(eval).collect::<Result<Vec<_>>>())?
    } else {
        scenarios.iter().map(eval).collect::<Result<Vec<_>>>()?
    };
    let accs: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let expected = expected_accuracy(&scenarios, &accs)?;
    let clean = results
        .iter()
        .find(|r| r.failed.is_empty())
        .map(|r| r.accuracy)
        .unwrap_or(f64::NAN);
    Ok(EvaluationReport {
        scheme,
        setting: setting.name.clone(),
        scenarios: results,
        expected_accuracy: expected,
        clean_accuracy: clean,
        chance_level: 1.0 / model.classes() as f64,
        seed: None,
    })
}

/// Wall-clock helper for callers that report timings next to results.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed().as_secs_f64())
}
