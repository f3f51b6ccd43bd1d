use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Real;
use crate::topology::{DistributedModel, Endpoint, FailureSetting};

/// Fixed scalar placed on every hyperconnection before training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HyperWeightScheme {
    One,
    /// Weight = reliability of the source node.
    Reliability,
    /// Source reliability normalized over all sources feeding the destination.
    RelativeReliability,
    UniformRandom {
        lo: f64,
        hi: f64,
    },
}

impl Default for HyperWeightScheme {
    fn default() -> Self {
        HyperWeightScheme::One
    }
}

impl HyperWeightScheme {
    pub fn label(&self) -> String {
        match self {
            HyperWeightScheme::One => "one".into(),
            HyperWeightScheme::Reliability => "reliability".into(),
            HyperWeightScheme::RelativeReliability => "relative_reliability".into(),
            HyperWeightScheme::UniformRandom { lo, hi } => format!("uniform({lo},{hi})"),
        }
    }
}

fn source_reliability(setting: &FailureSetting, src: Endpoint) -> f64 {
    match src {
        Endpoint::Input => 1.0,
        Endpoint::Node(n) => setting.reliability(n),
    }
}

pub fn assign_hyperconnection_weights<T: Real, R: Rng + ?Sized>(
    model: &mut DistributedModel<T>,
    scheme: HyperWeightScheme,
    setting: &FailureSetting,
    rng: &mut R,
) -> Result<()> {
    setting.check(&model.topology)?;
    if let HyperWeightScheme::UniformRandom { lo, hi } = scheme {
        if !(lo <= hi) {
            return Err(Error::config(format!("uniform weight range [{lo}, {hi}] is empty")));
        }
    }
    let topo = &model.topology;
    let weights: Vec<f64> = topo
        .edges
        .iter()
        .map(|e| match scheme {
            HyperWeightScheme::One => 1.0,
            HyperWeightScheme::Reliability => source_reliability(setting, e.src),
            HyperWeightScheme::RelativeReliability => {
                let total: f64 = topo
                    .incoming(e.dst)
                    .map(|(_, f)| source_reliability(setting, f.src))
                    .sum();
                source_reliability(setting, e.src) / total
            }
            HyperWeightScheme::UniformRandom { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
        })
        .collect();
    for (e, w) in model.topology.edges.iter_mut().zip(weights) {
        e.weight = w;
    }
    Ok(())
}

/// Toggles inference-time scaling of each hyperconnection weight by its
/// source's survival probability. Off by default.
pub fn inference_scaling_mode<T: Real>(
    model: &mut DistributedModel<T>,
    setting: &FailureSetting,
    on: bool,
) -> Result<()> {
    if !on {
        model.inference_scale = None;
        return Ok(());
    }
    setting.check(&model.topology)?;
    model.inference_scale = Some(
        model
            .topology
            .edges
            .iter()
            .map(|e| source_reliability(setting, e.src))
            .collect(),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{SeededRng, Stream};
    use crate::topology::{build_model, PartitionPlan};

    fn health() -> DistributedModel<f32> {
        build_model(&PartitionPlan::health(), &mut SeededRng::new(0, Stream::Init)).unwrap()
    }

    fn weight_of(m: &DistributedModel<f32>, src: Endpoint, dst: usize) -> f64 {
        m.topology
            .edges
            .iter()
            .find(|e| e.src == src && e.dst == dst)
            .unwrap()
            .weight
    }

    #[test]
    fn reliability_heuristics() {
        let normal = FailureSetting::named("normal", 4).unwrap();
        let mut rng = SeededRng::new(1, Stream::Weights);
        let mut m = health();
        assign_hyperconnection_weights(&mut m, HyperWeightScheme::One, &normal, &mut rng).unwrap();
        assert!(m.topology.edges.iter().all(|e| e.weight == 1.0));

        assign_hyperconnection_weights(&mut m, HyperWeightScheme::Reliability, &normal, &mut rng).unwrap();
        assert!((weight_of(&m, Endpoint::Node(0), 1) - 0.92).abs() < 1e-12);
        assert_eq!(weight_of(&m, Endpoint::Input, 0), 1.0);

        assign_hyperconnection_weights(&mut m, HyperWeightScheme::RelativeReliability, &normal, &mut rng).unwrap();
        // n3 is fed by n2 (r = 0.96) and by n1 (r = 0.92) through the skip
        let a = weight_of(&m, Endpoint::Node(0), 2);
        let b = weight_of(&m, Endpoint::Node(1), 2);
        assert!((a - 0.92 / 1.88).abs() < 1e-12);
        assert!((b - 0.96 / 1.88).abs() < 1e-12);
        assert!((a - 0.4894).abs() < 1e-4 && (b - 0.5106).abs() < 1e-4);
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_in_range() {
        let normal = FailureSetting::named("normal", 4).unwrap();
        let mut m = health();
        let mut rng = SeededRng::new(1, Stream::Weights);
        assign_hyperconnection_weights(
            &mut m,
            HyperWeightScheme::UniformRandom { lo: 0.0, hi: 1.0 },
            &normal,
            &mut rng,
        )
        .unwrap();
        assert!(m.topology.edges.iter().all(|e| (0.0..1.0).contains(&e.weight)));
        let bad = HyperWeightScheme::UniformRandom { lo: 1.0, hi: 0.0 };
        assert!(assign_hyperconnection_weights(&mut m, bad, &normal, &mut rng).is_err());
    }

    #[test]
    fn scaling_toggle() {
        let normal = FailureSetting::named("normal", 4).unwrap();
        let mut m = health();
        inference_scaling_mode(&mut m, &normal, true).unwrap();
        let scale = m.inference_scale.clone().unwrap();
        let idx = m
            .topology
            .edges
            .iter()
            .position(|e| e.src == Endpoint::Node(0) && e.dst == 1)
            .unwrap();
        assert!((scale[idx] - 0.92).abs() < 1e-12);
        inference_scaling_mode(&mut m, &normal, false).unwrap();
        assert!(m.inference_scale.is_none());
    }
}
