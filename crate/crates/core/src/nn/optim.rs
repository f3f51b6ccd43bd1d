use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam()
    }
}

/// Stable identifier of one parameter tensor across steps.
pub type ParamKey = usize;

#[derive(Clone, Debug)]
struct Slot<T> {
    first: Vec<T>,
    second: Vec<T>,
    steps: u64,
}

/// Moment buffers are created lazily per parameter tensor, so tensors that
/// sit out a step (a failed-out node) keep both their values and their
/// bias-correction step count untouched.
#[derive(Clone, Debug)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    slots: BTreeMap<ParamKey, Slot<T>>,
    steps: u64,
}

pub struct ParamUpdate<'a, T> {
    pub key: ParamKey,
    pub params: &'a mut [T],
    pub grads: &'a [T],
}

impl<T: Real> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            slots: BTreeMap::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one optimizer step to every tensor in `updates`. Fails
    /// without touching anything if any gradient is non-finite.
    pub fn step(&mut self, updates: Vec<ParamUpdate<'_, T>>) -> Result<()> {
        for u in &updates {
            if u.params.len() != u.grads.len() {
                return Err(Error::dim(format!(
                    "parameter {} has {} values but {} gradients",
                    u.key,
                    u.params.len(),
                    u.grads.len()
                )));
            }
            if u.grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!("gradient of parameter {}", u.key)));
            }
        }
        let lr = T::lit(self.learning_rate);
        for u in updates {
            let slot = self.slots.entry(u.key).or_insert_with(|| Slot {
                first: vec![T::zero(); u.params.len()],
                second: vec![T::zero(); u.params.len()],
                steps: 0,
            });
            if slot.first.len() != u.params.len() {
                return Err(Error::dim(format!("parameter {} changed size", u.key)));
            }
            slot.steps += 1;
            match self.kind {
                OptimizerKind::Sgd { momentum } => {
                    let mu = T::lit(momentum);
                    for ((p, &g), v) in u.params.iter_mut().zip(u.grads).zip(&mut slot.first) {
                        *v = mu * *v - lr * g;
                        *p += *v;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, epsilon } => {
                    let t = slot.steps as i32;
                    let c1 = T::lit(1.0 - beta1.powi(t));
                    let c2 = T::lit(1.0 - beta2.powi(t));
                    let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(epsilon));
                    for (((p, &g), m), v) in u
                        .params
                        .iter_mut()
                        .zip(u.grads)
                        .zip(&mut slot.first)
                        .zip(&mut slot.second)
                    {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let mhat = *m / c1;
                        let vhat = *v / c2;
                        *p -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
            if u.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Numeric(format!("parameter {} after update", u.key)));
            }
        }
        self.steps += 1;
        Ok(())
    }
}
