use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::layer::{DenseLayer, LayerGrad};
use super::loss::cross_entropy;
use super::real::Real;
use crate::error::{Error, Result};

/// Layers hosted by one physical node, applied in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LayerStack<T> {
    pub layers: Vec<DenseLayer<T>>,
}

/// Activations recorded by [`LayerStack::forward_cached`].
#[derive(Clone, Debug, Default)]
pub struct ForwardCache<T> {
    inputs: Vec<Array2<T>>,
    outputs: Vec<Array2<T>>,
}

impl<T> ForwardCache<T> {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn output(&self) -> Option<&Array2<T>> {
        self.outputs.last()
    }
}

#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
    pub loss: T,
}

impl<T: Real> LayerStack<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::dim(format!(
                    "layer emits {} values but next layer expects {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::output_dim)
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let mut h = x.to_owned();
        for layer in &self.layers {
            h = layer.forward(h.view())?;
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<ForwardCache<T>> {
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_owned();
        for layer in &self.layers {
            let y = layer.forward(h.view())?;
            cache.inputs.push(h);
            h = y.clone();
            cache.outputs.push(y);
        }
        Ok(cache)
    }

    /// Backpropagates `grad_out` through the cached pass. Returns per-layer
    /// gradients and the gradient w.r.t. the stack input.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: ArrayView2<T>) -> Result<(Vec<LayerGrad<T>>, Array2<T>)> {
        if cache.len() != self.layers.len() || cache.is_empty() {
            return Err(Error::Usage(
                "backward called without a matching cached forward pass".into(),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (lg, gin) = layer.backward(cache.inputs[i].view(), cache.outputs[i].view(), g.view())?;
            grads.push(lg);
            g = gin;
        }
        grads.reverse();
        Ok((grads, g))
    }
}

/// Cross-entropy gradients for every layer of a standalone stack whose last
/// layer emits class scores.
pub fn model_backward<T: Real>(
    stack: &LayerStack<T>,
    cache: &ForwardCache<T>,
    targets: &[usize],
) -> Result<Gradients<T>> {
    let logits = cache
        .output()
        .ok_or_else(|| Error::Usage("model_backward called before forward".into()))?;
    let (loss, dlogits) = cross_entropy(logits.view(), targets)?;
    let (layers, _) = stack.backward(cache, dlogits.view())?;
    Ok(Gradients { layers, loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Activation;
    use crate::nn::loss::softmax;
    use ndarray::array;

    #[test]
    fn uncached_backward_is_usage_error() {
        let layer = DenseLayer::new(array![[1.0f64, 0.0]], array![0.0], Activation::Logits).unwrap();
        let stack = LayerStack::new(vec![layer]).unwrap();
        let err = model_backward(&stack, &ForwardCache::default(), &[0]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn single_softmax_layer_gradient() {
        // x = e_0 so dW[:, 0] equals the logit gradient.
        let layer = DenseLayer::new(
            array![[0.3f64, 0.0], [-0.2, 0.0], [0.7, 0.0]],
            array![0.0, 0.0, 0.0],
            Activation::Logits,
        )
        .unwrap();
        let stack = LayerStack::new(vec![layer]).unwrap();
        let x = array![[1.0, 0.0]];
        let cache = stack.forward_cached(x.view()).unwrap();
        let grads = model_backward(&stack, &cache, &[2]).unwrap();
        let p = softmax(cache.output().unwrap().view());
        let expected = [p[[0, 0]], p[[0, 1]], p[[0, 2]] - 1.0];
        for (k, e) in expected.iter().enumerate() {
            assert!((grads.layers[0].weights[[k, 0]] - e).abs() < 1e-12);
            assert!((grads.layers[0].bias[k] - e).abs() < 1e-12);
            assert_eq!(grads.layers[0].weights[[k, 1]], 0.0);
        }
    }

    #[test]
    fn mismatched_layers_rejected() {
        let a = DenseLayer::new(
            Array2::<f32>::zeros((3, 2)),
            ndarray::Array1::zeros(3),
            Activation::Relu,
        )
        .unwrap();
        let b = DenseLayer::new(
            Array2::<f32>::zeros((1, 4)),
            ndarray::Array1::zeros(1),
            Activation::Relu,
        )
        .unwrap();
        assert!(LayerStack::new(vec![a, b]).is_err());
    }
}
