use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    /// Raw class scores; softmax is folded into the loss.
    Logits,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DenseLayer<T> {
    /// `[out × in]`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct LayerGrad<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

pub(crate) fn ensure_finite<T: Real>(x: &ArrayView2<T>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains NaN or Inf")))
    }
}

impl<T: Real> DenseLayer<T> {
    pub fn new(weights: Array2<T>, bias: Array1<T>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::dim(format!(
                "weights have {} rows but bias has {} entries",
                weights.nrows(),
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// He-uniform weights in `±sqrt(6 / in)`, zero bias.
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        assert!(input >= 1 && output >= 1, "layer dims must be positive");
        let bound = (6.0 / input as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((output, input), || T::lit(rng.random_range(-bound..=bound)));
        Self {
            weights,
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `act(x Wᵀ + b)` for a batch `x` of shape `[B × in]`.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::dim(format!(
                "layer expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        ensure_finite(&x, "layer input")?;
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
        }
        Ok(z)
    }

    /// Gradient w.r.t. parameters and input given the layer's cached input
    /// and output and the upstream gradient `grad_out`.
    pub fn backward(
        &self,
        input: ArrayView2<T>,
        output: ArrayView2<T>,
        grad_out: ArrayView2<T>,
    ) -> Result<(LayerGrad<T>, Array2<T>)> {
        if grad_out.dim() != output.dim() || input.nrows() != output.nrows() {
            return Err(Error::dim("backward shapes disagree with cached forward"));
        }
        let dz = match self.activation {
            Activation::Relu => {
                let mut dz = grad_out.to_owned();
                ndarray::Zip::from(&mut dz).and(&output).for_each(|g, &y| {
                    if y <= T::zero() {
                        *g = T::zero();
                    }
                });
                dz
            }
            Activation::Identity | Activation::Logits => grad_out.to_owned(),
        };
        let weights = dz.t().dot(&input);
        let bias = dz.sum_axis(Axis(0));
        let grad_in = dz.dot(&self.weights);
        Ok((LayerGrad { weights, bias }, grad_in))
    }
}

/// Convenience wrapper used where a plain function reads better.
pub fn dense_forward<T: Real>(layer: &DenseLayer<T>, x: ArrayView2<T>) -> Result<Array2<T>> {
    layer.forward(x)
}

pub fn init_layer<T: Real, R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> DenseLayer<T> {
    DenseLayer::init(input, output, Activation::Relu, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::rng::{SeededRng, Stream};
    use ndarray::array;

    #[test]
    fn identity_weights_with_relu_clamp() {
        let layer = DenseLayer::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.0, 0.0], Activation::Relu).unwrap();
        let y = layer.forward(array![[2.0, -3.0]].view()).unwrap();
        assert_eq!(y, array![[2.0, 0.0]]);
    }

    #[test]
    fn zero_weights_pass_bias() {
        let layer = DenseLayer::new(array![[0.0, 0.0]], array![5.0], Activation::Identity).unwrap();
        let y = layer.forward(array![[9.0, 9.0]].view()).unwrap();
        assert_eq!(y, array![[5.0]]);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let layer: DenseLayer<f64> = DenseLayer::init(3, 2, Activation::Relu, &mut SeededRng::new(1, Stream::Init));
        assert!(matches!(
            layer.forward(array![[1.0, 2.0]].view()),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            layer.forward(array![[1.0, f64::NAN, 0.0]].view()),
            Err(Error::Numeric(_))
        ));
        assert!(DenseLayer::new(Array2::<f64>::zeros((2, 3)), Array1::zeros(3), Activation::Relu).is_err());
    }

    #[test]
    fn he_uniform_bound_and_zero_bias() {
        let layer: DenseLayer<f64> = init_layer(250, 40, &mut SeededRng::new(9, Stream::Init));
        let bound = (6.0f64 / 250.0).sqrt();
        assert!((bound - 0.1549).abs() < 1e-4);
        assert!(layer.weights.iter().all(|w| w.abs() <= bound));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        let a: DenseLayer<f32> = init_layer(8, 4, &mut SeededRng::new(3, Stream::Init));
        let b: DenseLayer<f32> = init_layer(8, 4, &mut SeededRng::new(3, Stream::Init));
        assert_eq!(a, b);
    }
}
