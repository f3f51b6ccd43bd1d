//! Dense feed-forward engine: layers, softmax cross-entropy, backprop and
//! optimizers, generic over `f32`/`f64`.

pub mod layer;
pub mod loss;
pub mod optim;
pub mod real;
pub mod rng;
pub mod stack;

pub use layer::{dense_forward, init_layer, Activation, DenseLayer, LayerGrad};
pub use loss::{argmax_rows, cross_entropy, softmax};
pub use optim::{OptimizerKind, OptimizerState, ParamKey, ParamUpdate};
pub use real::Real;
pub use rng::{SeededRng, Stream};
pub use stack::{model_backward, ForwardCache, Gradients, LayerStack};
