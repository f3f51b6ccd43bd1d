//! Failout, gated routing through skip hyperconnections, and the four
//! training/inference schemes.

mod failout;
mod forward;
mod mask;
mod route;
mod scheme;
mod train;
mod weights;

pub use failout::{sample_failout_mask, FailoutConfig};
pub use forward::{backward, gated_forward, predict, run, Phase, Trace};
pub use mask::{AliveMask, MaskOrigin};
pub use route::ActiveRoute;
pub use scheme::{combine_inputs, Join, Scheme, ALL_SCHEMES};
pub use train::{train, EpochStats, TrainConfig, TrainHistory};
pub use weights::{assign_hyperconnection_weights, inference_scaling_mode, HyperWeightScheme};
