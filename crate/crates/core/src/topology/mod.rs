//! Physical nodes, partition plans, hyperconnections, presets and
//! reachability under node failures.

mod model;
mod plan;
mod presets;
mod setting;

pub use model::{build_model, reachability, DistributedModel};
pub use plan::{node_label, EdgeKind, Endpoint, Hyperconnection, PartitionPlan, PhysicalNode, Topology};
pub use presets::{canonical_configs, HEALTH_CLASSES, HEALTH_INPUT, HEALTH_WIDTH};
pub use setting::{FailureSetting, SETTING_NAMES};
