use super::plan::PartitionPlan;
use crate::error::{Error, Result};

pub const HEALTH_INPUT: usize = 23;
pub const HEALTH_CLASSES: usize = 12;
pub const HEALTH_WIDTH: usize = 250;

impl PartitionPlan {
    /// Four-node MLP: ten hidden layers of width 250 split 1/2/3/4, with
    /// skips i→n2, n1→n3, n2→n4.
    pub fn health() -> Self {
        Self::chain(
            "health",
            vec![1, 2, 3, 4],
            HEALTH_WIDTH,
            HEALTH_INPUT,
            HEALTH_CLASSES,
            vec![vec![-1, 1], vec![0, 2], vec![1, 3]],
        )
    }

    /// Three-node chain with skips i→n2 and n1→n3.
    pub fn three_node() -> Self {
        Self::chain(
            "three-node",
            vec![3, 5, 5],
            64,
            HEALTH_INPUT,
            HEALTH_CLASSES,
            vec![vec![-1, 1], vec![0, 2]],
        )
    }

    /// Chain of five compute nodes with a skip over each interior node.
    pub fn health_alt() -> Self {
        Self::chain(
            "1-2-3-2-3",
            vec![1, 2, 3, 2, 3],
            HEALTH_WIDTH,
            HEALTH_INPUT,
            HEALTH_CLASSES,
            spanning_skips(5),
        )
    }

    pub fn three_node_alt() -> Self {
        Self::chain(
            "2-2-4-6",
            vec![2, 2, 4, 6],
            64,
            HEALTH_INPUT,
            HEALTH_CLASSES,
            spanning_skips(4),
        )
    }

    /// (a) the failing node n2 is its parent's only child and has one child.
    pub fn config_a() -> Self {
        Self::chain(
            "config-a",
            vec![1, 1, 1],
            32,
            HEALTH_INPUT,
            HEALTH_CLASSES,
            vec![vec![0, 2]],
        )
    }

    /// (b) n1 feeds n2 and the failing n3; the cloud joins n2 ⊕ (n3 ⊙ n1).
    pub fn config_b() -> Self {
        Self {
            name: "config-b".into(),
            partition: vec![1, 1, 1, 1],
            hidden_width: 32,
            input_dim: HEALTH_INPUT,
            classes: HEALTH_CLASSES,
            edges: Some(vec![[-1, 0], [0, 1], [0, 2], [1, 3], [2, 3]]),
            skips: vec![vec![0, 3, 2]],
        }
    }

    /// (c) the failing n2 is n1's only child and feeds n3 and n4.
    pub fn config_c() -> Self {
        Self {
            name: "config-c".into(),
            partition: vec![1, 1, 1, 1, 1],
            hidden_width: 32,
            input_dim: HEALTH_INPUT,
            classes: HEALTH_CLASSES,
            edges: Some(vec![[-1, 0], [0, 1], [1, 2], [1, 3], [2, 4], [3, 4]]),
            skips: vec![vec![0, 2], vec![0, 3]],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        canonical_configs()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::config(format!("unknown plan preset '{name}'")))
    }
}

fn spanning_skips(nodes: usize) -> Vec<Vec<i64>> {
    (-1..nodes as i64 - 2).map(|s| vec![s, s + 2]).collect()
}

pub fn canonical_configs() -> Vec<PartitionPlan> {
    vec![
        PartitionPlan::config_a(),
        PartitionPlan::config_b(),
        PartitionPlan::config_c(),
        PartitionPlan::health(),
        PartitionPlan::three_node(),
        PartitionPlan::health_alt(),
        PartitionPlan::three_node_alt(),
    ]
}
