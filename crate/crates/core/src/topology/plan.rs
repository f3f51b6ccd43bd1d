use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Either the data source or a physical node (0-based index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Input,
    Node(usize),
}

impl Endpoint {
    fn from_index(i: i64, nodes: usize) -> Option<Self> {
        match i {
            -1 => Some(Endpoint::Input),
            i if i >= 0 && (i as usize) < nodes => Some(Endpoint::Node(i as usize)),
            _ => None,
        }
    }

    pub fn node(self) -> Option<usize> {
        match self {
            Endpoint::Input => None,
            Endpoint::Node(n) => Some(n),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Input => f.write_str("i"),
            Endpoint::Node(n) => write!(f, "n{}", n + 1),
        }
    }
}

/// Label of a physical node as used in scenario tables (`n1`, `n2`, ...).
pub fn node_label(node: usize) -> String {
    Endpoint::Node(node).to_string()
}

/// Serialized description of how a network is split over physical nodes.
///
/// Node indices in `edges` and `skips` are 0-based; `-1` is the data source.
/// `edges` lists simple hyperconnections and defaults to a chain. A skip is
/// `[src, dst]`, or `[src, dst, via]` when the bypassed parent of `dst` is
/// ambiguous (multi-parent joins).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    #[serde(default)]
    pub name: String,
    pub partition: Vec<usize>,
    pub hidden_width: usize,
    pub input_dim: usize,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[i64; 2]>>,
    #[serde(default)]
    pub skips: Vec<Vec<i64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeKind {
    Simple,
    Skip { span: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperconnection {
    pub src: Endpoint,
    pub dst: usize,
    pub kind: EdgeKind,
    /// For skips: the simple parent of `dst` this edge detours around.
    pub bypasses: Option<usize>,
    /// Scalars carried per sample.
    pub payload: usize,
    /// A linear projection at the destination maps `payload` to the
    /// destination's input width.
    pub projected: bool,
    pub weight: f64,
}

impl Hyperconnection {
    pub fn is_skip(&self) -> bool {
        matches!(self.kind, EdgeKind::Skip { .. })
    }

    pub fn label(&self) -> String {
        format!("{}->{}", self.src, Endpoint::Node(self.dst))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalNode {
    pub id: usize,
    /// Widths of the layers hosted on the node; the cloud's last entry is the
    /// class-score layer.
    pub hosted_layers: Vec<usize>,
    pub depth: usize,
    pub is_cloud: bool,
    pub input_dim: usize,
}

/// Validated graph of physical nodes and hyperconnections. Simple edges come
/// first in `edges`, then skips in plan order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<PhysicalNode>,
    pub edges: Vec<Hyperconnection>,
    pub cloud: usize,
    pub input_dim: usize,
    pub hidden_width: usize,
    pub classes: usize,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Every node except the cloud.
    pub fn compute_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&n| n != self.cloud)
    }

    pub fn incoming(&self, dst: usize) -> impl Iterator<Item = (usize, &Hyperconnection)> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.dst == dst)
    }

    pub fn skip_indices(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].is_skip()).collect()
    }

    pub fn output_dim(&self, src: Endpoint) -> usize {
        match src {
            Endpoint::Input => self.input_dim,
            Endpoint::Node(_) => self.hidden_width,
        }
    }
}

impl PartitionPlan {
    pub fn chain(
        name: &str,
        partition: Vec<usize>,
        hidden_width: usize,
        input_dim: usize,
        classes: usize,
        skips: Vec<Vec<i64>>,
    ) -> Self {
        Self {
            name: name.to_string(),
            partition,
            hidden_width,
            input_dim,
            classes,
            edges: None,
            skips,
        }
    }

    pub fn node_count(&self) -> usize {
        self.partition.len()
    }

    pub fn total_hidden_layers(&self) -> usize {
        self.partition.iter().sum()
    }

    pub fn simple_edges(&self) -> Vec<[i64; 2]> {
        match &self.edges {
            Some(e) => e.clone(),
            None => (0..self.partition.len() as i64).map(|i| [i - 1, i]).collect(),
        }
    }

    /// Same plan keeping only the skips whose flag is set.
    pub fn with_skip_subset(&self, keep: &[bool]) -> Self {
        let mut plan = self.clone();
        plan.skips = self
            .skips
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(s, _)| s.clone())
            .collect();
        plan
    }

    pub fn without_skips(&self) -> Self {
        let mut plan = self.clone();
        plan.skips.clear();
        plan
    }

    /// Checks every structural rule and derives depths, payload sizes and
    /// projections. All violations are reported together.
    pub fn topology(&self) -> Result<Topology> {
        let mut errs = Vec::new();
        let v = self.partition.len();
        if v == 0 {
            return Err(Error::Validation(vec!["partition is empty".into()]));
        }
        for (i, &c) in self.partition.iter().enumerate() {
            if c == 0 {
                errs.push(format!("{} hosts no layers", node_label(i)));
            }
        }
        if self.hidden_width == 0 {
            errs.push("hidden_width must be >= 1".into());
        }
        if self.input_dim == 0 {
            errs.push("input_dim must be >= 1".into());
        }
        if self.classes < 2 {
            errs.push("classes must be >= 2".into());
        }

        // simple edges
        let mut simple: Vec<(Endpoint, usize)> = Vec::new();
        let mut seen = BTreeSet::new();
        for &[s, d] in &self.simple_edges() {
            let src = Endpoint::from_index(s, v);
            let dst = Endpoint::from_index(d, v).and_then(Endpoint::node);
            match (src, dst) {
                (Some(src), Some(dst)) => {
                    if s >= d {
                        errs.push(format!("edge {s}->{d} must point to a higher node index"));
                    } else if !seen.insert((src, dst)) {
                        errs.push(format!("duplicate edge {src}->{}", node_label(dst)));
                    } else {
                        simple.push((src, dst));
                    }
                }
                _ => errs.push(format!("edge {s}->{d} references an unknown node")),
            }
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }

        let parents = |n: usize| simple.iter().filter(move |(_, d)| *d == n).map(|(s, _)| *s);
        let mut depth = vec![0i64; v];
        for n in 0..v {
            let ps: Vec<Endpoint> = parents(n).collect();
            if ps.is_empty() {
                errs.push(format!("{} has no incoming edge", node_label(n)));
                continue;
            }
            let pds: Vec<i64> = ps
                .iter()
                .map(|p| match p {
                    Endpoint::Input => -1,
                    Endpoint::Node(k) => depth[*k],
                })
                .collect();
            depth[n] = pds.iter().copied().max().unwrap_or(-1) + 1;
            if pds.iter().any(|&d| d + 1 != depth[n]) {
                errs.push(format!(
                    "{} has parents at different depths; simple edges must join adjacent depths",
                    node_label(n)
                ));
            }
        }
        let sinks: Vec<usize> = (0..v)
            .filter(|&n| !simple.iter().any(|(s, _)| *s == Endpoint::Node(n)))
            .collect();
        if sinks.len() != 1 {
            errs.push(format!(
                "expected exactly one cloud (sink) node, found {}",
                sinks.iter().map(|&n| node_label(n)).collect::<Vec<_>>().join(",")
            ));
        }
        if !simple.iter().any(|(s, _)| *s == Endpoint::Input) {
            errs.push("no edge leaves the input".into());
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        let cloud = sinks[0];
        if (0..v).any(|n| n != cloud && depth[n] >= depth[cloud]) {
            errs.push(format!("cloud {} is not strictly the deepest node", node_label(cloud)));
        }

        let width_in = |n: usize| {
            if depth[n] == 0 {
                self.input_dim
            } else {
                self.hidden_width
            }
        };
        let width_out = |e: Endpoint| match e {
            Endpoint::Input => self.input_dim,
            Endpoint::Node(_) => self.hidden_width,
        };

        let mut edges: Vec<Hyperconnection> = simple
            .iter()
            .map(|&(src, dst)| Hyperconnection {
                src,
                dst,
                kind: EdgeKind::Simple,
                bypasses: None,
                payload: width_out(src),
                projected: width_out(src) != width_in(dst),
                weight: 1.0,
            })
            .collect();

        // nodes reachable from `from` along simple edges
        let descendants = |from: Endpoint| {
            let mut out = BTreeSet::new();
            let mut frontier = vec![from];
            while let Some(cur) = frontier.pop() {
                for (s, d) in &simple {
                    if *s == cur && out.insert(*d) {
                        frontier.push(Endpoint::Node(*d));
                    }
                }
            }
            out
        };

        let mut skip_seen = BTreeSet::new();
        for raw in &self.skips {
            if raw.len() != 2 && raw.len() != 3 {
                errs.push(format!("skip {raw:?} must be [src, dst] or [src, dst, via]"));
                continue;
            }
            let (s, d) = (raw[0], raw[1]);
            let Some(src) = Endpoint::from_index(s, v) else {
                errs.push(format!("skip {s}->{d}: unknown source"));
                continue;
            };
            if src == Endpoint::Node(cloud) {
                errs.push(format!("skip {s}->{d} starts at the cloud"));
                continue;
            }
            let dst = match Endpoint::from_index(d, v).and_then(Endpoint::node) {
                Some(n) => n,
                None if d >= v as i64 => {
                    errs.push(format!("skip {src}->{d} crosses the cloud {}", node_label(cloud)));
                    continue;
                }
                None => {
                    errs.push(format!("skip {s}->{d}: unknown destination"));
                    continue;
                }
            };
            let src_depth = match src {
                Endpoint::Input => -1,
                Endpoint::Node(k) => depth[k],
            };
            let span = depth[dst] - src_depth - 1;
            if span < 1 {
                errs.push(format!(
                    "skip {src}->{} bypasses no node (span {span})",
                    node_label(dst)
                ));
                continue;
            }
            let reach = descendants(src);
            let candidates: Vec<usize> = parents(dst)
                .filter_map(Endpoint::node)
                .filter(|p| reach.contains(p))
                .collect();
            let via = match raw.get(2) {
                Some(&w) => {
                    if w >= 0 && candidates.contains(&(w as usize)) {
                        w as usize
                    } else {
                        errs.push(format!("skip {src}->{}: {w} is not a bypassed parent", node_label(dst)));
                        continue;
                    }
                }
                None => match candidates.as_slice() {
                    [only] => *only,
                    [] => {
                        errs.push(format!("skip {src}->{} bypasses no parent", node_label(dst)));
                        continue;
                    }
                    _ => {
                        errs.push(format!(
                            "skip {src}->{} is ambiguous; add the bypassed node as a third element",
                            node_label(dst)
                        ));
                        continue;
                    }
                },
            };
            if !skip_seen.insert((src, dst)) {
                errs.push(format!("duplicate skip {src}->{}", node_label(dst)));
                continue;
            }
            edges.push(Hyperconnection {
                src,
                dst,
                kind: EdgeKind::Skip { span: span as usize },
                bypasses: Some(via),
                payload: width_out(src),
                projected: width_out(src) != width_in(dst),
                weight: 1.0,
            });
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }

        let nodes = (0..v)
            .map(|n| {
                let mut hosted = vec![self.hidden_width; self.partition[n]];
                if n == cloud {
                    hosted.push(self.classes);
                }
                PhysicalNode {
                    id: n,
                    hosted_layers: hosted,
                    depth: depth[n] as usize,
                    is_cloud: n == cloud,
                    input_dim: width_in(n),
                }
            })
            .collect();
        Ok(Topology {
            nodes,
            edges,
            cloud,
            input_dim: self.input_dim,
            hidden_width: self.hidden_width,
            classes: self.classes,
        })
    }
}
