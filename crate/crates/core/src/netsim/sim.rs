use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::bandwidth::{topology_bandwidth, TrafficLedger};
use super::config::SimConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Real, SeededRng, Stream};
use crate::resilinet::{predict, ActiveRoute, AliveMask, MaskOrigin, Scheme, ALL_SCHEMES};
use crate::topology::{DistributedModel, Endpoint, Topology};

/// Tie order at equal times: repairs, crashes, heartbeat ticks, requests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Repair(usize),
    Crash(usize),
    /// The monitor's tick at which `node`'s state change becomes visible.
    HeartbeatTick {
        node: usize,
        alive: bool,
    },
    InferenceRequest(usize),
}

impl EventKind {
    fn rank(self) -> (u8, usize) {
        match self {
            EventKind::Repair(n) => (0, n),
            EventKind::Crash(n) => (1, n),
            EventKind::HeartbeatTick { node, .. } => (2, node),
            EventKind::InferenceRequest(s) => (3, s),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Repair(_) => "repair",
            EventKind::Crash(_) => "crash",
            EventKind::HeartbeatTick { alive: true, .. } => "detect_repair",
            EventKind::HeartbeatTick { alive: false, .. } => "detect_crash",
            EventKind::InferenceRequest(_) => "request",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    seq: u64,
    generation: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // reversed so BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.rank().cmp(&self.kind.rank()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: String,
    /// Node id, or the test-sample id for requests.
    pub node: usize,
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    writeln!(out, "time,kind,node")?;
    for r in records {
        writeln!(out, "{},{},{}", r.time, r.kind, r.node)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub start_hours: f64,
    pub requests: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scheme: Scheme,
    pub horizon_hours: f64,
    /// Fraction of the horizon each compute node was up.
    pub availability: Vec<f64>,
    pub analytic_availability: Vec<f64>,
    pub crashes: Vec<u64>,
    pub detected_crashes: u64,
    pub mean_detection_latency_s: Option<f64>,
    pub requests: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
    /// Requests that arrived while the detected and actual masks differed.
    pub undetected_window_requests: u64,
    /// Requests whose payload reached a crashed node and resolved as a guess.
    pub lost_requests: u64,
    pub windows: Vec<WindowStat>,
    pub traffic: TrafficLedger,
}

/// What one request does for a given (detected, actual) pair of masks.
struct Outcome {
    /// Cloud output arrives; equals the forward pass under the detected mask.
    delivered: bool,
    /// Scalars actually sent per edge.
    sent: Vec<(usize, u64)>,
    /// Planned traffic of every scheme under the detected mask.
    planned: Vec<u64>,
}

fn outcome(topo: &Topology, detected: &AliveMask, actual: &AliveMask, scheme: Scheme) -> Outcome {
    let route = ActiveRoute::compute(topo, detected, scheme);
    let v = topo.node_count();
    // a node computes only if it is actually up and all its inputs arrived
    let mut computed = vec![false; v];
    for d in 0..v {
        if !route.present[d] || !actual.is_alive(d) {
            continue;
        }
        computed[d] = route.inputs[d].iter().all(|&e| match topo.edges[e].src {
            Endpoint::Input => true,
            Endpoint::Node(s) => computed[s],
        });
    }
    let sent = route
        .used_edges()
        .filter(|&e| match topo.edges[e].src {
            Endpoint::Input => true,
            Endpoint::Node(s) => computed[s],
        })
        .map(|e| (e, topo.edges[e].payload as u64))
        .collect();
    Outcome {
        delivered: computed[topo.cloud],
        sent,
        planned: ALL_SCHEMES
            .iter()
            .map(|&s| topology_bandwidth(topo, s, detected) as u64)
            .collect(),
    }
}

struct NodeState {
    up: bool,
    detected_up: bool,
    generation: u64,
    last_change: f64,
    uptime: f64,
    crash_time: f64,
    crashes: u64,
    fail: Option<Exp<f64>>,
    repair: Exp<f64>,
    rng: SeededRng,
}

struct Queue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, kind: EventKind, generation: u64) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            kind,
            seq: self.seq,
            generation,
        });
    }
}

pub fn run_sim<T: Real>(
    config: &SimConfig,
    model: &DistributedModel<T>,
    scheme: Scheme,
    stream: &Dataset,
) -> Result<SimReport> {
    simulate(config, model, scheme, stream, None)
}

/// As [`run_sim`], also returning every processed event.
pub fn run_sim_traced<T: Real>(
    config: &SimConfig,
    model: &DistributedModel<T>,
    scheme: Scheme,
    stream: &Dataset,
) -> Result<(SimReport, Vec<TraceRecord>)> {
    let mut trace = Vec::new();
    let report = simulate(config, model, scheme, stream, Some(&mut trace))?;
    Ok((report, trace))
}

fn simulate<T: Real>(
    config: &SimConfig,
    model: &DistributedModel<T>,
    scheme: Scheme,
    stream: &Dataset,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<SimReport> {
    config.validate()?;
    let topo = &model.topology;
    let compute: Vec<usize> = topo.compute_nodes().collect();
    if config.nodes.len() != 1 && config.nodes.len() != compute.len() {
        return Err(Error::config(format!(
            "simulation lists {} nodes but the topology has {} compute nodes",
            config.nodes.len(),
            compute.len()
        )));
    }
    let horizon = config.horizon_hours;
    if horizon > 0.0 && config.request_rate_per_hour > 0.0 && stream.is_empty() {
        return Err(Error::Usage("request stream is empty".into()));
    }
    let interval = config.heartbeat_interval_hours();
    let timeout = config.timeout_hours();
    let classes = model.classes();
    let features = stream.features_as::<T>();

    let reliability: Vec<_> = (0..compute.len()).map(|i| config.node(i)).collect();
    let mut nodes: Vec<NodeState> = reliability
        .iter()
        .zip(&compute)
        .map(|(r, &n)| NodeState {
            up: true,
            detected_up: true,
            generation: 0,
            last_change: 0.0,
            uptime: 0.0,
            crash_time: 0.0,
            crashes: 0,
            fail: r
                .mtbf_hours
                .is_finite()
                .then(|| Exp::new(1.0 / r.mtbf_hours).expect("validated mtbf")),
            repair: Exp::new(1.0 / r.mttr_hours).expect("validated mttr"),
            rng: SeededRng::with_index(config.seed, Stream::Sim, n as u32),
        })
        .collect();
    let node_index: HashMap<usize, usize> = compute.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut request_rng = SeededRng::with_index(config.seed, Stream::Sim, 1 << 20);
    let mut guess_rng = SeededRng::with_index(config.seed, Stream::Sim, (1 << 20) + 1);
    let arrivals =
        (config.request_rate_per_hour > 0.0).then(|| Exp::new(config.request_rate_per_hour).expect("validated rate"));

    let mut queue = Queue {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    for (i, st) in nodes.iter_mut().enumerate() {
        if let Some(d) = st.fail {
            let t = d.sample(&mut st.rng);
            queue.push(t, EventKind::Crash(compute[i]), 0);
        }
    }
    let mut next_sample = 0usize;
    if let Some(a) = arrivals {
        let t = a.sample(&mut request_rng);
        queue.push(t, EventKind::InferenceRequest(next_sample), 0);
    }

    let window_count = if horizon > 0.0 {
        (horizon / config.window_hours).ceil() as usize
    } else {
        0
    };
    let mut windows: Vec<WindowStat> = (0..window_count)
        .map(|w| WindowStat {
            start_hours: w as f64 * config.window_hours,
            requests: 0,
            correct: 0,
            accuracy: None,
        })
        .collect();
    let mut ledger = TrafficLedger::new(topo);
    let mut outcomes: HashMap<(u64, u64), Outcome> = HashMap::new();
    let mut predictions: HashMap<u64, Option<Vec<usize>>> = HashMap::new();
    let (mut requests, mut correct, mut undetected, mut lost) = (0u64, 0u64, 0u64, 0u64);
    let (mut latency_sum, mut detected_crashes) = (0.0f64, 0u64);

    while let Some(ev) = queue.heap.pop() {
        if ev.time > horizon {
            break;
        }
        let now = ev.time;
        match ev.kind {
            EventKind::Crash(n) => {
                let st = &mut nodes[node_index[&n]];
                st.up = false;
                st.uptime += now - st.last_change;
                st.last_change = now;
                st.crash_time = now;
                st.crashes += 1;
                st.generation += 1;
                let repair_at = now + st.repair.sample(&mut st.rng);
                queue.push(repair_at, EventKind::Repair(n), 0);
                if st.detected_up {
                    // last heartbeat strictly before the crash, then silence
                    let last = ((now / interval).ceil() - 1.0) * interval;
                    queue.push(
                        last + timeout,
                        EventKind::HeartbeatTick { node: n, alive: false },
                        st.generation,
                    );
                }
            }
            EventKind::Repair(n) => {
                let st = &mut nodes[node_index[&n]];
                st.up = true;
                st.last_change = now;
                st.generation += 1;
                if let Some(d) = st.fail {
                    let crash_at = now + d.sample(&mut st.rng);
                    queue.push(crash_at, EventKind::Crash(n), 0);
                }
                if !st.detected_up {
                    let next = ((now / interval).ceil() * interval).max(now);
                    queue.push(next, EventKind::HeartbeatTick { node: n, alive: true }, st.generation);
                }
            }
            EventKind::HeartbeatTick { node, alive } => {
                let st = &mut nodes[node_index[&node]];
                if ev.generation != st.generation {
                    continue;
                }
                st.detected_up = alive;
                if !alive {
                    latency_sum += now - st.crash_time;
                    detected_crashes += 1;
                }
            }
            EventKind::InferenceRequest(sample) => {
                let failed_of = |detected: bool| -> Vec<usize> {
                    compute
                        .iter()
                        .zip(&nodes)
                        .filter(|(_, st)| !(if detected { st.detected_up } else { st.up }))
                        .map(|(&n, _)| n)
                        .collect()
                };
                let dmask = AliveMask::with_failed(topo, &failed_of(true), MaskOrigin::SimEvent);
                let amask = AliveMask::with_failed(topo, &failed_of(false), MaskOrigin::SimEvent);
                let key = (dmask.failed_code(), amask.failed_code());
                let out = outcomes
                    .entry(key)
                    .or_insert_with(|| outcome(topo, &dmask, &amask, scheme));
                for &(e, s) in &out.sent {
                    ledger.per_edge[e] += s;
                }
                for (s, &p) in ALL_SCHEMES.iter().zip(&out.planned) {
                    *ledger.per_scheme.get_mut(s.name()).expect("all schemes") += p;
                }
                if key.0 != key.1 {
                    undetected += 1;
                }
                let pred = if out.delivered {
                    if !predictions.contains_key(&key.0) {
                        predictions.insert(key.0, predict(model, &dmask, scheme, features.view())?);
                    }
                    predictions[&key.0].as_ref().map(|p| p[sample])
                } else {
                    None
                };
                if !out.delivered && key.0 != key.1 {
                    let planned_ok = ActiveRoute::compute(topo, &dmask, scheme).reaches_cloud(topo);
                    if planned_ok {
                        lost += 1;
                    }
                }
                let label = pred.unwrap_or_else(|| guess_rng.random_range(0..classes));
                let ok = label == stream.labels[sample];
                requests += 1;
                correct += ok as u64;
                let w = ((now / config.window_hours) as usize).min(window_count.saturating_sub(1));
                windows[w].requests += 1;
                windows[w].correct += ok as u64;

                next_sample = (next_sample + 1) % stream.len();
                if let Some(a) = arrivals {
                    let t = now + a.sample(&mut request_rng);
                    queue.push(t, EventKind::InferenceRequest(next_sample), 0);
                }
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            let (_, node) = ev.kind.rank();
            tr.push(TraceRecord {
                time: now,
                kind: ev.kind.name().to_string(),
                node,
            });
        }
    }

    for w in &mut windows {
        w.accuracy = (w.requests > 0).then(|| w.correct as f64 / w.requests as f64);
    }
    let availability = nodes
        .iter()
        .map(|st| {
            if horizon == 0.0 {
                1.0
            } else {
                let up = st.uptime + if st.up { horizon - st.last_change } else { 0.0 };
                (up / horizon).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(SimReport {
        scheme,
        horizon_hours: horizon,
        availability,
        analytic_availability: reliability.iter().map(|r| r.availability()).collect(),
        crashes: nodes.iter().map(|st| st.crashes).collect(),
        detected_crashes,
        mean_detection_latency_s: (detected_crashes > 0).then(|| latency_sum / detected_crashes as f64 * 3600.0),
        requests,
        correct,
        accuracy: (requests > 0).then(|| correct as f64 / requests as f64),
        undetected_window_requests: undetected,
        lost_requests: lost,
        windows,
        traffic: ledger,
    })
}
