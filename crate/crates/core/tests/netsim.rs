use failout::evaluator::evaluate_exact;
use failout::netsim::{run_sim, run_sim_traced, topology_bandwidth, write_trace, NodeReliability, SimConfig};
use failout::nn::{SeededRng, Stream};
use failout::resilinet::{predict, AliveMask, MaskOrigin, Scheme};
use failout::topology::{build_model, DistributedModel, FailureSetting, PartitionPlan};
use failout::Dataset;
use ndarray::Array2;
use rand::Rng;

fn small_model() -> DistributedModel<f32> {
    let mut plan = PartitionPlan::health();
    plan.hidden_width = 16;
    build_model(&plan, &mut SeededRng::new(2, Stream::Init)).unwrap()
}

fn stream(rows: usize) -> Dataset {
    let mut rng = SeededRng::new(3, Stream::Data);
    let x = Array2::from_shape_fn((rows, 23), |_| rng.random_range(-1.0..1.0));
    let y = (0..rows).map(|_| rng.random_range(0..12)).collect();
    Dataset::new(x, y, 12).unwrap()
}

#[test]
fn nodes_that_never_fail_give_clean_accuracy() {
    let model = small_model();
    let data = stream(25);
    let mut cfg = SimConfig::uniform(3, 1.0, 1.0, 1000.0, 4);
    cfg.nodes = vec![NodeReliability::never_fails(); 3];
    cfg.request_rate_per_hour = 5.0;
    let r = run_sim(&cfg, &model, Scheme::ResiliNet, &data).unwrap();
    assert!(r.availability.iter().all(|&a| a == 1.0));
    let clean = evaluate_exact(
        &model,
        &FailureSetting::no_failure(4).unwrap(),
        Scheme::ResiliNet,
        &data,
        1,
    )
    .unwrap()
    .clean_accuracy;
    // requests cycle through the stream, so whole passes reproduce it exactly
    let whole = r.requests - r.requests % 25;
    assert!(whole > 0);
    let acc = r.accuracy.unwrap();
    let tol = (r.requests % 25) as f64 / r.requests as f64;
    assert!((acc - clean).abs() <= tol + 1e-12, "{acc} vs {clean}");
    assert_eq!(r.undetected_window_requests, 0);
}

#[test]
fn availability_converges_to_mtbf_ratio() {
    let model = small_model();
    let mut cfg = SimConfig::uniform(3, 3521.0, 71.0, 2e6, 9);
    cfg.request_rate_per_hour = 0.0;
    let r = run_sim(&cfg, &model, Scheme::ResiliNet, &stream(4)).unwrap();
    let analytic = 3521.0 / 3592.0;
    // renewal-reward variance of the time-average availability
    let (a, b) = (3521.0f64, 71.0f64);
    let sd = (2.0 * a * a * b * b / ((a + b).powi(3) * 2e6)).sqrt();
    for &av in &r.availability {
        assert!((av - analytic).abs() < 3.0 * sd, "{av} vs {analytic} (sd {sd})");
    }
}

#[test]
fn detection_latency_lies_within_one_heartbeat_of_the_timeout() {
    let model = small_model();
    let mut cfg = SimConfig::uniform(3, 50.0, 5.0, 20_000.0, 1);
    cfg.heartbeat_interval_s = 1.0;
    cfg.timeout_intervals = 3.0;
    cfg.request_rate_per_hour = 0.0;
    let (r, trace) = run_sim_traced(&cfg, &model, Scheme::ResiliNet, &stream(4)).unwrap();
    let lat = r.mean_detection_latency_s.unwrap();
    assert!((2.0..=3.0).contains(&lat), "{lat}");
    assert!(r.detected_crashes > 100);
    // every crash is followed by its detection
    let mut pending = std::collections::HashMap::new();
    for ev in &trace {
        match ev.kind.as_str() {
            "crash" => {
                pending.insert(ev.node, ev.time);
            }
            "detect_crash" => {
                let t = pending.remove(&ev.node).expect("detection without crash");
                let l = (ev.time - t) * 3600.0;
                assert!(l > 2.0 - 1e-6 && l <= 3.0 + 1e-6, "latency {l}");
            }
            _ => {}
        }
    }
    assert!(trace.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn same_seed_same_trace() {
    let model = small_model();
    let data = stream(10);
    let mut cfg = SimConfig::uniform(3, 20.0, 2.0, 500.0, 77);
    cfg.request_rate_per_hour = 20.0;
    let (a, ta) = run_sim_traced(&cfg, &model, Scheme::ResiliNet, &data).unwrap();
    let (b, tb) = run_sim_traced(&cfg, &model, Scheme::ResiliNet, &data).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    cfg.seed = 78;
    let (c, _) = run_sim_traced(&cfg, &model, Scheme::ResiliNet, &data).unwrap();
    assert_ne!(a, c);
    let mut buf = Vec::new();
    write_trace(&ta, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("time,kind,node\n"));
    assert_eq!(text.lines().count(), ta.len() + 1);
}

#[test]
fn steady_failure_matches_the_scenario_accuracy() {
    // n2 crashes almost at once and stays down far beyond the horizon
    let model = small_model();
    let data = stream(20);
    let mut cfg = SimConfig::uniform(3, 1.0, 1.0, 100.0, 5);
    cfg.nodes = vec![
        NodeReliability::never_fails(),
        NodeReliability {
            mtbf_hours: 1e-4,
            mttr_hours: 1e12,
        },
        NodeReliability::never_fails(),
    ];
    cfg.request_rate_per_hour = 200.0;
    cfg.window_hours = 10.0;
    let (r, trace) = run_sim_traced(&cfg, &model, Scheme::ResiliNet, &data).unwrap();
    let detected_at = trace.iter().find(|e| e.kind == "detect_crash").unwrap().time;
    assert!(detected_at < cfg.window_hours);
    assert_eq!(r.crashes, vec![0, 1, 0]);

    let mask = AliveMask::with_failed(&model.topology, &[1], MaskOrigin::ScenarioEnum);
    let preds = predict(&model, &mask, Scheme::ResiliNet, data.features_as::<f32>().view())
        .unwrap()
        .unwrap();
    let (mut n, mut hits) = (0u64, 0u64);
    for e in trace
        .iter()
        .filter(|e| e.kind == "request" && e.time >= cfg.window_hours)
    {
        n += 1;
        hits += (preds[e.node] == data.labels[e.node]) as u64;
    }
    let tail = &r.windows[1..];
    assert_eq!(tail.iter().map(|w| w.requests).sum::<u64>(), n);
    assert_eq!(tail.iter().map(|w| w.correct).sum::<u64>(), hits);

    // every whole pass over the stream scores the scenario accuracy
    let setting = FailureSetting::new("n2", vec![0.0, 0.0, 1.0, 0.0]).unwrap();
    let exact = evaluate_exact(&model, &setting, Scheme::ResiliNet, &data, 1).unwrap();
    let scenario_acc = exact.scenario("n2").unwrap().accuracy;
    let pass = preds.iter().zip(&data.labels).filter(|(p, l)| p == l).count() as f64 / 20.0;
    assert_eq!(pass, scenario_acc);

    let alive = AliveMask::all_alive(&model.topology);
    let per_request = topology_bandwidth(&model.topology, Scheme::ResiliNet, &mask) as u64;
    assert!(per_request < topology_bandwidth(&model.topology, Scheme::Dfg, &alive) as u64);
    assert!(r.traffic.scheme_total(Scheme::ResiliNet) <= r.traffic.scheme_total(Scheme::Dfg));
}

#[test]
fn zero_horizon_is_empty() {
    let model = small_model();
    let cfg = SimConfig::uniform(3, 10.0, 1.0, 0.0, 1);
    let r = run_sim(&cfg, &model, Scheme::ResiliNet, &stream(3)).unwrap();
    assert_eq!(r.requests, 0);
    assert!(r.windows.is_empty());
    assert_eq!(r.traffic.total(), 0);
    assert!(r.accuracy.is_none());
}

#[test]
fn undetected_windows_lose_requests() {
    // long timeout and frequent crashes: some requests hit a dead node
    let model = small_model();
    let mut cfg = SimConfig::uniform(3, 0.5, 0.5, 200.0, 3);
    cfg.heartbeat_interval_s = 60.0;
    cfg.timeout_intervals = 10.0;
    cfg.request_rate_per_hour = 100.0;
    let r = run_sim(&cfg, &model, Scheme::ResiliNet, &stream(10)).unwrap();
    assert!(r.undetected_window_requests > 0);
    assert!(r.lost_requests > 0);
    assert!(r.lost_requests <= r.undetected_window_requests);
}
